"""Command-line interface.

Commands: bound, simulate, sweep, check.  Configuration comes from an
optional JSON file (--config) with individual flags taking precedence.
Every command is deterministic given its full configuration including the
master seed.

Exit codes: 0 success, 1 validation or usage error, 2 property violation,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from .analysis import (ALPHA_DEFAULT, RUN_CSV_FIELDS, bound_from_distribution,
                       estimate_consensus, lemma_check_report)
from .dynamics import SimParams
from .errors import DeffuantLabError
from .graphs import Graph, generate, load_edge_list
from .initial import (PointMass, TriangularBall, UniformBall, UniformBox,
                      sample_batch)
from .opinion_space import Ball, Box, Norm, OpinionSpace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROPERTY = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; route through our own table
    def error(self, message):
        raise UsageError(message)


def parse_norm_spec(token: str, dimension: int) -> Norm:
    token = token.lower()
    if token == "l1":
        return Norm.l1(dimension)
    if token == "l2":
        return Norm.l2(dimension)
    if token == "linf":
        return Norm.linf(dimension)
    if token.startswith("lp"):
        try:
            p = float(token[2:])
        except ValueError:
            raise UsageError(f"bad norm spec {token!r}")
        return Norm.lp(dimension, p)
    raise UsageError(f"unknown norm {token!r}; expected l1, l2, linf or lp<p>")


def parse_space_spec(spec: str) -> OpinionSpace:
    """ball:d:r:norm (centered at the origin) or box:d:norm (unit box)."""
    parts = spec.split(":")
    if parts[0] == "ball" and len(parts) == 4:
        d = int(parts[1])
        r = float(parts[2])
        norm = parse_norm_spec(parts[3], d)
        return OpinionSpace(Ball(np.zeros(d), r), norm)
    if parts[0] == "box" and len(parts) == 3:
        d = int(parts[1])
        norm = parse_norm_spec(parts[2], d)
        return OpinionSpace(Box(np.zeros(d), np.ones(d)), norm)
    raise UsageError(
        f"bad space spec {spec!r}; expected ball:d:r:norm or box:d:norm")


def parse_dist_spec(spec: str, space: OpinionSpace):
    parts = spec.split(":")
    kind = parts[0]
    shape = space.shape
    if kind == "uniform" and len(parts) == 1:
        if isinstance(shape, Ball):
            return UniformBall(space)
        return UniformBox(space)
    if kind == "triangular" and len(parts) == 1:
        return TriangularBall(space)
    if kind == "point" and len(parts) == 2:
        coords = [float(tok) for tok in parts[1].split(",")]
        return PointMass(space, np.array(coords, dtype=np.float64))
    raise UsageError(
        f"bad dist spec {spec!r}; expected uniform, triangular or point:coords")


def parse_graph_spec(spec: str, seed: int) -> Graph:
    parts = spec.split(":")
    kind = parts[0]
    if kind == "file":
        if len(parts) != 2:
            raise UsageError("file graph spec is file:PATH")
        with open(parts[1], "r", encoding="utf-8") as fh:
            return load_edge_list(fh.read())
    try:
        if kind in ("complete", "path", "cycle", "star") and len(parts) == 2:
            return generate(kind, (int(parts[1]),), seed)
        if kind == "torus" and len(parts) == 2:
            w, h = parts[1].lower().split("x")
            return generate("torus2d", (int(w), int(h)), seed)
        if kind == "er" and len(parts) == 3:
            return generate("erdos_renyi_connected",
                            (int(parts[1]), float(parts[2])), seed)
    except ValueError as exc:
        raise UsageError(f"bad graph spec {spec!r}: {exc}")
    raise UsageError(
        f"bad graph spec {spec!r}; expected complete:N, path:N, cycle:N, "
        "star:N, torus:WxH, er:N:P or file:PATH")


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path}: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return cfg


def _merged(args, cfg: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def _require(value, name: str):
    if value is None:
        raise UsageError(f"missing required option --{name}")
    return value


def _write_text(path: Optional[str], text: str):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _append_csv(path: str, header: tuple, rows: list):
    """Append rows, writing the header only when the file is new or empty."""
    need_header = not (os.path.exists(path) and os.path.getsize(path) > 0)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        if need_header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _build_params(args, cfg) -> SimParams:
    tau = _require(_merged(args, cfg, "tau"), "tau")
    mu = _merged(args, cfg, "mu", 0.5)
    eps_stop = _merged(args, cfg, "eps-stop")
    max_events = _merged(args, cfg, "max-events")
    try:
        return SimParams(tau=float(tau), mu=float(mu),
                         eps_stop=None if eps_stop is None else float(eps_stop),
                         max_events=None if max_events is None else int(max_events))
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_bound(args) -> int:
    cfg = _load_config(args.config)
    space = parse_space_spec(_require(_merged(args, cfg, "space"), "space"))
    dist = parse_dist_spec(_merged(args, cfg, "dist", "uniform"), space)
    tau = float(_require(_merged(args, cfg, "tau"), "tau"))
    seed = int(_merged(args, cfg, "seed", 0))
    n_mc = int(_merged(args, cfg, "mc-samples", 100_000))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5, 0)))
    report = bound_from_distribution(tau, space, dist, rng=rng, n_mc=n_mc)
    payload = report.to_dict()
    if not report.applicable:
        payload["note"] = "inapplicable: tau <= diameter/2"
    _write_text(args.out, _json_text(payload))
    return EXIT_OK


def _simulation_inputs(args, cfg):
    seed = int(_merged(args, cfg, "seed", 0))
    graph = parse_graph_spec(_require(_merged(args, cfg, "graph"), "graph"),
                             seed)
    space = parse_space_spec(_require(_merged(args, cfg, "space"), "space"))
    dist = parse_dist_spec(_merged(args, cfg, "dist", "uniform"), space)
    n_runs = int(_merged(args, cfg, "runs", 100))
    if n_runs < 1:
        raise UsageError(f"--runs must be >= 1, got {n_runs}")
    workers = _merged(args, cfg, "workers")
    workers = None if workers is None else int(workers)
    alpha = float(_merged(args, cfg, "alpha", ALPHA_DEFAULT))
    return seed, graph, space, dist, n_runs, workers, alpha


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed, graph, space, dist, n_runs, workers, alpha = _simulation_inputs(args, cfg)
    params = _build_params(args, cfg)

    n_probes = int(_merged(args, cfg, "probes", 0))
    traj_dir = _merged(args, cfg, "traj-dir")
    if n_probes:
        probe_rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(4,)))
        params.probe_points = list(sample_batch(dist, n_probes, probe_rng))
    params.record_trajectories = traj_dir is not None

    report = estimate_consensus(graph, space, dist, params, n_runs, seed,
                                workers=workers, alpha=alpha,
                                keep_outcomes=traj_dir is not None)
    bound_rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(5, 0)))
    bound = bound_from_distribution(params.tau, space, dist, rng=bound_rng)

    summary = {
        "command": "simulate",
        "graph": _merged(args, cfg, "graph"),
        "space": _merged(args, cfg, "space"),
        "dist": _merged(args, cfg, "dist", "uniform"),
        "tau": params.tau,
        "mu": params.mu,
        "eps_stop": params.eps_stop,
        "max_events": params.max_events,
        "alpha": alpha,
        "bound": bound.to_dict(),
        "estimate": report.to_dict(),
    }
    _write_text(args.out, _json_text(summary))

    runs_out = _merged(args, cfg, "runs-out")
    if runs_out:
        _append_csv(runs_out, RUN_CSV_FIELDS,
                    [rec.csv_row() for rec in report.runs])
    if traj_dir:
        os.makedirs(traj_dir, exist_ok=True)
        for rec, outcome in zip(report.runs, report.outcomes):
            path = os.path.join(traj_dir, f"run_{rec.run_id:05d}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                outcome.trajectory.to_csv(fh)
    return EXIT_OK


SWEEP_CSV_FIELDS = ("tau", "clamped_bound", "point_estimate", "wilson_lo",
                    "wilson_hi", "undecided")


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    seed, graph, space, dist, n_runs, workers, alpha = _simulation_inputs(args, cfg)
    taus_spec = _require(_merged(args, cfg, "taus"), "taus")
    if isinstance(taus_spec, str):
        try:
            taus = [float(tok) for tok in taus_spec.split(",") if tok.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --taus value: {exc}")
    else:
        taus = [float(t) for t in taus_spec]
    if not taus:
        raise UsageError("--taus grid is empty")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise UsageError("--taus grid must be strictly ascending")

    mu = float(_merged(args, cfg, "mu", 0.5))
    eps_stop = _merged(args, cfg, "eps-stop")
    max_events = _merged(args, cfg, "max-events")
    rows = []
    for i, tau in enumerate(taus):
        try:
            params = SimParams(
                tau=tau, mu=mu,
                eps_stop=None if eps_stop is None else float(eps_stop),
                max_events=None if max_events is None else int(max_events))
        except ValueError as exc:
            raise UsageError(str(exc))
        bound_rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(5, i)))
        bound = bound_from_distribution(tau, space, dist, rng=bound_rng)
        # rows share the master seed so estimates are variance-paired
        report = estimate_consensus(graph, space, dist, params, n_runs, seed,
                                    workers=workers, alpha=alpha)
        clamped = "" if bound.clamped_bound is None else repr(bound.clamped_bound)
        rows.append([repr(float(tau)), clamped,
                     repr(report.point_estimate), repr(report.wilson_lo),
                     repr(report.wilson_hi), str(report.n_undecided)])
    out = _merged(args, cfg, "out")
    if out:
        _append_csv(out, SWEEP_CSV_FIELDS, rows)
    else:
        sys.stdout.write(",".join(SWEEP_CSV_FIELDS) + "\n")
        for row in rows:
            sys.stdout.write(",".join(row) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _load_config(args.config)
    seed = int(_merged(args, cfg, "seed", 20260816))
    trials = int(_merged(args, cfg, "trials", 100_000))
    traces = int(_merged(args, cfg, "traces", 20))

    if args.inject_fault:
        # test hook: force an out-of-range convergence parameter past the
        # constructor, then demand that validation still catches it
        params = SimParams(tau=1.0, mu=0.5)
        params.mu = 0.7
        try:
            params.validate()
        except ValueError as exc:
            sys.stderr.write(f"FAIL params_validation(injected): {exc}\n")
            return EXIT_PROPERTY
        sys.stderr.write(
            "FAIL params_validation(injected): mu=0.7 was accepted\n")
        return EXIT_PROPERTY

    report = lemma_check_report(n_geometry_trials=trials, n_traces=traces,
                                master_seed=seed)
    text = report.to_text()
    _write_text(args.out, text)
    return EXIT_OK if report.passed else EXIT_PROPERTY


def build_parser() -> _Parser:
    parser = _Parser(prog="deffuant-lab",
                     description="Simulation laboratory for threshold-gated "
                                 "opinion averaging on graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags win")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help="output path (default stdout)")

    p_bound = sub.add_parser("bound", help="compute the consensus lower bound")
    common(p_bound)
    p_bound.add_argument("--space", help="ball:d:r:norm or box:d:norm")
    p_bound.add_argument("--dist", help="uniform | triangular | point:coords")
    p_bound.add_argument("--tau", type=float, help="confidence threshold")
    p_bound.add_argument("--mc-samples", type=int,
                         help="Monte Carlo samples when no closed form")
    p_bound.set_defaults(func=cmd_bound)

    def sim_common(p):
        common(p)
        p.add_argument("--graph",
                       help="complete:N | path:N | cycle:N | star:N | "
                            "torus:WxH | er:N:P | file:PATH")
        p.add_argument("--space", help="ball:d:r:norm or box:d:norm")
        p.add_argument("--dist", help="uniform | triangular | point:coords")
        p.add_argument("--mu", type=float, help="convergence parameter")
        p.add_argument("--eps-stop", type=float, help="absorption resolution")
        p.add_argument("--max-events", type=int, help="event budget per run")
        p.add_argument("--runs", type=int, help="number of replicates")
        p.add_argument("--workers", type=int, help="worker threads")
        p.add_argument("--alpha", type=float,
                       help="interval significance level (default 0.05)")

    p_sim = sub.add_parser("simulate", help="Monte Carlo consensus estimate")
    sim_common(p_sim)
    p_sim.add_argument("--tau", type=float, help="confidence threshold")
    p_sim.add_argument("--runs-out", help="per-run CSV path (appends)")
    p_sim.add_argument("--probes", type=int,
                       help="number of recorded probe points")
    p_sim.add_argument("--traj-dir", help="directory for trajectory CSVs")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="bound and estimate over a tau grid")
    sim_common(p_sweep)
    p_sweep.add_argument("--taus", help="comma-separated ascending tau grid")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="run the property-check suite")
    common(p_check)
    p_check.add_argument("--trials", type=int,
                         help="geometry trials (default 100000)")
    p_check.add_argument("--traces", type=int,
                         help="simulated traces (default 20)")
    p_check.add_argument("--inject-fault", action="store_true", default=False,
                         help="test hook: flip mu out of range, expect failure")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ValueError, DeffuantLabError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
