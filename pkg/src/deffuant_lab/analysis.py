"""Bound computation, Monte Carlo estimation, and the property-check report.

The headline quantity is the universal consensus lower bound
1 - E||X - c|| / (tau - D/2), valid whenever tau > D/2, where D and c are
the diameter and center of the opinion space and X follows the initial
distribution.  The bound depends on the space, the norm, the threshold and
the initial law, but not on the graph.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist, fmean
from typing import Optional, Sequence

import numpy as np

from .dynamics import Classification, RunOutcome, SimParams, load_kernel, run
from .errors import InapplicableBoundError, NoClosedFormError
from .graphs import Graph
from .initial import (InitialDistribution, expected_disagreement_analytic,
                      expected_disagreement_mc)
from .opinion_space import Norm, OpinionSpace, interpolate

ALPHA_DEFAULT = 0.05
# two-sided 95% critical value, pinned for reproducibility
Z_95 = 1.959964


def critical_z(alpha: float) -> float:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha == ALPHA_DEFAULT:
        return Z_95
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def wilson_interval(successes: int, trials: int,
                    alpha: float = ALPHA_DEFAULT) -> tuple:
    """Wilson score interval for a binomial proportion; well-behaved at 0/1."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not (0 <= successes <= trials):
        raise ValueError("successes must lie in [0, trials]")
    z = critical_z(alpha)
    n = float(trials)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    # the exact roots at the degenerate proportions are 0 and 1; round-off
    # in the closed form can land an ulp inside, so snap them
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class BoundReport:
    """The universal lower bound and its ingredients."""

    tau: float
    diameter: float
    center: np.ndarray
    expected_disagreement: float
    expected_disagreement_se: Optional[float]
    applicable: bool
    raw_bound: Optional[float]
    clamped_bound: Optional[float]

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "diameter": self.diameter,
            "center": [float(c) for c in self.center],
            "expected_disagreement": self.expected_disagreement,
            "expected_disagreement_se": self.expected_disagreement_se,
            "applicable": self.applicable,
            "raw_bound": self.raw_bound,
            "clamped_bound": self.clamped_bound,
        }


def consensus_lower_bound(tau: float, space: OpinionSpace,
                          expected_disagreement: float,
                          se: Optional[float] = None) -> BoundReport:
    """Assemble the bound report; inapplicability is data, not an error."""
    if not (math.isfinite(tau) and tau > 0.0):
        raise ValueError(f"tau must be finite and positive, got {tau}")
    if expected_disagreement < 0.0:
        raise ValueError("expected disagreement must be nonnegative")
    half_diam = space.diameter / 2.0
    applicable = tau > half_diam
    raw = None
    clamped = None
    if applicable:
        raw = 1.0 - expected_disagreement / (tau - half_diam)
        clamped = max(0.0, raw)
    return BoundReport(
        tau=float(tau),
        diameter=float(space.diameter),
        center=np.array(space.center, dtype=np.float64),
        expected_disagreement=float(expected_disagreement),
        expected_disagreement_se=None if se is None else float(se),
        applicable=applicable,
        raw_bound=raw,
        clamped_bound=clamped,
    )


def bound_from_distribution(tau: float, space: OpinionSpace,
                            dist: InitialDistribution,
                            rng: Optional[np.random.Generator] = None,
                            n_mc: int = 100_000) -> BoundReport:
    """Bound with the expected disagreement filled in.

    Uses the closed form when the distribution has one, otherwise a Monte
    Carlo estimate with its standard error (requires an rng).
    """
    try:
        e = expected_disagreement_analytic(dist)
        se = None
    except NoClosedFormError:
        if rng is None:
            raise ValueError(
                "distribution has no closed-form disagreement; pass an rng "
                "for Monte Carlo estimation")
        e, se = expected_disagreement_mc(dist, space.center, n_mc, rng)
    return consensus_lower_bound(tau, space, e, se)


def example_uniform_bound(d: int, r: float, tau: float) -> float:
    """Closed-form clamp-free bound for a uniform ball: 1 - dr/((d+1)(tau-r))."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if r <= 0.0:
        raise ValueError("radius must be positive")
    if not tau > r:
        raise InapplicableBoundError(
            f"bound requires tau > r (ball diameter/2); got tau={tau}, r={r}")
    return 1.0 - (d * r) / ((d + 1) * (tau - r))


def example_triangular_bound(d: int, r: float, tau: float) -> float:
    """Center-weighted (triangular) ball: 1 - dr/((d+2)(tau-r))."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if r <= 0.0:
        raise ValueError("radius must be positive")
    if not tau > r:
        raise InapplicableBoundError(
            f"bound requires tau > r (ball diameter/2); got tau={tau}, r={r}")
    return 1.0 - (d * r) / ((d + 2) * (tau - r))


RUN_CSV_FIELDS = ("run_id", "seed", "classification", "n_classes", "events",
                  "final_time", "T_star", "event_A")


@dataclass(frozen=True)
class RunRecord:
    """Flat per-replicate summary, one CSV row."""

    run_id: int
    seed: int
    classification: str
    n_classes: int
    total_events: int
    final_time: float
    t_star: Optional[float]
    event_a: Optional[bool]
    max_intra_class_distance: Optional[float] = None
    min_cross_class_distance: Optional[float] = None
    membership_violations: int = 0
    probe_increase_count: int = 0
    max_probe_increment: float = 0.0
    conservation_drift: float = 0.0
    eps_stop: float = 0.0

    def csv_row(self) -> list:
        return [
            str(self.run_id),
            str(self.seed),
            self.classification,
            str(self.n_classes),
            str(self.total_events),
            repr(self.final_time),
            "" if self.t_star is None else repr(self.t_star),
            "" if self.event_a is None else str(int(self.event_a)),
        ]


def record_from_outcome(run_id: int, seed: int, outcome: RunOutcome) -> RunRecord:
    return RunRecord(
        run_id=run_id,
        seed=seed,
        classification=outcome.classification.value,
        n_classes=outcome.n_classes,
        total_events=outcome.total_events,
        final_time=outcome.final_time,
        t_star=outcome.t_star,
        event_a=outcome.event_a,
        max_intra_class_distance=outcome.max_intra_class_distance,
        min_cross_class_distance=outcome.min_cross_class_distance,
        membership_violations=outcome.membership_violations,
        probe_increase_count=outcome.probe_increase_count,
        max_probe_increment=outcome.max_probe_increment,
        conservation_drift=outcome.conservation_drift,
        eps_stop=outcome.eps_stop,
    )


@dataclass
class EstimateReport:
    """Monte Carlo consensus-frequency estimate with a Wilson interval.

    Undecided runs count against consensus in both estimates, keeping the
    comparison with the theoretical lower bound one-sided.
    """

    n_runs: int
    n_consensus: int
    n_fragmented: int
    n_undecided: int
    point_estimate: float
    pessimistic_estimate: float
    alpha: float
    wilson_lo: float
    wilson_hi: float
    mean_t_star: Optional[float]
    event_a_frequency: float
    master_seed: int
    kernel: str
    runs: list = field(default_factory=list)
    outcomes: Optional[list] = None

    def validate(self):
        if self.n_consensus + self.n_fragmented + self.n_undecided != self.n_runs:
            raise ValueError("classification counts do not sum to n_runs")
        if not (self.wilson_lo <= self.point_estimate <= self.wilson_hi):
            raise ValueError("point estimate outside its Wilson interval")
        if self.pessimistic_estimate > self.point_estimate:
            raise ValueError("pessimistic estimate exceeds point estimate")

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "n_consensus": self.n_consensus,
            "n_fragmented": self.n_fragmented,
            "n_undecided": self.n_undecided,
            "point_estimate": self.point_estimate,
            "pessimistic_estimate": self.pessimistic_estimate,
            "alpha": self.alpha,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "mean_t_star": self.mean_t_star,
            "event_a_frequency": self.event_a_frequency,
            "master_seed": self.master_seed,
            "kernel": self.kernel,
        }


def estimate_consensus(graph: Graph, space: OpinionSpace,
                       dist: InitialDistribution, params: SimParams,
                       n_runs: int, master_seed: int,
                       workers: Optional[int] = None,
                       alpha: float = ALPHA_DEFAULT,
                       kernel=None, keep_outcomes: bool = False) -> EstimateReport:
    """Run independent replicates and summarize.

    Replicate r draws its generator from SeedSequence(master_seed,
    spawn_key=(r,)), so the result is independent of worker scheduling and
    reproducible from master_seed alone.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    params.validate()
    n_workers = workers if workers else (os.cpu_count() or 1)
    kern = kernel if kernel is not None else load_kernel()

    records: list = [None] * n_runs
    outcomes: list = [None] * n_runs if keep_outcomes else None

    def one(r: int):
        child = np.random.SeedSequence(master_seed, spawn_key=(r,))
        seed_digest = int(child.generate_state(1, np.uint64)[0])
        rng = np.random.default_rng(child)
        outcome = run(graph, space, dist, params, rng, kernel=kern)
        return r, seed_digest, outcome

    if n_workers > 1 and n_runs > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = pool.map(one, range(n_runs))
            for r, seed_digest, outcome in results:
                records[r] = record_from_outcome(r, seed_digest, outcome)
                if keep_outcomes:
                    outcomes[r] = outcome
    else:
        for r in range(n_runs):
            _, seed_digest, outcome = one(r)
            records[r] = record_from_outcome(r, seed_digest, outcome)
            if keep_outcomes:
                outcomes[r] = outcome

    n_consensus = sum(1 for rec in records
                      if rec.classification == Classification.CONSENSUS.value)
    n_fragmented = sum(1 for rec in records
                       if rec.classification == Classification.FRAGMENTED.value)
    n_undecided = n_runs - n_consensus - n_fragmented
    point = n_consensus / n_runs
    pessimistic = n_consensus / n_runs
    lo, hi = wilson_interval(n_consensus, n_runs, alpha)
    t_stars = [rec.t_star for rec in records if rec.t_star is not None]
    mean_t_star = fmean(t_stars) if t_stars else None
    event_a_freq = sum(1 for rec in records if rec.event_a) / n_runs
    kernel_name = getattr(kern, "KERNEL_NAME", "unknown")

    report = EstimateReport(
        n_runs=n_runs,
        n_consensus=n_consensus,
        n_fragmented=n_fragmented,
        n_undecided=n_undecided,
        point_estimate=point,
        pessimistic_estimate=pessimistic,
        alpha=alpha,
        wilson_lo=lo,
        wilson_hi=hi,
        mean_t_star=mean_t_star,
        event_a_frequency=event_a_freq,
        master_seed=master_seed,
        kernel=kernel_name,
        runs=records,
        outcomes=outcomes,
    )
    report.validate()
    return report


@dataclass(frozen=True)
class PropertyRecord:
    """Outcome of one checked property over many trials."""

    name: str
    trials: int
    violations: int
    worst_margin: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = (f"{status} {self.name}: trials={self.trials} "
               f"violations={self.violations} worst_margin={self.worst_margin:.3e}")
        if self.note:
            out += f" ({self.note})"
        return out


@dataclass
class CheckReport:
    records: list

    @property
    def passed(self) -> bool:
        return all(rec.passed for rec in self.records)

    def to_text(self) -> str:
        return "\n".join(rec.line() for rec in self.records)


def _geometry_trials(n_trials: int, rng: np.random.Generator) -> list:
    """Both pairwise-averaging triangle inequalities on random inputs.

    a, b are drawn from a ball (a valid opinion space); the reference point
    c ranges over a larger box since the inequalities hold for any c.
    """
    norms = [Norm.l1, Norm.l2, Norm.linf]
    slack = 1e-12
    worst1 = -math.inf
    worst2 = -math.inf
    viol1 = 0
    viol2 = 0
    note1 = ""
    note2 = ""
    for t in range(n_trials):
        d = int(rng.integers(1, 4))
        norm = norms[int(rng.integers(0, 3))](d)
        mu = float(rng.uniform(0.0, 0.5))
        if mu == 0.0:
            mu = 0.25
        # a, b inside a ball of radius 1 in this norm; c anywhere nearby
        a = rng.uniform(-1.0, 1.0, size=d)
        b = rng.uniform(-1.0, 1.0, size=d)
        na = norm.of(a)
        nb = norm.of(b)
        if na > 1.0:
            a = a / (na * 1.0000001)
        if nb > 1.0:
            b = b / (nb * 1.0000001)
        c = rng.uniform(-2.0, 2.0, size=d)
        pab = interpolate(a, b, mu)
        pba = interpolate(b, a, mu)
        lhs = norm.of(pab - c) + norm.of(pba - c)
        rhs1 = norm.of(a - c) + norm.of(b - c)
        margin1 = lhs - rhs1
        if margin1 > worst1:
            worst1 = margin1
        if margin1 > slack:
            viol1 += 1
            if not note1:
                note1 = f"a={a.tolist()} b={b.tolist()} c={c.tolist()} mu={mu} norm={norm.kind}"
        rhs2 = (norm.of(a - c) + norm.of(b - c) - 2.0 * norm.of(pab - a)
                + norm.of(a + b - 2.0 * c))
        margin2 = lhs - rhs2
        if margin2 > worst2:
            worst2 = margin2
        if margin2 > slack:
            viol2 += 1
            if not note2:
                note2 = f"a={a.tolist()} b={b.tolist()} c={c.tolist()} mu={mu} norm={norm.kind}"
    return [
        PropertyRecord("pair_update_triangle_first", n_trials, viol1, worst1, note1),
        PropertyRecord("pair_update_triangle_second", n_trials, viol2, worst2, note2),
    ]


def _default_trace_specs() -> list:
    """Mixed graph/space/parameter combinations for the dynamic checks."""
    from .graphs import complete, cycle, path, star, torus2d
    from .initial import TriangularBall, UniformBall, UniformBox
    from .opinion_space import Ball, Box, OpinionSpace as OS

    interval = OS(Box(np.zeros(1), np.ones(1)), Norm.l2(1))
    ball2 = OS(Ball(np.zeros(2), 1.0), Norm.l2(2))
    ball2_l1 = OS(Ball(np.zeros(2), 1.0), Norm.l1(2))
    ball3 = OS(Ball(np.zeros(3), 1.0), Norm.linf(3))
    box2 = OS(Box(np.zeros(2), np.ones(2)), Norm.l1(2))
    return [
        (complete(8), interval, UniformBox(interval), 0.8, 0.5),
        (path(10), interval, UniformBox(interval), 1.0, 0.3),
        (cycle(9), interval, UniformBox(interval), 0.4, 0.5),
        (star(7), ball2, UniformBall(ball2), 2.2, 0.5),
        (torus2d(3, 3), ball2, TriangularBall(ball2), 2.5, 0.25),
        (complete(6), ball3, UniformBall(ball3), 2.1, 0.5),
        (path(6), box2, UniformBox(box2), 1.5, 0.4),
        (cycle(12), ball2_l1, TriangularBall(ball2_l1), 2.6, 0.5),
        # slow-mixing configurations so some runs exceed 10^4 events,
        # exercising the vanishing-jump check
        (complete(10), interval, UniformBox(interval), 1.0, 0.001),
        (path(12), interval, UniformBox(interval), 0.9, 0.01),
    ]


def lemma_check_report(n_geometry_trials: int = 100_000, n_traces: int = 20,
                       master_seed: int = 20260816, kernel=None,
                       trace_specs: Optional[list] = None) -> CheckReport:
    """Run every runtime-checkable property and report per-property records.

    Dynamic checks simulate `n_traces` runs over mixed graphs, spaces and
    parameters, with ten probe points each, full trajectories recorded.
    """
    geo_rng = np.random.default_rng(np.random.SeedSequence(master_seed,
                                                           spawn_key=(0,)))
    records = _geometry_trials(n_geometry_trials, geo_rng)

    specs = trace_specs if trace_specs is not None else _default_trace_specs()
    mono_viol = 0
    mono_worst = -math.inf
    mono_note = ""
    bound_viol = 0
    bound_worst = -math.inf
    bound_note = ""
    jump_trials = 0
    jump_viol = 0
    jump_worst = -math.inf
    jump_note = ""
    gap_trials = 0
    gap_viol = 0
    gap_worst = -math.inf
    gap_note = ""
    cross_viol = 0
    cross_worst = -math.inf
    cross_note = ""
    incl_trials = 0
    incl_viol = 0
    incl_note = ""
    member_viol = 0
    member_note = ""
    cons_worst = -math.inf
    cons_viol = 0
    cons_note = ""
    n_probe_cols = 0

    from .initial import sample_batch

    for t in range(n_traces):
        graph, space, dist, tau, mu = specs[t % len(specs)]
        child = np.random.SeedSequence(master_seed, spawn_key=(1, t))
        rng = np.random.default_rng(child)
        probe_rng = np.random.default_rng(
            np.random.SeedSequence(master_seed, spawn_key=(2, t)))
        probes = sample_batch(dist, 10, probe_rng)
        params = SimParams(tau=tau, mu=mu, record_trajectories=True,
                           probe_points=list(probes))
        outcome = run(graph, space, dist, params, rng, kernel=kernel)

        # total-disagreement series: nonincreasing within 1e-9 per event,
        # never above diameter * n_vertices, never below 0
        if outcome.max_probe_increment > mono_worst:
            mono_worst = outcome.max_probe_increment
        if outcome.probe_increase_count > 0:
            mono_viol += outcome.probe_increase_count
            if not mono_note:
                mono_note = f"trace {t}: {outcome.probe_increase_count} increases"
        traj = outcome.trajectory
        cap = space.diameter * graph.n_vertices + 1e-9
        series_max = float(traj.probe_totals.max()) if traj.probe_totals.size else 0.0
        series_min = float(traj.probe_totals.min()) if traj.probe_totals.size else 0.0
        over = series_max - cap
        if over > bound_worst:
            bound_worst = over
        if series_max > cap or series_min < -1e-12:
            bound_viol += 1
            if not bound_note:
                bound_note = f"trace {t}: series range [{series_min}, {series_max}] cap {cap}"
        n_probe_cols += traj.probe_totals.shape[1]

        # vanishing jumps on long absorbed runs
        if (outcome.classification != Classification.UNDECIDED
                and outcome.total_events >= 10_000):
            jump_trials += 1
            jumps = traj.jump[1:]
            w = max(1, len(jumps) // 20)
            first = float(jumps[:w].max())
            last = float(jumps[-w:].max())
            margin = last - first
            if margin > jump_worst:
                jump_worst = margin
            if not (last < first or (first == 0.0 and last == 0.0)):
                jump_viol += 1
                if not jump_note:
                    jump_note = f"trace {t}: first-window max {first}, last-window max {last}"

        # absorbed-state geometry: no edge in the undecided band, and
        # cross-class edges strictly beyond the threshold
        if outcome.classification != Classification.UNDECIDED:
            gap_trials += 1
            intra = outcome.max_intra_class_distance
            margin = intra - outcome.eps_stop
            if margin > gap_worst:
                gap_worst = margin
            if intra >= outcome.eps_stop:
                gap_viol += 1
                if not gap_note:
                    gap_note = f"trace {t}: intra-class edge at {intra}"
            cross = outcome.min_cross_class_distance
            cmargin = tau - cross
            if cmargin > cross_worst:
                cross_worst = cmargin
            if cross <= tau:
                cross_viol += 1
                if not cross_note:
                    cross_note = f"trace {t}: cross-class edge at {cross}"

        # early-certificate inclusion: the certificate at the stopping time
        # must imply eventual consensus
        if outcome.event_a:
            incl_trials += 1
            if outcome.classification != Classification.CONSENSUS:
                incl_viol += 1
                if not incl_note:
                    incl_note = f"trace {t}: certificate true, outcome {outcome.classification.value}"

        if outcome.membership_violations:
            member_viol += outcome.membership_violations
            if not member_note:
                member_note = f"trace {t}: {outcome.membership_violations} escapes"

        drift = outcome.conservation_drift
        if drift > cons_worst:
            cons_worst = drift
        if drift > 1e-9:
            cons_viol += 1
            if not cons_note:
                cons_note = f"trace {t}: coordinate-sum drift {drift}"

    records.append(PropertyRecord("disagreement_nonincreasing", n_probe_cols,
                                  mono_viol, mono_worst, mono_note))
    records.append(PropertyRecord("disagreement_bounded", n_traces,
                                  bound_viol, bound_worst, bound_note))
    records.append(PropertyRecord("jumps_vanish", jump_trials, jump_viol,
                                  jump_worst,
                                  jump_note or ("no qualifying traces"
                                                if jump_trials == 0 else "")))
    records.append(PropertyRecord("absorbed_no_band_edges", gap_trials,
                                  gap_viol, gap_worst, gap_note))
    records.append(PropertyRecord("absorbed_cross_class_beyond_tau",
                                  gap_trials, cross_viol, cross_worst,
                                  cross_note))
    records.append(PropertyRecord("certificate_implies_consensus",
                                  incl_trials, incl_viol,
                                  0.0 if incl_viol == 0 else 1.0, incl_note))
    records.append(PropertyRecord("opinions_stay_in_space", n_traces,
                                  member_viol, float(member_viol), member_note))
    records.append(PropertyRecord("coordinate_sums_conserved", n_traces,
                                  cons_viol, cons_worst, cons_note))

    # parameter validation must reject out-of-range inputs
    bad_params = [
        {"tau": 1.0, "mu": 0.0},
        {"tau": 1.0, "mu": 0.7},
        {"tau": -1.0, "mu": 0.5},
        {"tau": 1.0, "mu": 0.5, "eps_stop": 0.6},
        {"tau": 1.0, "mu": 0.5, "max_events": 0},
    ]
    pv_viol = 0
    pv_note = ""
    for kw in bad_params:
        try:
            SimParams(**kw)
        except ValueError:
            continue
        pv_viol += 1
        if not pv_note:
            pv_note = f"accepted invalid params {kw}"
    records.append(PropertyRecord("params_validation", len(bad_params),
                                  pv_viol, float(pv_viol), pv_note))
    return CheckReport(records)
