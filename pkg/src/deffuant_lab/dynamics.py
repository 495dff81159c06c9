"""Event-driven engine for threshold-gated pairwise averaging on a graph.

Each edge carries an independent unit-rate exponential clock.  When an edge
fires, its endpoints compare opinions; if they differ by at most tau (plain
<=, no epsilon) both move a fraction mu toward each other.  The embedded
jump chain picks a uniform edge per event and accumulates Exponential(|E|)
time increments.

The hot loop lives in a kernel module with two interchangeable
implementations: a compiled extension (`_kernel`) and a pure-Python fallback
(`_kernel_py`).  Both consume identical pre-generated randomness and apply
identical floating-point operation sequences, so a run is bit-reproducible
across kernels.  Set the environment variable DEFFUANT_LAB_PURE_PY to any
nonempty value to force the fallback.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from . import _kernel_py
from .errors import StructureError
from .graphs import Graph, UnionFind
from .initial import InitialDistribution, initial_configuration
from .opinion_space import (Norm, OpinionSpace, as_opinion, interpolate,
                            sup_distance_to_set)

# events per RNG/kernel chunk; part of the reproducibility contract because
# the driver draws `chunk` edge ids then `chunk` waiting times per chunk
CHUNK_EVENTS = 65536

_NORM_CODES = {"l1": 1, "l2": 2, "linf": 3, "lp": 4}


def load_kernel(name: str = "auto"):
    """Return the event-loop kernel module.

    name: "auto" prefers the compiled extension, "c" requires it,
    "python" forces the fallback.
    """
    if name == "python":
        return _kernel_py
    if name == "c":
        from . import _kernel
        return _kernel
    if name != "auto":
        raise ValueError(f"unknown kernel {name!r}; expected auto, c or python")
    if os.environ.get("DEFFUANT_LAB_PURE_PY"):
        return _kernel_py
    try:
        from . import _kernel
        return _kernel
    except ImportError:
        return _kernel_py


class Classification(str, enum.Enum):
    """Terminal label of a run."""

    CONSENSUS = "consensus"
    FRAGMENTED = "fragmented"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Configuration:
    """Snapshot of the process: one opinion row per vertex."""

    opinions: np.ndarray
    time: float = 0.0
    event_count: int = 0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.opinions, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("opinions must be a 2-d array, one row per vertex")
        object.__setattr__(self, "opinions", arr)


@dataclass
class SimParams:
    """Run-level knobs.

    eps_stop and max_events default to graph-dependent values, resolved at
    run time: tau/(4*n_vertices) and 10^4 * n_edges * n_vertices.
    """

    tau: float
    mu: float = 0.5
    eps_stop: Optional[float] = None
    max_events: Optional[int] = None
    record_trajectories: bool = False
    probe_points: Optional[Sequence] = None
    mono_tol: float = 1e-9
    membership_tol: float = 1e-12

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Raise ValueError on any out-of-range parameter.

        Called again at run time so post-construction mutation is caught.
        """
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError(f"tau must be finite and positive, got {self.tau}")
        if not (0.0 < self.mu <= 0.5):
            raise ValueError(f"mu must lie in (0, 0.5], got {self.mu}")
        if self.eps_stop is not None:
            if not (0.0 < self.eps_stop < self.tau / 2.0):
                raise ValueError(
                    f"eps_stop must lie in (0, tau/2), got {self.eps_stop}")
        if self.max_events is not None and self.max_events < 1:
            raise ValueError(f"max_events must be >= 1, got {self.max_events}")
        if self.mono_tol < 0.0 or self.membership_tol < 0.0:
            raise ValueError("tolerances must be nonnegative")

    def resolved_eps_stop(self, graph: Graph) -> float:
        if self.eps_stop is not None:
            return float(self.eps_stop)
        return self.tau / (4.0 * graph.n_vertices)

    def resolved_max_events(self, graph: Graph) -> int:
        if self.max_events is not None:
            return int(self.max_events)
        return 10_000 * graph.n_edges * graph.n_vertices

    def probe_array(self, space: OpinionSpace) -> np.ndarray:
        """Validated (P, d) array of probe points, possibly empty."""
        d = space.dimension
        if not self.probe_points:
            return np.zeros((0, d), dtype=np.float64)
        rows = [as_opinion(p, d) for p in self.probe_points]
        arr = np.ascontiguousarray(np.stack(rows), dtype=np.float64)
        for i, row in enumerate(arr):
            if not space.contains(row):
                raise ValueError(f"probe point {i} lies outside the opinion space")
        return arr


@dataclass(frozen=True)
class Trajectory:
    """Per-event record of a run, including the initial state as row 0.

    Row 0 has edge_u = edge_v = -1 and interacted = 0.  probe_totals[k, p]
    is the total distance from probe p summed over vertices, after event k.
    jump[k] is the per-vertex displacement norm of event k (0 when the pair
    did not interact).
    """

    probe_points: np.ndarray
    event_index: np.ndarray
    time: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    interacted: np.ndarray
    jump: np.ndarray
    probe_totals: np.ndarray

    @property
    def n_events(self) -> int:
        return len(self.event_index) - 1

    def to_csv(self, fh: IO[str]):
        """Write columns event_index,time,edge_u,edge_v,interacted,X0,X1,..."""
        n_probes = self.probe_points.shape[0]
        header = ["event_index", "time", "edge_u", "edge_v", "interacted"]
        header += [f"X{p}" for p in range(n_probes)]
        fh.write(",".join(header) + "\n")
        for k in range(len(self.event_index)):
            row = [str(int(self.event_index[k])), repr(float(self.time[k])),
                   str(int(self.edge_u[k])), str(int(self.edge_v[k])),
                   str(int(self.interacted[k]))]
            row += [repr(float(self.probe_totals[k, p])) for p in range(n_probes)]
            fh.write(",".join(row) + "\n")


@dataclass(frozen=True)
class RunOutcome:
    """Everything observed about one run."""

    classification: Classification
    final_configuration: Configuration
    partition: Optional[tuple] = None
    t_star: Optional[float] = None
    t_star_event: Optional[int] = None
    event_a: Optional[bool] = None
    total_events: int = 0
    final_time: float = 0.0
    trajectory: Optional[Trajectory] = None
    eps_stop: float = 0.0
    max_events: int = 0
    membership_violations: int = 0
    probe_increase_count: int = 0
    max_probe_increment: float = 0.0
    conservation_drift: float = 0.0
    max_intra_class_distance: Optional[float] = None
    min_cross_class_distance: Optional[float] = None
    kernel: str = "python"

    @property
    def n_classes(self) -> int:
        return 0 if self.partition is None else len(self.partition)


def step(config: Configuration, edge: tuple, tau: float, mu: float,
         norm: Norm, graph: Optional[Graph] = None) -> Configuration:
    """One jump-chain transition along `edge`; pure, returns a new snapshot.

    The pair interacts iff their distance is <= tau (ties interact).  When a
    graph is supplied the edge must belong to it.
    """
    u, v = int(edge[0]), int(edge[1])
    if graph is not None:
        graph.edge_id(u, v)
    n = config.opinions.shape[0]
    if not (0 <= u < n and 0 <= v < n) or u == v:
        raise StructureError(f"invalid edge ({u}, {v}) for {n} vertices")
    a = config.opinions[u]
    b = config.opinions[v]
    new = config.opinions.copy()
    if norm.of(a - b) <= tau:
        new[u] = interpolate(a, b, mu)
        new[v] = interpolate(b, a, mu)
    return Configuration(new, config.time, config.event_count + 1)


def next_event(rng: np.random.Generator, n_edges: int) -> tuple:
    """Draw one embedded-chain event: (uniform edge id, Exponential(|E|) dt).

    Superposing |E| unit-rate clocks gives total rate |E| and a uniform
    choice of which edge fired.
    """
    if n_edges < 1:
        raise ValueError("need at least one edge")
    eid = int(rng.integers(0, n_edges))
    dt = float(rng.exponential(1.0 / n_edges))
    return eid, dt


def detect_absorption(config: Configuration, graph: Graph, norm: Norm,
                      tau: float, eps_stop: float) -> Optional[tuple]:
    """Partition of vertices if no edge distance lies in [eps_stop, tau].

    Classes are the connected components of the sub-eps_stop subgraph.
    Returns None when some edge is still in the undecided band.
    """
    op = config.opinions
    uf = UnionFind(graph.n_vertices)
    for u, v in graph.edges:
        d = norm.of(op[u] - op[v])
        if eps_stop <= d <= tau:
            return None
        if d < eps_stop:
            uf.union(int(u), int(v))
    return tuple(tuple(c) for c in uf.components())


def absorption_gaps(config: Configuration, graph: Graph, norm: Norm,
                    partition: tuple) -> tuple:
    """(max intra-class edge distance, min cross-class edge distance).

    Neutral values 0.0 / inf when a side has no edges.
    """
    class_of = {}
    for ci, members in enumerate(partition):
        for x in members:
            class_of[x] = ci
    op = config.opinions
    max_intra = 0.0
    min_cross = math.inf
    for u, v in graph.edges:
        d = norm.of(op[u] - op[v])
        if class_of[int(u)] == class_of[int(v)]:
            if d > max_intra:
                max_intra = d
        elif d < min_cross:
            min_cross = d
    return max_intra, min_cross


def _space_codes(space: OpinionSpace) -> tuple:
    """(shape_code, shape_a, shape_b, shape_r) for the kernel membership check."""
    shape = space.shape
    if hasattr(shape, "radius"):
        c = np.ascontiguousarray(shape.center, dtype=np.float64)
        return 1, c, c, float(shape.radius)
    lo = np.ascontiguousarray(shape.lower, dtype=np.float64)
    hi = np.ascontiguousarray(shape.upper, dtype=np.float64)
    return 2, lo, hi, 0.0


def _norm_codes(norm: Norm) -> tuple:
    code = _NORM_CODES[norm.kind]
    p = float(norm.p) if norm.p is not None else 0.0
    return code, p


def run(graph: Graph, space: OpinionSpace, dist: InitialDistribution,
        params: SimParams, rng: np.random.Generator,
        kernel=None) -> RunOutcome:
    """Simulate until absorption or the event budget runs out.

    RNG stream discipline (the reproducibility contract): the initial
    configuration is drawn first, then per chunk of CHUNK_EVENTS events the
    driver draws that many uniform edge ids followed by that many
    exponential increments.  Kernels only consume these buffers.
    """
    params.validate()
    if space.dimension != dist.space.dimension:
        raise ValueError("distribution and space dimensions differ")
    eps_stop = params.resolved_eps_stop(graph)
    max_events = params.resolved_max_events(graph)
    if not (0.0 < eps_stop < params.tau / 2.0):
        raise ValueError(f"resolved eps_stop {eps_stop} not in (0, tau/2)")
    kern = kernel if kernel is not None else load_kernel()

    opinions = initial_configuration(dist, graph, rng)
    initial_sums = [math.fsum(opinions[:, c]) for c in range(space.dimension)]

    n_edges = graph.n_edges
    edges_u = np.ascontiguousarray(graph.edges[:, 0], dtype=np.int64)
    edges_v = np.ascontiguousarray(graph.edges[:, 1], dtype=np.int64)
    adj_indptr = graph.adj_indptr
    adj_eids = graph.adj_eids
    stamp = np.zeros(n_edges, dtype=np.int64)
    edge_dist = np.zeros(n_edges, dtype=np.float64)
    is_active = np.zeros(n_edges, dtype=np.uint8)
    is_mid = np.zeros(n_edges, dtype=np.uint8)

    norm_code, norm_p = _norm_codes(space.norm)
    shape_code, shape_a, shape_b, shape_r = _space_codes(space)
    probes = params.probe_array(space)
    n_probes = probes.shape[0]
    probe_x = np.zeros(n_probes, dtype=np.float64)

    active, mid = kern.init_state(opinions, edges_u, edges_v, norm_code,
                                  norm_p, params.tau, eps_stop, edge_dist,
                                  is_active, is_mid)
    if n_probes:
        kern.probe_totals(opinions, probes, norm_code, norm_p, probe_x)

    istate = np.zeros(7, dtype=np.int64)
    fstate = np.zeros(3, dtype=np.float64)
    istate[0] = active
    istate[1] = mid
    tstar_snapshot = np.zeros_like(opinions)

    # stopping-time and absorption conditions can already hold at t = 0
    if mid == 0 and kern.all_pairs_clear(opinions, norm_code, norm_p, params.tau):
        istate[2] = 1
        istate[3] = 0
        fstate[1] = 0.0
        tstar_snapshot[:] = opinions

    record = params.record_trajectories
    rec_chunks = []
    if record:
        rec_chunks.append((np.array([-1], dtype=np.int64),
                           np.array([-1], dtype=np.int64),
                           np.zeros(1, dtype=np.uint8),
                           np.zeros(1, dtype=np.float64),
                           np.zeros(1, dtype=np.float64),
                           probe_x.copy().reshape(1, n_probes)))
    empty_i = np.zeros(0, dtype=np.int64)
    empty_b = np.zeros(0, dtype=np.uint8)
    empty_f = np.zeros(0, dtype=np.float64)
    empty_p = np.zeros((0, n_probes), dtype=np.float64)

    absorbed = active == 0
    events_done = 0
    while not absorbed and events_done < max_events:
        chunk = min(CHUNK_EVENTS, max_events - events_done)
        edge_buf = rng.integers(0, n_edges, size=chunk, dtype=np.int64)
        dt_buf = rng.exponential(1.0 / n_edges, size=chunk)
        if record:
            rec_u = np.zeros(chunk, dtype=np.int64)
            rec_v = np.zeros(chunk, dtype=np.int64)
            rec_flag = np.zeros(chunk, dtype=np.uint8)
            rec_time = np.zeros(chunk, dtype=np.float64)
            rec_jump = np.zeros(chunk, dtype=np.float64)
            rec_probe = np.zeros((chunk, n_probes), dtype=np.float64)
        else:
            rec_u = rec_v = empty_i
            rec_flag = empty_b
            rec_time = rec_jump = empty_f
            rec_probe = empty_p
        consumed, absorbed = kern.run_events(
            opinions, edges_u, edges_v, adj_indptr, adj_eids, stamp,
            edge_dist, is_active, is_mid,
            norm_code, norm_p, params.tau, params.mu, eps_stop,
            params.mono_tol,
            shape_code, shape_a, shape_b, shape_r, params.membership_tol,
            probes, probe_x, edge_buf, dt_buf,
            istate, fstate, tstar_snapshot,
            1 if record else 0,
            rec_u, rec_v, rec_flag, rec_time, rec_jump, rec_probe)
        events_done += consumed
        if record and consumed:
            rec_chunks.append((rec_u[:consumed], rec_v[:consumed],
                               rec_flag[:consumed], rec_time[:consumed],
                               rec_jump[:consumed], rec_probe[:consumed]))

    final_time = float(fstate[0])
    final = Configuration(opinions.copy(), final_time, events_done)
    final.opinions.setflags(write=False)

    partition = None
    max_intra = None
    min_cross = None
    if absorbed:
        partition = detect_absorption(final, graph, space.norm, params.tau,
                                      eps_stop)
        if partition is None:
            raise RuntimeError(
                "kernel reported absorption but the verification pass disagrees")
        classification = (Classification.CONSENSUS if len(partition) == 1
                          else Classification.FRAGMENTED)
        max_intra, min_cross = absorption_gaps(final, graph, space.norm,
                                               partition)
    else:
        classification = Classification.UNDECIDED

    t_star = None
    t_star_event = None
    event_a = None
    if istate[2]:
        t_star = float(fstate[1])
        t_star_event = int(istate[3])
        event_a = False
        for x in range(graph.n_vertices):
            if sup_distance_to_set(tstar_snapshot[x], space) < params.tau:
                event_a = True
                break

    final_sums = [math.fsum(final.opinions[:, c]) for c in range(space.dimension)]
    drift = max(abs(fs - is_) for fs, is_ in zip(final_sums, initial_sums))

    trajectory = None
    if record:
        eu = np.concatenate([c[0] for c in rec_chunks])
        evv = np.concatenate([c[1] for c in rec_chunks])
        fl = np.concatenate([c[2] for c in rec_chunks])
        tm = np.concatenate([c[3] for c in rec_chunks])
        jp = np.concatenate([c[4] for c in rec_chunks])
        px = np.concatenate([c[5] for c in rec_chunks], axis=0)
        idx = np.arange(len(eu), dtype=np.int64)
        trajectory = Trajectory(probes, idx, tm, eu, evv, fl, jp, px)

    return RunOutcome(
        classification=classification,
        final_configuration=final,
        partition=partition,
        t_star=t_star,
        t_star_event=t_star_event,
        event_a=event_a,
        total_events=events_done,
        final_time=final_time,
        trajectory=trajectory,
        eps_stop=eps_stop,
        max_events=max_events,
        membership_violations=int(istate[5]),
        probe_increase_count=int(istate[6]),
        max_probe_increment=float(fstate[2]),
        conservation_drift=float(drift),
        max_intra_class_distance=max_intra,
        min_cross_class_distance=min_cross,
        kernel=getattr(kern, "KERNEL_NAME", "unknown"),
    )


def replay(graph: Graph, space: OpinionSpace, xi0, params: SimParams,
           edge_sequence: Iterable[tuple]) -> list:
    """Apply `step` along an explicit edge sequence; deterministic oracle.

    Returns the configuration list including the initial state, so the
    result has len(edge_sequence) + 1 entries.  Only the jump chain is
    replayed; time stays 0.
    """
    params.validate()
    opinions = np.ascontiguousarray(xi0, dtype=np.float64)
    if opinions.ndim != 2 or opinions.shape[0] != graph.n_vertices:
        raise ValueError("xi0 must have one row per vertex")
    if opinions.shape[1] != space.dimension:
        raise ValueError("xi0 dimension does not match the space")
    configs = [Configuration(opinions.copy(), 0.0, 0)]
    current = configs[0]
    for edge in edge_sequence:
        current = step(current, edge, params.tau, params.mu, space.norm,
                       graph=graph)
        configs.append(current)
    return configs
