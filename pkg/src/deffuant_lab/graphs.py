"""Finite undirected connected graphs: validation, generators, edge-list I/O.

Graphs are immutable after construction.  Edges are indexed 0..E-1 so the
event loop can pick a uniform edge in O(1); a CSR adjacency over edge ids
lets it re-examine only the edges incident to the two updated vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConnectivityError, EdgeListParseError, StructureError


@dataclass(eq=False)
class Graph:
    """Validated undirected connected graph.

    edges is an (E, 2) int64 array with each row (u, v), u < v, no
    duplicates.  Construction normalizes orientation, builds the adjacency
    index, and raises StructureError/ConnectivityError on invalid input.
    """

    n_vertices: int
    edges: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.n_vertices)
        if n < 1:
            raise StructureError(f"graph needs at least one vertex, got {n}")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2).copy()
        if np.any(e < 0) or np.any(e >= n):
            bad = e[(e < 0) | (e >= n)][0]
            raise StructureError(f"vertex id {bad} out of range [0, {n})")
        if np.any(e[:, 0] == e[:, 1]):
            v = int(e[e[:, 0] == e[:, 1]][0, 0])
            raise StructureError(f"self-loop at vertex {v}")
        # normalize to u < v, then reject parallel edges
        e = np.sort(e, axis=1)
        seen = set()
        for u, v in e.tolist():
            if (u, v) in seen:
                raise StructureError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        e.flags.writeable = False
        self.n_vertices = n
        self.edges = e
        self._edge_ids = {(int(u), int(v)): i for i, (u, v) in enumerate(e.tolist())}
        self._build_adjacency()
        self._check_connected()

    def _build_adjacency(self):
        n, e = self.n_vertices, self.edges
        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, e[:, 0], 1)
        np.add.at(deg, e[:, 1], 1)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        eids = np.empty(indptr[-1], dtype=np.int64)
        cursor = indptr[:-1].copy()
        for i, (u, v) in enumerate(e.tolist()):
            eids[cursor[u]] = i
            cursor[u] += 1
            eids[cursor[v]] = i
            cursor[v] += 1
        indptr.flags.writeable = False
        eids.flags.writeable = False
        self.adj_indptr = indptr
        self.adj_eids = eids

    def _check_connected(self):
        n = self.n_vertices
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            x = stack.pop()
            for eid in self.adj_eids[self.adj_indptr[x]:self.adj_indptr[x + 1]]:
                u, v = self.edges[eid]
                y = int(v if u == x else u)
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
        if not seen.all():
            raise ConnectivityError(int(np.flatnonzero(~seen)[0]))

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_ids

    def edge_id(self, u: int, v: int) -> int:
        key = (min(u, v), max(u, v))
        if key not in self._edge_ids:
            raise StructureError(f"edge ({u}, {v}) not in graph")
        return self._edge_ids[key]

    def neighbors(self, x: int) -> list[int]:
        out = []
        for eid in self.adj_eids[self.adj_indptr[x]:self.adj_indptr[x + 1]]:
            u, v = self.edges[eid]
            out.append(int(v if u == x else u))
        return out

    def same_edges(self, other: "Graph") -> bool:
        """Equality up to edge order."""
        return (self.n_vertices == other.n_vertices
                and set(map(tuple, self.edges.tolist())) == set(map(tuple, other.edges.tolist())))


def validate(g: Graph) -> None:
    """Re-run the construction invariants on an existing graph.

    Graph.__post_init__ already enforces them; this re-checks the adjacency
    index against the edge list for callers that want an explicit pass.
    """
    rebuilt = Graph(g.n_vertices, g.edges)
    if not np.array_equal(rebuilt.adj_indptr, g.adj_indptr) or not np.array_equal(rebuilt.adj_eids, g.adj_eids):
        raise StructureError("adjacency index inconsistent with edge list")


def complete(n: int) -> Graph:
    _need(n >= 2, f"complete graph needs n >= 2, got {n}")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return Graph(n, np.array(edges, dtype=np.int64))


def path(n: int) -> Graph:
    _need(n >= 2, f"path needs n >= 2, got {n}")
    return Graph(n, np.array([(i, i + 1) for i in range(n - 1)], dtype=np.int64))


def cycle(n: int) -> Graph:
    _need(n >= 3, f"cycle needs n >= 3, got {n}")
    return Graph(n, np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int64))


def star(n: int) -> Graph:
    _need(n >= 2, f"star needs n >= 2, got {n}")
    return Graph(n, np.array([(0, i) for i in range(1, n)], dtype=np.int64))


def torus2d(w: int, h: int) -> Graph:
    # w, h >= 3 keeps wraparound edges distinct from grid edges
    _need(w >= 3 and h >= 3, f"torus needs width and height >= 3, got {w}x{h}")
    def vid(i, j):
        return i * h + j
    edges = []
    for i in range(w):
        for j in range(h):
            edges.append((vid(i, j), vid((i + 1) % w, j)))
            edges.append((vid(i, j), vid(i, (j + 1) % h)))
    return Graph(w * h, np.array(edges, dtype=np.int64))


def erdos_renyi_connected(n: int, p: float, rng: np.random.Generator) -> Graph:
    """G(n, p) conditioned on connectivity by rejection.

    Rejection (not augmentation) preserves the conditional distribution.
    The number of rejected draws lands in metadata["er_rejected"].
    """
    _need(n >= 2, f"erdos_renyi needs n >= 2, got {n}")
    _need(0.0 < p <= 1.0, f"edge probability must be in (0, 1], got {p}")
    pairs = np.array([(u, v) for u in range(n) for v in range(u + 1, n)], dtype=np.int64)
    rejected = 0
    while True:
        keep = rng.random(pairs.shape[0]) < p
        try:
            g = Graph(n, pairs[keep], metadata={"er_rejected": rejected})
            return g
        except ConnectivityError:
            rejected += 1


def generate(kind: str, params, seed=None) -> Graph:
    """Dispatcher over the named generators; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    if kind == "complete":
        return complete(*params)
    if kind == "path":
        return path(*params)
    if kind == "cycle":
        return cycle(*params)
    if kind == "star":
        return star(*params)
    if kind == "torus2d":
        return torus2d(*params)
    if kind == "erdos_renyi_connected":
        n, p = params
        return erdos_renyi_connected(int(n), float(p), rng)
    raise ValueError(f"unknown graph kind {kind!r}")


def load_edge_list(text: str) -> Graph:
    """Parse edge-list text: one 'u v' pair per line, '#' comments ignored.

    Vertex ids are 0-based; the vertex count is max id + 1.
    """
    edges = []
    max_id = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListParseError(line_no, f"expected two vertex ids, got {len(parts)} tokens")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(line_no, f"non-integer vertex id in {line!r}") from None
        if u < 0 or v < 0:
            raise EdgeListParseError(line_no, f"negative vertex id in {line!r}")
        edges.append((u, v))
        max_id = max(max_id, u, v)
    if not edges:
        raise EdgeListParseError(0, "no edges found")
    return Graph(max_id + 1, np.array(edges, dtype=np.int64))


def serialize(g: Graph) -> str:
    """Inverse of load_edge_list, up to edge order."""
    lines = [f"{u} {v}" for u, v in g.edges.tolist()]
    return "\n".join(lines) + "\n"


class UnionFind:
    """Disjoint sets with path compression; used for absorption partitions."""

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def components(self) -> list[list[int]]:
        """Components as sorted vertex lists, ordered by smallest member."""
        groups: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            groups.setdefault(self.find(x), []).append(x)
        return [sorted(groups[r]) for r in sorted(groups)]


def _need(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)
