"""Weighted undirected graphs, Laplacian assembly, Matrix Market I/O and generators.

The graph model underlying everything else in this package: simple connected
weighted graphs stored as flat edge arrays plus a CSR-style adjacency, and
their diagonally regularized Laplacians.  All containers are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid graph data or configuration."""


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input; message carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IndicatorDiff(NamedTuple):
    """Difference of two standard basis vectors, identified by vertex ids."""

    p: int
    q: int

    def check(self, n: int) -> None:
        if self.p == self.q:
            raise GraphError(f"indicator difference needs distinct vertices, got {self.p}")
        if not (0 <= self.p < n and 0 <= self.q < n):
            raise GraphError(f"vertex ids ({self.p}, {self.q}) out of range for n={n}")


@dataclass(frozen=True)
class AdjacencyView:
    """CSR neighbor lists over a chosen edge subset.

    ``nbr[indptr[v]:indptr[v+1]]`` are the neighbors of ``v`` and
    ``eid[...]`` the matching edge ids into the owning graph's edge arrays.
    Per-vertex neighbor order is ascending edge id, which makes every
    traversal in the package deterministic.
    """

    n: int
    indptr: np.ndarray
    nbr: np.ndarray
    eid: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edge_u: np.ndarray, edge_v: np.ndarray,
                   edge_ids: np.ndarray | None = None) -> "AdjacencyView":
        if edge_ids is None:
            edge_ids = np.arange(len(edge_u), dtype=np.int64)
        src = np.concatenate([edge_u, edge_v])
        dst = np.concatenate([edge_v, edge_u])
        eid2 = np.concatenate([edge_ids, edge_ids])
        order = np.lexsort((eid2, src))
        counts = np.bincount(src, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(n=n, indptr=indptr, nbr=dst[order], eid=eid2[order])

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """(neighbor vertices, edge ids) of ``v``."""
        a, b = self.indptr[v], self.indptr[v + 1]
        return self.nbr[a:b], self.eid[a:b]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])


@dataclass(frozen=True)
class Graph:
    """Simple weighted undirected graph.

    Parameters
    ----------
    n : int
        Vertex count; vertices are ``0..n-1``.
    edge_u, edge_v : int arrays
        Edge endpoints. No self loops, at most one edge per unordered pair.
    edge_w : float array
        Strictly positive edge weights.

    Connectivity is *not* enforced here; ingestion extracts the largest
    component and the pipeline entry points check connectivity themselves,
    so programmatic construction of partial graphs stays possible.
    """

    n: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edge_u", np.asarray(self.edge_u, dtype=np.int64))
        object.__setattr__(self, "edge_v", np.asarray(self.edge_v, dtype=np.int64))
        object.__setattr__(self, "edge_w", np.asarray(self.edge_w, dtype=np.float64))
        u, v, w = self.edge_u, self.edge_v, self.edge_w
        if not (len(u) == len(v) == len(w)):
            raise GraphError("edge arrays must have equal length")
        if self.n <= 0:
            raise GraphError("graph needs at least one vertex")
        if len(u) and (u.min() < 0 or v.min() < 0 or max(u.max(), v.max()) >= self.n):
            raise GraphError("edge endpoint out of range")
        if np.any(u == v):
            raise GraphError("self loops are not allowed")
        if np.any(w <= 0):
            raise GraphError("edge weights must be positive")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        key = lo * self.n + hi
        if len(np.unique(key)) != len(key):
            raise GraphError("duplicate edge between the same vertex pair")

    @property
    def m(self) -> int:
        return len(self.edge_u)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for u, v, w in zip(self.edge_u, self.edge_v, self.edge_w):
            yield int(u), int(v), float(w)

    @cached_property
    def adjacency(self) -> AdjacencyView:
        return AdjacencyView.from_edges(self.n, self.edge_u, self.edge_v)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Weighted degree per vertex (unregularized Laplacian diagonal)."""
        d = np.zeros(self.n)
        np.add.at(d, self.edge_u, self.edge_w)
        np.add.at(d, self.edge_v, self.edge_w)
        return d

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        if self.m < self.n - 1:
            return False
        return _component_labels(self.n, self.edge_u, self.edge_v).max() == 0

    def subgraph_adjacency(self, edge_ids: np.ndarray) -> AdjacencyView:
        """Adjacency restricted to the given edge-id subset (same vertex set)."""
        edge_ids = np.asarray(edge_ids, dtype=np.int64)
        return AdjacencyView.from_edges(
            self.n, self.edge_u[edge_ids], self.edge_v[edge_ids], edge_ids)


@dataclass(frozen=True)
class GammaPolicy:
    """How to pick the diagonal regularization added to every Laplacian.

    ``relative`` scales the largest unregularized diagonal entry, ``absolute``
    is a plain value. The same resolved number must be reused for every matrix
    derived from one graph, so subgraph Laplacians stay spectrally below the
    full graph's.
    """

    kind: str = "relative"
    value: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("relative", "absolute"):
            raise GraphError(f"unknown gamma policy kind: {self.kind!r}")
        if self.value <= 0:
            raise GraphError("gamma must resolve to a positive value")

    def resolve(self, g: Graph) -> float:
        if self.kind == "absolute":
            return self.value
        scale = float(g.degrees.max()) if g.m else 1.0
        return self.value * scale


DEFAULT_GAMMA = GammaPolicy()


@dataclass(frozen=True)
class RegularizedLaplacian:
    """Graph Laplacian plus a positive diagonal, stored as symmetric CSC.

    ``gamma`` is either one scalar for every row or a per-row vector of
    nonnegative additions (power-grid pad conductances use the vector form).
    Row sums of the matrix equal ``gamma`` exactly, off-diagonals are
    nonpositive, and the matrix is SPD whenever gamma is positive somewhere
    and the graph is connected.
    """

    matrix: sp.csc_matrix
    gamma: float | np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def gamma_vector(self) -> np.ndarray:
        if np.isscalar(self.gamma):
            return np.full(self.n, float(self.gamma))
        return np.asarray(self.gamma, dtype=np.float64)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


def build_laplacian(g: Graph,
                    gamma: float | np.ndarray | GammaPolicy = DEFAULT_GAMMA,
                    ) -> RegularizedLaplacian:
    """Assemble the regularized Laplacian of ``g``.

    The diagonal is the weighted degree plus ``gamma``; off-diagonal ``(i, j)``
    is ``-w_ij``. ``gamma`` may be a policy (resolved against ``g``), a scalar,
    or a per-vertex vector.
    """
    if isinstance(gamma, GammaPolicy):
        gamma = gamma.resolve(g)
    return laplacian_from_edges(g.n, g.edge_u, g.edge_v, g.edge_w, gamma)


def laplacian_from_edges(n: int, edge_u: np.ndarray, edge_v: np.ndarray,
                         edge_w: np.ndarray, gamma: float | np.ndarray,
                         ) -> RegularizedLaplacian:
    """Laplacian of an explicit edge subset; used for subgraph preconditioners."""
    if np.isscalar(gamma):
        if gamma <= 0:
            raise GraphError("gamma must be positive")
        gvec = np.full(n, float(gamma))
    else:
        gvec = np.asarray(gamma, dtype=np.float64)
        if gvec.shape != (n,):
            raise GraphError("per-row gamma must have one entry per vertex")
        if gvec.min() < 0 or gvec.max() <= 0:
            raise GraphError("per-row gamma must be nonnegative and positive somewhere")
        gamma = gvec
    deg = np.zeros(n)
    np.add.at(deg, edge_u, edge_w)
    np.add.at(deg, edge_v, edge_w)
    rows = np.concatenate([edge_u, edge_v, np.arange(n)])
    cols = np.concatenate([edge_v, edge_u, np.arange(n)])
    vals = np.concatenate([-edge_w, -edge_w, deg + gvec])
    mat = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    return RegularizedLaplacian(matrix=mat, gamma=gamma)


# ---------------------------------------------------------------------------
# Matrix Market ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoadedGraph:
    """Result of Matrix Market ingestion.

    ``original_ids[k]`` is the 1-based file id of internal vertex ``k``;
    ``dropped`` counts vertices outside the largest connected component.
    """

    graph: Graph
    original_ids: np.ndarray
    dropped: int
    detected: str  # "laplacian" or "adjacency"


def _parse_matrix_market(path: str | Path):
    """Coordinate-format reader returning (rows, cols, vals, shape, symmetric)."""
    path = Path(path)
    with open(path, "r") as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("empty file", line=1)
    header = lines[0].strip().lower().split()
    if len(header) < 5 or header[0] != "%%matrixmarket" or header[1] != "matrix":
        raise MatrixMarketError("expected '%%MatrixMarket matrix ...' header", line=1)
    fmt, field, symmetry = header[2], header[3], header[4]
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format {fmt!r}, need 'coordinate'", line=1)
    if field == "complex":
        raise MatrixMarketError("complex field is not supported", line=1)
    if field not in ("real", "integer", "double"):
        raise MatrixMarketError(f"unsupported field {field!r}", line=1)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", line=1)

    k = 1
    while k < len(lines) and (lines[k].startswith("%") or not lines[k].strip()):
        k += 1
    if k == len(lines):
        raise MatrixMarketError("missing size line", line=k)
    parts = lines[k].split()
    if len(parts) != 3:
        raise MatrixMarketError("size line must be 'rows cols nnz'", line=k + 1)
    try:
        nrows, ncols, nnz = (int(p) for p in parts)
    except ValueError:
        raise MatrixMarketError("non-integer size line", line=k + 1) from None
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is {nrows}x{ncols}, need square", line=k + 1)

    rows, cols, vals = [], [], []
    for off, raw in enumerate(lines[k + 1:], start=k + 2):
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError("entry must be 'i j value'", line=off)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"unparsable entry {s!r}", line=off) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range", line=off)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(rows) != nnz:
        raise MatrixMarketError(
            f"header promised {nnz} entries, file has {len(rows)}", line=len(lines))
    return (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
            np.array(vals, dtype=np.float64), nrows, symmetry == "symmetric")


def load_matrix_market(path: str | Path) -> LoadedGraph:
    """Read a graph from a Matrix Market coordinate file.

    Off-diagonal signs decide the interpretation: any negative off-diagonal
    means the file stores an SDD/Laplacian matrix (edge weight ``-a_ij``),
    otherwise it is an adjacency/weight matrix (edge weight ``a_ij``).
    Duplicate coordinates are summed, mirrored ``(i,j)/(j,i)`` entries
    collapse to one undirected edge, zero weights are dropped, and only the
    largest connected component is kept (with a remap table back to the
    file's 1-based ids).
    """
    rows, cols, vals, n, _symmetric = _parse_matrix_market(path)

    off = rows != cols
    rows, cols, vals = rows[off], cols[off], vals[off]
    detected = "laplacian" if (len(vals) and vals.min() < 0) else "adjacency"
    if detected == "laplacian":
        vals = -vals

    # Sum duplicates per ordered pair, then fold the two orientations together;
    # a pair stored in both orientations keeps its single-entry weight.
    key = rows * n + cols
    order = np.argsort(key, kind="stable")
    key, rows, cols, vals = key[order], rows[order], cols[order], vals[order]
    uk, inv = np.unique(key, return_inverse=True)
    osum = np.bincount(inv, weights=vals)
    ou = (uk // n).astype(np.int64)
    ov = (uk % n).astype(np.int64)

    lo, hi = np.minimum(ou, ov), np.maximum(ou, ov)
    ukey = lo * n + hi
    u2, inv2 = np.unique(ukey, return_inverse=True)
    wsum = np.bincount(inv2, weights=osum)
    sides = np.bincount(inv2)
    w = wsum / sides
    eu = (u2 // n).astype(np.int64)
    ev = (u2 % n).astype(np.int64)

    keep = w != 0
    eu, ev, w = eu[keep], ev[keep], w[keep]
    if len(w) and w.min() < 0:
        raise MatrixMarketError("mixed-sign off-diagonals; cannot interpret weights")

    labels = _component_labels(n, eu, ev)
    sizes = np.bincount(labels, minlength=1)
    main = int(np.argmax(sizes))  # argmax ties break toward the lowest label
    in_main = labels == main
    remap = -np.ones(n, dtype=np.int64)
    kept = np.flatnonzero(in_main)
    remap[kept] = np.arange(len(kept))
    emask = in_main[eu]
    g = Graph(n=len(kept), edge_u=remap[eu[emask]], edge_v=remap[ev[emask]],
              edge_w=w[emask])
    return LoadedGraph(graph=g, original_ids=kept + 1,
                       dropped=int(n - len(kept)), detected=detected)


def write_matrix_market(g: Graph, path: str | Path, comment: str | None = None) -> None:
    """Write ``g`` as a symmetric real coordinate file (adjacency convention).

    Weights are emitted with ``repr`` so a reload reproduces the exact float64
    values; entries are sorted for byte-stable output.
    """
    lo = np.minimum(g.edge_u, g.edge_v)
    hi = np.maximum(g.edge_u, g.edge_v)
    order = np.lexsort((hi, lo))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"{g.n} {g.n} {g.m}\n")
        for k in order:
            fh.write(f"{hi[k] + 1} {lo[k] + 1} {g.edge_w[k]!r}\n")


def write_remap_csv(loaded: LoadedGraph, path: str | Path) -> None:
    """Two-column CSV mapping the file's 1-based ids to internal 0-based ids."""
    with open(path, "w") as fh:
        fh.write("original_id,internal_id\n")
        for internal, original in enumerate(loaded.original_ids):
            fh.write(f"{original},{internal}\n")


def _component_labels(n: int, edge_u: np.ndarray, edge_v: np.ndarray) -> np.ndarray:
    """Connected-component label per vertex, 0 = component of the lowest vertex."""
    if len(edge_u) == 0:
        return np.arange(n, dtype=np.int64)
    adj = sp.csr_matrix((np.ones(len(edge_u)), (edge_u, edge_v)), shape=(n, n))
    ncomp, labels = sp.csgraph.connected_components(adj, directed=False)
    return labels.astype(np.int64)


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

def grid2d(rows: int, cols: int) -> Graph:
    """rows x cols grid with unit weights; edge order is row-major, right then down."""
    if rows <= 0 or cols <= 0 or rows * cols < 2:
        raise GraphError(f"degenerate grid size {rows}x{cols}")
    eu, ev = [], []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                eu.append(v)
                ev.append(v + 1)
            if r + 1 < rows:
                eu.append(v)
                ev.append(v + cols)
    m = len(eu)
    return Graph(n=rows * cols, edge_u=np.array(eu), edge_v=np.array(ev),
                 edge_w=np.ones(m))


def random_geometric(n: int, radius: float, seed: int) -> Graph:
    """Random geometric graph on the unit square with weights 1/distance.

    Vertices closer than ``radius`` are joined. If the result is disconnected,
    the closest cross-component point pairs are added (deterministically from
    the seeded point set) until it is connected.
    """
    if n < 2 or radius <= 0:
        raise GraphError("need n >= 2 and radius > 0")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))

    from scipy.spatial import cKDTree

    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    eu, ev = pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)
    dist = np.linalg.norm(pts[eu] - pts[ev], axis=1)
    good = dist > 1e-12
    eu, ev, dist = eu[good], ev[good], dist[good]
    edges = {(int(a), int(b)): 1.0 / d for a, b, d in zip(eu, ev, dist)}

    labels = _component_labels(n, eu, ev)
    while labels.max() > 0:
        # join the largest-label component to the rest at the closest point pair
        side = labels == labels.max()
        a_idx = np.flatnonzero(side)
        b_idx = np.flatnonzero(~side)
        d2 = ((pts[a_idx, None, :] - pts[b_idx, None, :].transpose(1, 0, 2)) ** 2).sum(-1)
        k = int(np.argmin(d2))
        a = int(a_idx[k // len(b_idx)])
        b = int(b_idx[k % len(b_idx)])
        d = max(math.dist(pts[a], pts[b]), 1e-12)
        edges[(min(a, b), max(a, b))] = 1.0 / d
        eu = np.array([p[0] for p in edges], dtype=np.int64)
        ev = np.array([p[1] for p in edges], dtype=np.int64)
        labels = _component_labels(n, eu, ev)

    items = sorted(edges.items())
    eu = np.array([p[0] for p, _ in items], dtype=np.int64)
    ev = np.array([p[1] for p, _ in items], dtype=np.int64)
    ew = np.array([w for _, w in items])
    return Graph(n=n, edge_u=eu, edge_v=ev, edge_w=ew)


def generate(kind: str) -> Graph:
    """Parse an inline graph spec: ``grid:RxC`` or ``rgg:N:RADIUS:SEED``."""
    try:
        if kind.startswith("grid:"):
            r, c = kind[5:].split("x")
            return grid2d(int(r), int(c))
        if kind.startswith("rgg:"):
            n, radius, seed = kind[4:].split(":")
            return random_geometric(int(n), float(radius), int(seed))
    except (ValueError, GraphError) as exc:
        raise GraphError(f"bad graph spec {kind!r}: {exc}") from None
    raise GraphError(f"unknown graph spec {kind!r} (use grid:RxC or rgg:N:R:SEED)")
