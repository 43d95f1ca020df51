"""Vietoris-Rips persistent homology (H0, H1) over a distance matrix.

Three computation routes, deliberately independent of each other:

* ``h0_barcode``       union-find over ascending edges; H0 deaths are the
                       n-1 minimum-spanning-tree edge weights.
* ``reduce_filtration``    Z/2 boundary-matrix column reduction with the
                       clearing ("twist") optimization, triangles first.
* ``brute_force_diagram``  dense full boundary matrix reduced strictly
                       left-to-right, no optimizations; the correctness
                       oracle for small clouds.

Filtration order is ascending (value, dim, lexicographic vertices), which
makes every output deterministic across runs and platforms.  A simplex
enters at the maximum pairwise distance of its vertices (Rips rule).

Bars still alive at eps_max are censored: they report death = +inf and the
diagram records eps_max.  Zero-length bars (birth == death) are dropped
from ``reduce_filtration``/``brute_force_diagram`` output but counted in
the diagram's diagnostics.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import DistanceMatrix
from .errors import CapacityError, ConfigError

DEFAULT_SIMPLEX_BUDGET = 50_000_000


@dataclass(frozen=True)
class Filtration:
    """Rips complex up to dimension 2, capped at eps_max.

    Edges and triangles are stored sorted by (value, lexicographic
    vertices); interleave via simplices() for the global filtration order.
    """

    n_vertices: int
    edges: np.ndarray
    edge_values: np.ndarray
    triangles: np.ndarray
    triangle_values: np.ndarray
    eps_max: float

    def simplices(self):
        """Yield (vertices, dim, value) in global filtration order."""
        streams = [
            (((v,), 0, 0.0) for v in range(self.n_vertices)),
            (
                (tuple(int(x) for x in e), 1, float(val))
                for e, val in zip(self.edges, self.edge_values)
            ),
            (
                (tuple(int(x) for x in t), 2, float(val))
                for t, val in zip(self.triangles, self.triangle_values)
            ),
        ]
        yield from heapq.merge(*streams, key=lambda s: (s[2], s[1], s[0]))


@dataclass(frozen=True)
class PersistenceDiagram:
    """Bars (dim, birth, death), death = +inf for classes alive at eps_max.

    zero_bars counts the suppressed zero-length bars per dimension.
    h1_edges optionally records the creating edge of each H1 bar, in the
    same order as the dim-1 rows.
    """

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    eps_max: float
    n_points: int
    zero_bars: tuple = (0, 0)
    h1_edges: np.ndarray | None = None

    def bars(self, dim: int) -> np.ndarray:
        """(k, 2) array of (birth, death) for one dimension, sorted."""
        mask = self.dims == dim
        out = np.stack([self.births[mask], self.deaths[mask]], axis=1)
        return out[np.lexsort((out[:, 1], out[:, 0]))]

    def betti(self, dim: int, eps: float) -> int:
        mask = self.dims == dim
        return int(
            np.count_nonzero((self.births[mask] <= eps) & (eps < self.deaths[mask]))
        )


@dataclass(frozen=True)
class BettiCurve:
    grid: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray


def _sorted_edge_list(dm: DistanceMatrix):
    """All pairs (i < j) ordered ascending by (value, i, j)."""
    n = dm.n
    ii, jj = np.triu_indices(n, k=1)
    vals = dm.values[ii, jj]
    order = np.lexsort((jj, ii, vals))
    return ii[order], jj[order], vals[order]


def h0_barcode(dm: DistanceMatrix) -> PersistenceDiagram:
    """Dimension-0 barcode via union-find over ascending edges.

    The finite deaths are exactly the minimum-spanning-tree edge weights
    (single-linkage duality); ties break by (value, lexicographic edge).
    One bar per point, all births 0, one death = +inf per final component.
    """
    n = dm.n
    ii, jj, vals = _sorted_edge_list(dm)
    parent = list(range(n))

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    deaths = []
    for i, j, v in zip(ii, jj, vals):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[rj] = ri
            deaths.append(v)
            if len(deaths) == n - 1:
                break
    deaths.append(math.inf)
    k = len(deaths)
    return PersistenceDiagram(
        dims=np.zeros(k, dtype=np.int8),
        births=np.zeros(k),
        deaths=np.asarray(deaths, dtype=np.float64),
        eps_max=math.inf,
        n_points=n,
    )


def rips_filtration(
    dm: DistanceMatrix,
    eps_max: float,
    max_dim: int = 2,
    budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> Filtration:
    """All vertices, edges with value <= eps_max, and (for max_dim=2)
    triangles whose longest edge is <= eps_max.

    Raises CapacityError naming the simplex count when the complex would
    exceed the budget.
    """
    if eps_max <= 0:
        raise ConfigError(f"eps_max must be positive, got {eps_max}")
    if max_dim not in (1, 2):
        raise ConfigError(f"max_dim must be 1 or 2, got {max_dim}")
    n = dm.n
    ii, jj, vals = _sorted_edge_list(dm)
    keep = vals <= eps_max
    ii, jj, vals = ii[keep], jj[keep], vals[keep]
    edges = np.stack([ii, jj], axis=1).astype(np.int32)

    tris = np.zeros((0, 3), dtype=np.int32)
    tri_vals = np.zeros(0)
    if max_dim == 2 and n >= 3:
        adj = dm.values <= eps_max
        np.fill_diagonal(adj, False)
        above = np.arange(n)
        count = 0
        for i, j in edges:
            count += int(np.count_nonzero(adj[i] & adj[j] & (above > j)))
            if n + len(edges) + count > budget:
                raise CapacityError(
                    f"filtration needs more than {n + len(edges) + count} "
                    f"simplices, over the budget of {budget}; lower eps_max "
                    "or the point count"
                )
        buf_i = np.empty(count, dtype=np.int32)
        buf_j = np.empty(count, dtype=np.int32)
        buf_k = np.empty(count, dtype=np.int32)
        pos = 0
        for i, j in edges:
            ks = np.nonzero(adj[i] & adj[j] & (above > j))[0]
            m = len(ks)
            buf_i[pos : pos + m] = i
            buf_j[pos : pos + m] = j
            buf_k[pos : pos + m] = ks
            pos += m
        tris = np.stack([buf_i, buf_j, buf_k], axis=1)
        d = dm.values
        tri_vals = np.maximum(
            d[buf_i, buf_j], np.maximum(d[buf_i, buf_k], d[buf_j, buf_k])
        )
        order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0], tri_vals))
        tris = tris[order]
        tri_vals = tri_vals[order]

    total = n + len(edges) + len(tris)
    if total > budget:
        raise CapacityError(
            f"filtration needs {total} simplices, over the budget of {budget}; "
            "lower eps_max or the point count"
        )
    return Filtration(
        n_vertices=n,
        edges=edges,
        edge_values=vals,
        triangles=tris,
        triangle_values=tri_vals,
        eps_max=float(eps_max),
    )


def reduce_filtration(filt: Filtration) -> PersistenceDiagram:
    """Persistence pairing by column reduction with clearing.

    Triangle columns are reduced first (pairing edges that kill H1
    classes); paired edges are then cleared, so the edge pass only pairs
    vertices (H0) and flags the censored H1 creators.  The H0 portion
    agrees with h0_barcode up to censoring at eps_max.

    Columns live in Z/2 and are stored as Python big-int bitsets: XOR is
    word-parallel, the pivot is bit_length() - 1.
    """
    n = filt.n_vertices
    edges = filt.edges
    e_vals = filt.edge_values
    n_edges = len(edges)

    # rank of each edge within the edge ordering, for boundary lookups
    rank = {}
    for r in range(n_edges):
        rank[(int(edges[r, 0]), int(edges[r, 1]))] = r

    # --- phase 1: triangles kill 1-cycles ---------------------------------
    pivot1 = {}  # edge rank -> reduced column bitset
    pivot1_tri = {}  # edge rank -> triangle index
    tri_rows = [tuple(int(x) for x in row) for row in filt.triangles]
    for t, (u, v, w) in enumerate(tri_rows):
        col = (1 << rank[(u, v)]) | (1 << rank[(u, w)]) | (1 << rank[(v, w)])
        while col:
            low = col.bit_length() - 1
            hit = pivot1.get(low)
            if hit is None:
                pivot1[low] = col
                pivot1_tri[low] = t
                break
            col ^= hit

    # --- phase 2: edges kill components; uncleared empties are 1-cycles ---
    pivot0 = {}  # vertex -> reduced column bitset
    h0_pairs = []  # (vertex, edge rank)
    h1_censored = []  # edge rank of 1-cycles alive at eps_max
    for e in range(n_edges):
        if e in pivot1:
            continue  # cleared: known creator, paired with a triangle
        col = (1 << int(edges[e, 0])) | (1 << int(edges[e, 1]))
        while col:
            low = col.bit_length() - 1
            hit = pivot0.get(low)
            if hit is None:
                pivot0[low] = col
                h0_pairs.append((low, e))
                break
            col ^= hit
        if col == 0:
            h1_censored.append(e)

    bars = []
    h1_creators = []
    zero0 = zero1 = 0
    for _, e in h0_pairs:
        death = float(e_vals[e])
        if death == 0.0:
            zero0 += 1
        else:
            bars.append((0, 0.0, death, (-1, -1)))
    for _ in range(n - len(h0_pairs)):
        bars.append((0, 0.0, math.inf, (-1, -1)))
    for low, t in pivot1_tri.items():
        birth = float(e_vals[low])
        death = float(filt.triangle_values[t])
        if death == birth:
            zero1 += 1
        else:
            bars.append((1, birth, death, (int(edges[low, 0]), int(edges[low, 1]))))
    for e in h1_censored:
        bars.append((1, float(e_vals[e]), math.inf, (int(edges[e, 0]), int(edges[e, 1]))))

    bars.sort(key=lambda b: (b[0], b[1], b[2], b[3]))
    dims = np.array([b[0] for b in bars], dtype=np.int8)
    births = np.array([b[1] for b in bars])
    deaths = np.array([b[2] for b in bars])
    h1_edges = np.array(
        [b[3] for b in bars if b[0] == 1], dtype=np.int32
    ).reshape(-1, 2)
    return PersistenceDiagram(
        dims=dims,
        births=births,
        deaths=deaths,
        eps_max=filt.eps_max,
        n_points=n,
        zero_bars=(zero0, zero1),
        h1_edges=h1_edges,
    )


def brute_force_diagram(dm: DistanceMatrix, eps_max: float) -> PersistenceDiagram:
    """Oracle: full dense boundary matrix reduced left-to-right.

    Guarded to n <= 10; no clearing, no sparsity, no shortcuts.  Output
    semantics (censoring, zero-bar suppression) match reduce_filtration.
    """
    n = dm.n
    if n > 10:
        raise ValueError(f"brute force oracle is guarded to n <= 10, got {n}")
    d = dm.values
    simp = [((i,), 0.0) for i in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        if d[i, j] <= eps_max:
            simp.append(((i, j), float(d[i, j])))
    for i, j, k in itertools.combinations(range(n), 3):
        v = max(d[i, j], d[i, k], d[j, k])
        if v <= eps_max:
            simp.append(((i, j, k), float(v)))
    simp.sort(key=lambda s: (s[1], len(s[0]), s[0]))
    index = {verts: pos for pos, (verts, _) in enumerate(simp)}
    m = len(simp)
    mat = np.zeros((m, m), dtype=np.uint8)
    for pos, (verts, _) in enumerate(simp):
        if len(verts) > 1:
            for face in itertools.combinations(verts, len(verts) - 1):
                mat[index[face], pos] = 1

    pivot = {}
    pairs = []
    creators = []
    for col in range(m):
        while True:
            nz = np.flatnonzero(mat[:, col])
            if nz.size == 0:
                creators.append(col)
                break
            low = int(nz[-1])
            if low in pivot:
                mat[:, col] ^= mat[:, pivot[low]]
            else:
                pivot[low] = col
                pairs.append((low, col))
                break

    killed = {i for i, _ in pairs}
    bars = []
    zero0 = zero1 = 0
    for i, j in pairs:
        dim = len(simp[i][0]) - 1
        birth, death = simp[i][1], simp[j][1]
        if death == birth:
            if dim == 0:
                zero0 += 1
            else:
                zero1 += 1
        else:
            bars.append((dim, birth, death))
    for col in creators:
        if col in killed:
            continue
        dim = len(simp[col][0]) - 1
        if dim <= 1:
            bars.append((dim, simp[col][1], math.inf))
    bars.sort()
    return PersistenceDiagram(
        dims=np.array([b[0] for b in bars], dtype=np.int8),
        births=np.array([b[1] for b in bars]),
        deaths=np.array([b[2] for b in bars]),
        eps_max=float(eps_max),
        n_points=n,
        zero_bars=(zero0, zero1),
    )


def betti_curve(diag: PersistenceDiagram, grid: np.ndarray) -> BettiCurve:
    """beta_m(eps) = number of dim-m bars with birth <= eps < death."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) < 0):
        raise ConfigError("grid must be ascending")
    if grid[0] < 0 or grid[-1] > diag.eps_max:
        raise ConfigError(
            f"grid must stay within [0, {diag.eps_max}], got "
            f"[{grid[0]}, {grid[-1]}]"
        )
    counts = []
    for dim in (0, 1):
        mask = diag.dims == dim
        births = np.sort(diag.births[mask])
        deaths = np.sort(diag.deaths[mask])
        alive = np.searchsorted(births, grid, side="right") - np.searchsorted(
            deaths, grid, side="right"
        )
        counts.append(alive.astype(np.int64))
    return BettiCurve(grid=grid, beta0=counts[0], beta1=counts[1])


def censor(diag: PersistenceDiagram, eps_max: float) -> PersistenceDiagram:
    """Map deaths beyond eps_max to +inf (what a capped run would report)."""
    deaths = np.where(diag.deaths > eps_max, math.inf, diag.deaths)
    return PersistenceDiagram(
        dims=diag.dims,
        births=diag.births,
        deaths=deaths,
        eps_max=float(eps_max),
        n_points=diag.n_points,
        zero_bars=diag.zero_bars,
    )


def diagrams_equal(a: PersistenceDiagram, b: PersistenceDiagram, tol: float = 0.0) -> bool:
    """Bar-for-bar multiset equality within an absolute tolerance."""
    for dim in (0, 1):
        ba, bb = a.bars(dim), b.bars(dim)
        if ba.shape != bb.shape:
            return False
        if tol == 0.0:
            if not np.array_equal(ba, bb):
                return False
        else:
            finite = np.isfinite(ba) & np.isfinite(bb)
            if not np.array_equal(np.isfinite(ba), np.isfinite(bb)):
                return False
            if np.any(np.abs(ba[finite] - bb[finite]) > tol):
                return False
    return True
