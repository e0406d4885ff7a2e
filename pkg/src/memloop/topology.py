"""Vietoris-Rips persistence over Z2 (dimensions 0 and 1) for trajectory clouds.

The filtration is truncated at dimension 2: triangles are all that H1 deaths
require, and nothing downstream uses H2. Representative 1-cycles come from
the reduction's pivot columns and are greedily shortened at the birth scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ._backend import reduce_columns
from .core import InputError, StateError, Trajectory, as_point

__all__ = [
    "PointCloud",
    "FilteredComplex",
    "Barcode",
    "CycleRepresentative",
    "build_rips",
    "persistence_z2",
    "extract_cycle",
    "is_nontrivial",
    "bottleneck_distance",
]


@dataclass
class PointCloud:
    """Finite point set with its pairwise distance matrix."""

    points: np.ndarray
    _dmat: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError(f"point cloud must be a non-empty (n, d) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("point cloud contains non-finite coordinates")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]

    def distance_matrix(self) -> np.ndarray:
        if self._dmat is None:
            diff = self.points[:, None, :] - self.points[None, :, :]
            d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            np.fill_diagonal(d, 0.0)
            self._dmat = (d + d.T) / 2.0  # enforce exact symmetry
        return self._dmat

    def diameter(self) -> float:
        return float(self.distance_matrix().max())


@dataclass
class FilteredComplex:
    """Rips complex truncated at dimension 2, sorted by (filtration, dim, lex)."""

    points: np.ndarray
    edges: np.ndarray          # (E, 2) vertex pairs
    edge_filtrations: np.ndarray
    triangles: np.ndarray      # (T, 3) vertex triples
    triangle_filtrations: np.ndarray
    max_filtration: float

    @property
    def n_vertices(self) -> int:
        return self.points.shape[0]

    def simplices(self):
        """All simplices as (vertex tuple, filtration) in global filtration order."""
        items = [((int(v),), 0.0) for v in range(self.n_vertices)]
        items += [
            (tuple(int(x) for x in e), float(f))
            for e, f in zip(self.edges, self.edge_filtrations)
        ]
        items += [
            (tuple(int(x) for x in t), float(f))
            for t, f in zip(self.triangles, self.triangle_filtrations)
        ]
        return sorted(items, key=lambda s: (s[1], len(s[0]), s[0]))


@dataclass(frozen=True)
class CycleRepresentative:
    """Closed polygonal loop in latent space (first vertex not repeated)."""

    vertices: np.ndarray
    persistence: float
    birth: float

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or len(np.unique(v, axis=0)) < 3:
            raise InputError("cycle needs >= 3 distinct vertices")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def total_length(self) -> float:
        return float(self.edge_lengths().sum())

    def point_at_arc(self, s: float) -> np.ndarray:
        """Point at arc length ``s`` (wrapped) along the polygon."""
        lengths = self.edge_lengths()
        total = lengths.sum()
        s = float(s) % total
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        i = int(np.searchsorted(cum, s, side="right") - 1)
        i = min(i, len(lengths) - 1)
        t = (s - cum[i]) / lengths[i] if lengths[i] > 0 else 0.0
        nxt = self.vertices[(i + 1) % len(self.vertices)]
        return self.vertices[i] + t * (nxt - self.vertices[i])

    def project(self, point: np.ndarray) -> tuple[np.ndarray, float, int, float]:
        """Closest point on the polygon.

        Returns (projected point, arc-length coordinate, edge index, distance).
        Ties between edges resolve to the lowest edge index.
        """
        p = as_point(point, dim=self.vertices.shape[1], name="point")
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        t = np.zeros(len(a))
        nz = denom > 0
        t[nz] = np.einsum("ij,ij->i", (p - a)[nz], ab[nz]) / denom[nz]
        t = np.clip(t, 0.0, 1.0)
        proj = a + t[:, None] * ab
        dists = np.linalg.norm(proj - p, axis=1)
        i = int(np.argmin(dists))  # argmin takes the first minimum: lowest edge wins
        lengths = np.sqrt(denom)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        arc = float(cum[i] + t[i] * lengths[i])
        return proj[i], arc, i, float(dists[i])


@dataclass
class Barcode:
    """Persistence intervals per dimension with H1 representative loops.

    ``intervals[dim]`` is a list of (birth, death) with ``death = math.inf``
    for essential classes. ``representatives[r]`` is the closed vertex-index
    loop of ``intervals[1][r]`` (first vertex not repeated). Zero-persistence
    intervals are dropped in every dimension.
    """

    intervals: dict
    representatives: list
    points: np.ndarray
    max_filtration: float
    triangle_cycle_births: np.ndarray  # filtrations of unpaired triangles (rank checks)

    def h1_by_persistence(self) -> list[int]:
        """Indices of H1 intervals ordered by persistence descending."""
        bars = self.intervals.get(1, [])

        def pers(i):
            b, d = bars[i]
            return (-(d - b), b, d)

        return sorted(range(len(bars)), key=pers)


# ---------------------------------------------------------------------------
# Complex construction
# ---------------------------------------------------------------------------


def build_rips(cloud: PointCloud, max_filtration: float) -> FilteredComplex:
    """All simplices of dimension <= 2 with diameter <= max_filtration."""
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(np.asarray(cloud))
    if not (np.isfinite(max_filtration) and max_filtration > 0):
        raise InputError(f"max_filtration must be > 0, got {max_filtration}")
    n = len(cloud)
    d = cloud.distance_matrix()

    iu, ju = np.triu_indices(n, k=1)
    ed = d[iu, ju]
    keep = ed <= max_filtration
    edges = np.column_stack([iu[keep], ju[keep]]).astype(np.int64)
    efilt = ed[keep]
    order = np.lexsort((edges[:, 1], edges[:, 0], efilt))
    edges, efilt = edges[order], efilt[order]

    if n >= 3:
        tris = np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
        tf = np.maximum(
            d[tris[:, 0], tris[:, 1]],
            np.maximum(d[tris[:, 0], tris[:, 2]], d[tris[:, 1], tris[:, 2]]),
        )
        keep = tf <= max_filtration
        tris, tf = tris[keep], tf[keep]
        order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0], tf))
        tris, tf = tris[order], tf[order]
    else:
        tris = np.empty((0, 3), dtype=np.int64)
        tf = np.empty(0)

    return FilteredComplex(
        points=cloud.points,
        edges=edges,
        edge_filtrations=efilt,
        triangles=tris,
        triangle_filtrations=tf,
        max_filtration=float(max_filtration),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def persistence_z2(complex_: FilteredComplex) -> Barcode:
    """Z2 persistence barcode in dimensions 0 and 1 with H1 representatives."""
    n = complex_.n_vertices
    edges = complex_.edges
    efilt = complex_.edge_filtrations
    tris = complex_.triangles
    tfilt = complex_.triangle_filtrations
    n_edges = len(edges)

    # Dimension 1 columns: vertex-pair boundaries. The basis is tracked so
    # essential 1-cycles (creator edges never paired with a triangle) still
    # get a representative.
    edge_cols = [edges[j] for j in range(n_edges)]
    lows1, _, cycles1 = reduce_columns(edge_cols, n, need_chains=False, need_basis=True)

    h0: list[tuple[float, float]] = []
    paired_vertices = set()
    for j in range(n_edges):
        if lows1[j] >= 0:
            paired_vertices.add(int(lows1[j]))
            if efilt[j] > 0.0:
                h0.append((0.0, float(efilt[j])))
    h0.extend((0.0, math.inf) for v in range(n) if v not in paired_vertices)

    # Dimension 2 columns: edge-index boundaries.
    eidx = np.full((n, n), -1, dtype=np.int64)
    eidx[edges[:, 0], edges[:, 1]] = np.arange(n_edges)
    eidx[edges[:, 1], edges[:, 0]] = np.arange(n_edges)
    if len(tris):
        tri_cols = np.sort(
            np.column_stack(
                [
                    eidx[tris[:, 0], tris[:, 1]],
                    eidx[tris[:, 0], tris[:, 2]],
                    eidx[tris[:, 1], tris[:, 2]],
                ]
            ),
            axis=1,
        )
        cols = [tri_cols[j] for j in range(len(tris))]
        lows2, chains2, _ = reduce_columns(cols, n_edges, need_chains=True)
    else:
        lows2 = np.empty(0, dtype=np.int64)
        chains2 = {}

    h1: list[tuple[float, float]] = []
    reps: list[np.ndarray] = []
    killed_edges = set()
    for j in range(len(tris)):
        low = int(lows2[j])
        if low < 0:
            continue
        killed_edges.add(low)
        birth, death = float(efilt[low]), float(tfilt[j])
        if death > birth:
            loop = _chain_to_loop(chains2[j], low, edges)
            loop = _shorten_loop(loop, complex_, birth)
            h1.append((birth, death))
            reps.append(loop)
    for j in range(n_edges):
        if lows1[j] < 0 and j not in killed_edges:
            birth = float(efilt[j])
            loop = _chain_to_loop(cycles1[j], j, edges)
            loop = _shorten_loop(loop, complex_, birth)
            h1.append((birth, math.inf))
            reps.append(loop)

    tri_cycle_births = np.sort(tfilt[[j for j in range(len(tris)) if lows2[j] < 0]]) \
        if len(tris) else np.empty(0)

    return Barcode(
        intervals={0: h0, 1: h1},
        representatives=reps,
        points=complex_.points,
        max_filtration=complex_.max_filtration,
        triangle_cycle_births=tri_cycle_births,
    )


def _chain_to_loop(edge_ids: np.ndarray, pivot_edge: int, edges: np.ndarray) -> np.ndarray:
    """Walk the component of a Z2 edge chain containing the pivot edge.

    Every vertex of a Z2 cycle has even degree, so starting along the pivot
    edge and always leaving on the unused edge toward the smallest neighbor
    returns to the start; the walk is a closed chain containing the pivot.
    """
    adj: dict[int, list[int]] = {}
    for e in edge_ids:
        u, v = int(edges[e, 0]), int(edges[e, 1])
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    for v in adj:
        adj[v].sort()
    used = set()
    start, cur = int(edges[pivot_edge, 0]), int(edges[pivot_edge, 1])
    used.add((start, cur))
    loop = [start, cur]
    while cur != start:
        for nxt in adj[cur]:
            key = (min(cur, nxt), max(cur, nxt))
            if key not in used:
                used.add(key)
                loop.append(nxt)
                cur = nxt
                break
        else:  # pragma: no cover - impossible for a valid Z2 cycle
            raise StateError("stuck while walking a cycle chain")
    return np.asarray(loop[:-1], dtype=np.int64)


def _shorten_loop(loop: np.ndarray, complex_: FilteredComplex, birth: float) -> np.ndarray:
    """Greedy edge-replacement shortcutting, valid at the birth scale.

    Replacing (a, b, c) by (a, c) adds the boundary of triangle (a, b, c);
    the class is unchanged as long as the new edge fits at the birth scale
    (then the triangle does too, its other edges being loop edges).
    """
    pts = complex_.points
    limit = min(birth * (1.0 + 1e-9) + 1e-12, complex_.max_filtration)
    verts = list(int(v) for v in loop)
    changed = True
    while changed and len(verts) > 3:
        changed = False
        i = 0
        while i < len(verts) and len(verts) > 3:
            a, b, c = verts[i], verts[(i + 1) % len(verts)], verts[(i + 2) % len(verts)]
            if a != c and np.linalg.norm(pts[a] - pts[c]) <= limit:
                del verts[(i + 1) % len(verts)]
                changed = True
            else:
                i += 1
    return np.asarray(verts, dtype=np.int64)


def extract_cycle(barcode: Barcode, rank: int) -> CycleRepresentative:
    """Representative loop of the rank-th most persistent H1 interval."""
    order = barcode.h1_by_persistence()
    if rank < 0 or rank >= len(order):
        raise InputError(f"rank {rank} out of range; barcode has {len(order)} H1 intervals")
    idx = order[rank]
    birth, death = barcode.intervals[1][idx]
    loop = barcode.representatives[idx]
    return CycleRepresentative(
        vertices=barcode.points[loop],
        persistence=float(death - birth) if math.isfinite(death) else math.inf,
        birth=float(birth),
    )


# ---------------------------------------------------------------------------
# Trajectory-level checks
# ---------------------------------------------------------------------------


def default_noise_floor(cloud: PointCloud) -> float:
    """3x the median nearest-neighbor distance (scale-aware default)."""
    d = cloud.distance_matrix().copy()
    np.fill_diagonal(d, np.inf)
    nn = d.min(axis=1)
    return 3.0 * float(np.median(nn))


def is_nontrivial(trajectory: Trajectory, noise_floor: Optional[float] = None,
                  max_filtration: Optional[float] = None) -> tuple[bool, float]:
    """Does the trajectory's content cloud carry an H1 class above the floor?

    Persistence of a bar still open at the truncation scale is measured to
    that scale. Returns (flag, max H1 persistence).
    """
    if len(trajectory) < 4:
        raise InputError("trajectory needs at least 4 points")
    cloud = PointCloud(trajectory.contents)
    diam = cloud.diameter()
    if diam == 0.0:
        return False, 0.0
    if max_filtration is None:
        max_filtration = diam * (1.0 + 1e-9)
    if noise_floor is None:
        noise_floor = default_noise_floor(cloud)
    barcode = persistence_z2(build_rips(cloud, max_filtration))
    best = 0.0
    for birth, death in barcode.intervals.get(1, []):
        best = max(best, (death if math.isfinite(death) else max_filtration) - birth)
    return best > noise_floor, best


# ---------------------------------------------------------------------------
# Bottleneck distance
# ---------------------------------------------------------------------------


def bottleneck_distance(a: Barcode | list, b: Barcode | list, dim: int = 1) -> float:
    """Exact bottleneck distance between two barcodes in one dimension.

    Accepts Barcode objects or raw interval lists. Finite bars are matched by
    binary search over candidate costs with a bipartite feasibility check
    (diagonal projections included); essential bars must match each other.
    """
    bars_a = a.intervals.get(dim, []) if isinstance(a, Barcode) else list(a)
    bars_b = b.intervals.get(dim, []) if isinstance(b, Barcode) else list(b)
    inf_a = sorted(x[0] for x in bars_a if not math.isfinite(x[1]))
    inf_b = sorted(x[0] for x in bars_b if not math.isfinite(x[1]))
    if len(inf_a) != len(inf_b):
        return math.inf
    essential_cost = max((abs(x - y) for x, y in zip(inf_a, inf_b)), default=0.0)

    fa = np.array([x for x in bars_a if math.isfinite(x[1])], dtype=np.float64).reshape(-1, 2)
    fb = np.array([x for x in bars_b if math.isfinite(x[1])], dtype=np.float64).reshape(-1, 2)
    n, m = len(fa), len(fb)
    if n == 0 and m == 0:
        return essential_cost

    cross = np.maximum(
        np.abs(fa[:, 0][:, None] - fb[:, 0][None, :]) if n and m else np.zeros((n, m)),
        np.abs(fa[:, 1][:, None] - fb[:, 1][None, :]) if n and m else np.zeros((n, m)),
    )
    diag_a = (fa[:, 1] - fa[:, 0]) / 2.0
    diag_b = (fb[:, 1] - fb[:, 0]) / 2.0

    candidates = np.unique(
        np.concatenate([cross.ravel(), diag_a, diag_b, [0.0]])
    )

    def feasible(t: float) -> bool:
        # Left side: n real bars of A, then m diagonal slots (one per B bar).
        # Right side: m real bars of B, then n diagonal slots (one per A bar).
        rows, cols = [], []
        if n and m:
            r, c = np.nonzero(cross <= t)
            rows.extend(r.tolist())
            cols.extend(c.tolist())
        for i in np.nonzero(diag_a <= t)[0]:
            rows.append(int(i))
            cols.append(m + int(i))
        for j in np.nonzero(diag_b <= t)[0]:
            rows.append(n + int(j))
            cols.append(int(j))
        for i in range(m):
            for j in range(n):
                rows.append(n + i)
                cols.append(m + j)
        size = n + m
        graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
        match = maximum_bipartite_matching(graph, perm_type="column")
        return int((match >= 0).sum()) == size

    lo, hi = 0, len(candidates) - 1
    if not feasible(candidates[hi]):  # pragma: no cover - cannot happen: all-diagonal works
        return math.inf
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return max(essential_cost, float(candidates[lo]))
