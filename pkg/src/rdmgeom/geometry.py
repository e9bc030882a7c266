"""Convex hulls of expectation clouds, the d_max ruled-surface metric, and support sweeps.

Hull adjacency: two vertices are neighbours when they span an edge of the
hull's facet complex. Triangles that come from one planar face are merged
for this purpose, so face diagonals never count as edges.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.spatial

from .classical import ClassicalParams, CylinderSpec, gibbs_observables
from .core import Direction3, ExpectationPoint, axis_labels
from .spin import (ChainSpec, SpinParams, chain_ground, mean_field_extreme,
                   two_spin_ground)

RANK_TOL = 1e-9
COPLANAR_TOL = 1e-9
# a spectral gap below this leaves a support set that is flat at the 1e-6 level
SUPPORT_FLAT_TOL = 1e-6


class DegenerateHullError(ValueError):
    pass


@dataclass
class ConvexHull3:
    """Hull in original coordinates.

    ``facets`` index into ``vertices`` and are oriented so that
    ``equations[:, :3] @ x + equations[:, 3] <= 0`` inside. For flat or
    lower-dimensional input ``dim < 3`` and ``degenerate`` is set; a planar
    hull keeps its polygon boundary in ``edges`` and a fan in ``facets``.
    """

    vertices: np.ndarray
    vertex_index: np.ndarray
    facets: np.ndarray
    edges: np.ndarray
    equations: np.ndarray
    dim: int
    n_faces: int = 0

    @property
    def degenerate(self) -> bool:
        return self.dim < 3

    def vertex_points(self, axes=("a", "b", "c")) -> list[ExpectationPoint]:
        return [ExpectationPoint(*v, axes=tuple(axes)) for v in self.vertices]

    def signed_distance(self, points) -> np.ndarray:
        """Largest facet-plane excess of each point (<= 0 means inside)."""
        if self.dim < 3:
            raise DegenerateHullError("signed distance needs a full-dimensional hull")
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(p))
        for k in range(0, len(p), 256):
            blk = p[k:k + 256]
            out[k:k + 256] = (blk @ self.equations[:, :3].T + self.equations[:, 3]).max(axis=1)
        return out


@dataclass
class RuledSurfaceReport:
    d_max: float
    edge: tuple[int, int]
    theta_star: float | None = None
    curve: list[tuple[float, float]] | None = None
    meta: dict = field(default_factory=lambda: {"adjacency": "hull edge graph, coplanar triangles merged"})


def _as_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        pts = list(points)
        if pts and isinstance(pts[0], ExpectationPoint):
            arr = np.array([[p.a, p.b, p.c] for p in pts], dtype=float)
        else:
            arr = np.asarray(pts, dtype=float)
    if arr.size == 0:
        return np.empty((0, 3))
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("points must be an (n, 3) array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def _lower_dim_hull(P, order, Q, rank, basis, centre):
    n = len(P)
    empty_f = np.empty((0, 3), dtype=int)
    if n == 0:
        return ConvexHull3(np.empty((0, 3)), np.empty(0, dtype=int), empty_f,
                           np.empty((0, 2), dtype=int), np.empty((0, 4)), -1)
    if rank == 0:
        idx = np.array([order[0]])
        return ConvexHull3(P[idx], idx, empty_f, np.empty((0, 2), dtype=int), np.empty((0, 4)), 0)
    if rank == 1:
        t = (Q - centre) @ basis[0]
        idx = np.array([order[int(np.argmin(t))], order[int(np.argmax(t))]])
        return ConvexHull3(P[idx], idx, empty_f, np.array([[0, 1]]), np.empty((0, 4)), 1)
    uv = (Q - centre) @ basis[:2].T
    h2 = scipy.spatial.ConvexHull(uv)
    ring = h2.vertices  # counter-clockwise order
    idx = order[ring]
    m = len(ring)
    edges = np.array([[i, (i + 1) % m] for i in range(m)])
    facets = np.array([[0, i, i + 1] for i in range(1, m - 1)], dtype=int).reshape(-1, 3)
    return ConvexHull3(P[idx], idx, facets, edges, np.empty((0, 4)), 2, n_faces=1)


def convex_hull(points) -> ConvexHull3:
    """Convex hull of a 3D point cloud.

    Coordinates are rescaled per axis to the unit interval before any
    tolerance test; input is sorted lexicographically first so the result
    does not depend on point order.
    """
    P = _as_array(points)
    n = len(P)
    order = np.lexsort(P.T[::-1]) if n else np.empty(0, dtype=int)
    lo = P.min(axis=0) if n else np.zeros(3)
    span = (P.max(axis=0) - lo) if n else np.ones(3)
    # an axis whose spread is negligible against the cloud's size is treated as flat
    scale = max(float(span.max()), float(np.abs(P).max())) if n else 1.0
    span = np.where(span > 1e-12 * scale, span, 1.0)
    Q = (P[order] - lo) / span if n else np.empty((0, 3))

    if n:
        centre = Q.mean(axis=0)
        _, s, vt = np.linalg.svd(Q - centre, full_matrices=False)
        rank = int(np.count_nonzero(s > RANK_TOL * max(1.0, s[0]) * math.sqrt(n)))
        rank = min(rank, n - 1)
    else:
        centre, vt, rank = np.zeros(3), np.eye(3), 0
    if n < 4 or rank < 3:
        return _lower_dim_hull(P, order, Q, rank, vt, centre)
    try:
        h = scipy.spatial.ConvexHull(Q)
    except scipy.spatial.QhullError:
        return _lower_dim_hull(P, order, Q, 2, vt, centre)

    verts_sorted = np.sort(h.vertices)
    local = np.full(n, -1, dtype=int)
    local[verts_sorted] = np.arange(len(verts_sorted))
    tris = h.simplices.copy()
    eq = h.equations.copy()
    # orient every triangle counter-clockwise seen from outside
    a, b, c = Q[tris[:, 0]], Q[tris[:, 1]], Q[tris[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), eq[:, :3]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    # edge graph with coplanar neighbours merged
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for f, (i, j, k) in enumerate(tris):
        for u, v in ((i, j), (j, k), (k, i)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append(f)
    edges = []
    parent = list(range(len(tris)))

    def root(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for key in sorted(edge_faces):
        fs = edge_faces[key]
        if len(fs) == 2 and np.abs(eq[fs[0]] - eq[fs[1]]).max() < COPLANAR_TOL:
            parent[root(fs[0])] = root(fs[1])
            continue
        edges.append(key)
    n_faces = len({root(f) for f in range(len(tris))})

    # back to original coordinates
    normals = eq[:, :3] / span
    offsets = eq[:, 3] - normals @ lo
    norm = np.linalg.norm(normals, axis=1)
    equations = np.column_stack([normals / norm[:, None], offsets / norm])
    facets = local[tris]
    edge_arr = local[np.array(edges, dtype=int)] if edges else np.empty((0, 2), dtype=int)
    idx = order[verts_sorted]
    return ConvexHull3(P[idx], idx, facets, edge_arr, equations, 3, n_faces=n_faces)


def d_max(hull: ConvexHull3) -> RuledSurfaceReport:
    """Longest edge of the hull's edge graph."""
    if hull.dim < 2 or len(hull.edges) == 0:
        raise DegenerateHullError(f"d_max undefined for a {hull.dim}-dimensional hull")
    diff = hull.vertices[hull.edges[:, 0]] - hull.vertices[hull.edges[:, 1]]
    lengths = np.linalg.norm(diff, axis=1)
    k = int(np.argmax(lengths))
    i, j = hull.edges[k]
    report = RuledSurfaceReport(float(lengths[k]), (int(i), int(j)))
    if hull.dim < 3:
        report.meta["degenerate"] = True
    return report


def order_parameter_axis(x, y, theta):
    """``<O(theta)> = cos(theta/2) <X> + sin(theta/2) <Y>``."""
    return math.cos(theta / 2) * np.asarray(x) + math.sin(theta / 2) * np.asarray(y)


def _d_max_at(base, theta):
    cloud = np.column_stack([base[:, 0], base[:, 1], order_parameter_axis(base[:, 2], base[:, 3], theta)])
    try:
        rep = d_max(convex_hull(cloud))
    except DegenerateHullError:
        return 0.0, (-1, -1)
    return rep.d_max, rep.edge


def theta_scan(base_points, thetas, refine: bool = False) -> RuledSurfaceReport:
    """d_max of ``(XX, Z, <O(theta)>)`` clouds over a grid of mixing angles.

    ``base_points`` rows are ``(xx, z, x, y)``. With ``refine`` the coarse
    argmax is polished by a bounded golden-section search between its grid
    neighbours.
    """
    base = np.asarray(base_points, dtype=float)
    if base.ndim != 2 or base.shape[1] != 4:
        raise ValueError("base points must be rows of (xx, z, x, y)")
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ValueError("empty theta grid")
    if any(t < 0 or t > math.pi for t in thetas):
        raise ValueError("mixing angles must lie in [0, pi]")
    curve = []
    edges = []
    for t in thetas:
        d, e = _d_max_at(base, t)
        curve.append((t, d))
        edges.append(e)
    k = int(np.argmax([d for _, d in curve]))
    theta_star, best, edge = curve[k][0], curve[k][1], edges[k]
    if refine and len(thetas) > 1:
        grid = sorted(thetas)
        pos = grid.index(theta_star)
        lo = grid[max(pos - 1, 0)]
        hi = grid[min(pos + 1, len(grid) - 1)]
        res = scipy.optimize.minimize_scalar(lambda t: -_d_max_at(base, t)[0], bounds=(lo, hi),
                                             method="bounded", options={"xatol": 1e-4})
        if -res.fun > best:
            theta_star, best = float(res.x), float(-res.fun)
            edge = _d_max_at(base, theta_star)[1]
    return RuledSurfaceReport(best, (int(edge[0]), int(edge[1])), theta_star % math.pi, curve)


# --------------------------------------------------------------------------
# support points

@dataclass(frozen=True)
class SupportBackend:
    """Maps a direction ``n`` in expectation space to the extreme point maximising ``n . p``.

    ``model`` is one of ``spin0d``, ``spin1d``, ``spinMF``, ``classical2d``.
    For the spin models ``n`` is read as ``(J, Bz, Bx)`` in the per-site
    normalisation; for ``classical2d`` as ``(2 J, T, h)`` which needs
    ``n_b > 0``.
    """

    model: str
    N: int = 12
    boundary: str = "periodic"
    W: int = 8
    restarts: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("spin0d", "spin1d", "spinMF", "classical2d"):
            raise ValueError(f"no support backend for model {self.model!r}")

    @property
    def axes(self):
        return axis_labels(self.model)

    def solve(self, direction: Direction3) -> tuple[ExpectationPoint, int]:
        na, nb, nc = direction.n
        if self.model in ("spin0d", "spin1d"):
            if self.model == "spin0d":
                r = two_spin_ground(SpinParams(na, nb / 2, nc / 2))
            else:
                r = chain_ground(ChainSpec(self.N, self.boundary), SpinParams(na, nb, nc))
            g = r.degeneracy if r.gap >= SUPPORT_FLAT_TOL else max(r.degeneracy, 2)
            return r.point, g
        if self.model == "spinMF":
            from .core import SeededRng
            r = mean_field_extreme(SpinParams(na, nb, nc), self.restarts, SeededRng(self.seed))
            return r.point, r.degeneracy
        if nb <= 0:
            raise ValueError("classical directions need a positive entropy component")
        g = gibbs_observables(CylinderSpec(self.W), ClassicalParams(J=na / 2, h=nc, T=nb))
        return ExpectationPoint(g.zz, g.S, g.z, self.axes), 1

    def __call__(self, direction: Direction3) -> ExpectationPoint:
        return self.solve(direction)[0]


def support_point(direction: Direction3, backend) -> ExpectationPoint:
    if not isinstance(direction, Direction3):
        direction = Direction3(tuple(direction))
    return backend(direction)


@dataclass
class SweepResult:
    items: list  # (Direction3, ExpectationPoint | None, degeneracy)
    errors: list  # (index, message)

    def points(self) -> np.ndarray:
        return np.array([[p.a, p.b, p.c] for _, p, _ in self.items if p is not None]).reshape(-1, 3)

    def flagged(self) -> list[int]:
        """Indices whose support set is degenerate (a face rather than a point)."""
        return [i for i, (_, p, g) in enumerate(self.items) if p is not None and g > 1]


def _sweep_one(args):
    backend, direction = args
    try:
        point, g = backend.solve(direction)
        return point, g, None
    except Exception as exc:  # recorded per direction, sweep continues
        return None, 0, f"{type(exc).__name__}: {exc}"


def surface_sweep(backend, directions, workers: int = 1) -> SweepResult:
    dirs = [d if isinstance(d, Direction3) else Direction3(tuple(d)) for d in directions]
    jobs = [(backend, d) for d in dirs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_sweep_one(j) for j in jobs]
    items, errors = [], []
    for i, (d, (p, g, err)) in enumerate(zip(dirs, results)):
        items.append((d, p, g))
        if err is not None:
            errors.append((i, err))
    return SweepResult(items, errors)


def brute_force_hull_planes(points, eps: float = 1e-12) -> np.ndarray:
    """Supporting planes through every triple of points (O(n^4) reference)."""
    from . import _kernels
    return _kernels.support_planes(np.asarray(points, dtype=float), eps)


def one_sided_distance(points, planes) -> float:
    """Largest distance by which any point lies outside the plane set."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if len(planes) == 0:
        raise ValueError("no planes")
    excess = p @ planes[:, :3].T - planes[:, 3]
    return float(max(excess.max(), 0.0))


def _point_triangle_distance(p, a, b, c):
    """Distance from ``p`` to each triangle ``(a[k], b[k], c[k])``; closest-point regions by barycentrics."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp, cp = p - b, p - c
    d3, d4 = np.einsum("ij,ij->i", ab, bp), np.einsum("ij,ij->i", ac, bp)
    d5, d6 = np.einsum("ij,ij->i", ab, cp), np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        q = a + v[:, None] * ab + w[:, None] * ac
        # edges
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    q = np.where(on_bc[:, None], b + t_bc[:, None] * (c - b), q)
    q = np.where(on_ac[:, None], a + t_ac[:, None] * ac, q)
    q = np.where(on_ab[:, None], a + t_ab[:, None] * ab, q)
    q = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, q)
    q = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, q)
    q = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, q)
    return np.linalg.norm(p - q, axis=1)


def hull_distance(hull: ConvexHull3, points, chunk: int = 512) -> np.ndarray:
    """Euclidean distance of each point to the hull (zero inside).

    A point outside has its nearest hull point on the boundary, so the
    distance is the minimum over facet triangles.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    excess = np.concatenate([hull.signed_distance(p[k:k + chunk]) for k in range(0, len(p), chunk)]) \
        if len(p) else np.zeros(0)
    out = np.zeros(len(p))
    V = hull.vertices
    a, b, c = V[hull.facets[:, 0]], V[hull.facets[:, 1]], V[hull.facets[:, 2]]
    for i in np.flatnonzero(excess > 0):
        out[i] = float(_point_triangle_distance(p[i], a, b, c).min())
    return out
