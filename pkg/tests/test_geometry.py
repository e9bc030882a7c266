import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rdmgeom.core import Direction3, SeededRng, SpinParams, fibonacci_sphere
from rdmgeom.geometry import (DegenerateHullError, SupportBackend, brute_force_hull_planes, convex_hull, d_max,
                              hull_distance, one_sided_distance, order_parameter_axis, support_point,
                              surface_sweep, theta_scan)
from rdmgeom.spin import ChainSpec, chain_ground, pfeuty_point

TETRA = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
CUBE = np.array(list(itertools.product((0.0, 1.0), repeat=3)))


def vertex_set(hull):
    return {tuple(v) for v in hull.vertices}


def test_tetrahedron_with_centroid():
    h = convex_hull(np.vstack([TETRA, TETRA.mean(axis=0)]))
    assert len(h.vertices) == 4 and len(h.facets) == 4 and h.n_faces == 4
    assert 4 not in h.vertex_index
    assert len(h.edges) == 6
    # outward orientation: normal from the winding points away from the centroid
    for tri, eq in zip(h.facets, h.equations):
        a, b, c = h.vertices[tri]
        assert np.cross(b - a, c - a) @ eq[:3] > 0
        assert eq[:3] @ TETRA.mean(axis=0) + eq[3] < 0


def test_cube_with_interior_points(rng):
    pts = np.vstack([CUBE, rng.uniform(0.01, 0.99, size=(100, 3))])
    h = convex_hull(pts)
    assert vertex_set(h) == {tuple(v) for v in CUBE}
    assert len(h.edges) == 12 and h.n_faces == 6
    assert len(h.vertices) - len(h.edges) + h.n_faces == 2
    assert d_max(h).d_max == pytest.approx(1.0)


def test_unit_square_uses_planar_fallback():
    square = np.array([[0, 0, 0.5], [1, 0, 0.5], [1, 1, 0.5], [0, 1, 0.5], [0.5, 0.5, 0.5]])
    h = convex_hull(square)
    assert h.degenerate and h.dim == 2 and len(h.vertices) == 4
    rep = d_max(h)
    assert rep.d_max == pytest.approx(1.0)
    assert rep.meta.get("degenerate") is True


def test_degenerate_variants():
    assert convex_hull(np.zeros((6, 3))).dim == 0
    line = convex_hull(np.outer(np.linspace(0, 1, 7), [1, 2, 3]))
    assert line.dim == 1 and len(line.vertices) == 2
    assert convex_hull(TETRA[:3]).dim == 2
    assert convex_hull(np.empty((0, 3))).dim == -1
    for h in (convex_hull(np.zeros((6, 3))), line):
        with pytest.raises(DegenerateHullError):
            d_max(h)
    with pytest.raises(DegenerateHullError):
        line.signed_distance([[0, 0, 0]])
    with pytest.raises(ValueError):
        convex_hull(np.ones((4, 2)))


def test_smooth_sphere_has_no_long_edges():
    h = convex_hull(fibonacci_sphere(10_000))
    assert d_max(h).d_max < 0.1


def test_hull_matches_brute_force_on_mps_subsample(random_cloud):
    sub = random_cloud[np.random.default_rng(3).choice(len(random_cloud), 200, replace=False), :3]
    h = convex_hull(sub)
    planes = brute_force_hull_planes(sub)
    # one-sided in both directions
    assert one_sided_distance(h.vertices, planes) < 1e-6
    corners = np.unique(np.round(sub[np.isin(np.arange(200), h.vertex_index)], 15), axis=0)
    assert hull_distance(h, sub).max() < 1e-6
    assert len(corners) == len(h.vertices)


def test_hull_distance_exact_outside():
    h = convex_hull(CUBE)
    pts = np.array([[2, 0.5, 0.5], [2, 2, 0.5], [2, 2, 2], [0.5, 0.5, 0.5]])
    assert np.allclose(hull_distance(h, pts), [1, math.sqrt(2), math.sqrt(3), 0])


@st.composite
def clouds(draw):
    n = draw(st.integers(5, 60))
    pts = draw(arrays(float, (n, 3), elements=st.floats(-10, 10, allow_subnormal=False)))
    return pts


@given(clouds())
@settings(max_examples=80)
def test_hull_properties(pts):
    h = convex_hull(pts)
    if h.degenerate:
        return
    span = np.ptp(pts, axis=0)
    assert (h.signed_distance(pts) / span.max()).max() < 1e-9
    again = convex_hull(h.vertices)
    assert vertex_set(again) == vertex_set(h)
    assert vertex_set(convex_hull(pts[::-1])) == vertex_set(h)
    V, F = len(h.vertices), len(h.facets)
    E_tri = len({tuple(sorted(e)) for t in h.facets for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))})
    assert V - E_tri + F == 2


@given(clouds(), st.floats(0.1, 10))
@settings(max_examples=40)
def test_dmax_translation_and_scale(pts, c):
    h = convex_hull(pts)
    if h.degenerate:
        return
    d = d_max(h).d_max
    assert d_max(convex_hull(pts + 3.0)).d_max == pytest.approx(d, rel=1e-9)
    assert d_max(convex_hull(pts * c)).d_max == pytest.approx(c * d, rel=1e-9)


def test_dmax_report_edge_length():
    pts = np.vstack([fibonacci_sphere(300) * 0.3, [[1, 0, 1], [1, 0, -1]]])
    rep = d_max(convex_hull(pts))
    h = convex_hull(pts)
    i, j = rep.edge
    assert rep.d_max == pytest.approx(np.linalg.norm(h.vertices[i] - h.vertices[j]))
    assert rep.d_max == pytest.approx(2.0)


# ---------------------------------------------------------------- Theta scans

def ruled_cloud(theta0, n=1500, seed=0):
    """4D cloud (xx, z, x, y) with one boundary segment along angle theta0 in the X-Y plane."""
    g = np.random.default_rng(seed)
    ball = g.normal(size=(n, 4))
    ball = 0.3 * ball / np.linalg.norm(ball, axis=1, keepdims=True)
    u = np.array([math.cos(theta0 / 2), math.sin(theta0 / 2)])
    ends = np.array([[1, 0, *u], [1, 0, *(-u)]])
    return np.vstack([ball, ends])


@pytest.mark.parametrize("theta0", [0.0, 0.35 * math.pi, 0.6 * math.pi])
def test_theta_scan_finds_rotated_segment(theta0):
    thetas = np.linspace(0, math.pi, 32, endpoint=False)
    rep = theta_scan(ruled_cloud(theta0), thetas)
    step = thetas[1]
    assert min(abs(rep.theta_star - theta0), math.pi - abs(rep.theta_star - theta0)) <= step / 2 + 1e-12
    # brute-force oracle: the segment length is 2 cos((theta - theta0) / 2)
    for t, d in rep.curve:
        assert d == pytest.approx(max(2 * abs(math.cos((t - theta0) / 2)), d), abs=1e-12)
        assert d >= 2 * abs(math.cos((t - theta0) / 2)) - 1e-9
    assert len(rep.curve) == 32 and 0 <= rep.theta_star < math.pi


def test_theta_scan_refinement():
    theta0 = 0.4137
    thetas = np.linspace(0, math.pi, 8, endpoint=False)
    rep = theta_scan(ruled_cloud(theta0), thetas, refine=True)
    assert rep.theta_star == pytest.approx(theta0, abs=1e-3)
    assert rep.d_max == pytest.approx(2.0, abs=1e-6)


def test_theta_scan_degenerate_theta_records_zero():
    base = np.column_stack([np.zeros(10), np.zeros(10), np.linspace(0, 1, 10), np.zeros(10)])
    rep = theta_scan(base, [0.0, math.pi])
    assert [d for _, d in rep.curve] == [0.0, 0.0]


def test_theta_scan_validation():
    with pytest.raises(ValueError):
        theta_scan(np.zeros((5, 3)), [0.0])
    with pytest.raises(ValueError):
        theta_scan(np.zeros((5, 4)), [])
    with pytest.raises(ValueError):
        theta_scan(np.zeros((5, 4)), [-0.1])


def test_order_parameter_axis():
    assert order_parameter_axis(1.0, 0.5, 0.0) == 1.0
    assert order_parameter_axis(1.0, 0.5, math.pi) == pytest.approx(0.5)


# ---------------------------------------------------------------- support points

def test_support_point_examples():
    p = support_point(Direction3((1, 0, 0)), SupportBackend("spinMF"))
    assert p.a == pytest.approx(1) and p.b == pytest.approx(0, abs=1e-9)
    assert p.c in (pytest.approx(1), pytest.approx(-1), pytest.approx(0, abs=1e-12))
    for model in ("spin0d", "spin1d", "spinMF"):
        q = support_point((0, 1, 0), SupportBackend(model, N=8))
        assert np.allclose(q.as_array(), [0, 1, 0], atol=1e-8)


def test_support_point_chain_dominates_mps_cloud(random_cloud):
    n = np.array([1, 1, 0]) / math.sqrt(2)
    p = support_point(Direction3(tuple(n)), SupportBackend("spin1d", N=14))
    r = chain_ground(ChainSpec(14), SpinParams(*n))
    assert np.allclose(p.as_array(), r.point.as_array())
    assert (random_cloud[:1000, :3] @ n).max() <= n @ p.as_array() + 1e-6


def test_classical_backend_mapping():
    b = SupportBackend("classical2d", W=4)
    p = b(Direction3((2, 1.5, 0.3)))
    assert p.axes == ("ZZ", "S", "Z") or len(p.axes) == 3
    with pytest.raises(ValueError):
        b(Direction3((1, -1, 0)))
    with pytest.raises(ValueError):
        SupportBackend("bose3d")


def test_two_direction_sweep():
    res = surface_sweep(SupportBackend("spin1d", N=8), [(0, 1, 0), (0, -1, 0)])
    assert np.allclose(res.points(), [[0, 1, 0], [0, -1, 0]], atol=1e-8)
    assert res.errors == []


def test_fibonacci_endpoint_is_flagged():
    res = surface_sweep(SupportBackend("spin1d", N=8), [(-1, 1e-9, 2), (1, 1, 0)])
    assert res.flagged() == [0]


def test_sweep_records_errors_and_continues():
    res = surface_sweep(SupportBackend("classical2d", W=4), [(1, 1, 0), (1, -1, 0), (1, 2, 0)])
    assert [i for i, _ in res.errors] == [1]
    assert len(res.points()) == 2


def test_sweep_worker_count_does_not_change_results():
    dirs = fibonacci_sphere(12)
    a = surface_sweep(SupportBackend("spin0d"), dirs, workers=1).points()
    b = surface_sweep(SupportBackend("spin0d"), dirs, workers=2).points()
    assert np.array_equal(a, b)


def mf_scatter(count, seed):
    g = np.random.default_rng(seed)

    def bloch():
        v = g.normal(size=(count, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True) * g.uniform(0, 1, (count, 1)) ** (1 / 3)

    a, b = bloch(), bloch()
    return np.column_stack([a[:, 0] * b[:, 0], (a[:, 2] + b[:, 2]) / 2, (a[:, 0] + b[:, 0]) / 2])


def test_mean_field_sweep_contains_product_states():
    res = surface_sweep(SupportBackend("spinMF", restarts=16), fibonacci_sphere(400, hemisphere=True))
    pts = res.points()
    pts = np.vstack([pts, pts * [1, 1, -1]])  # X -> -X symmetry of the product-state set
    h = convex_hull(pts)
    assert hull_distance(h, mf_scatter(1000, 1)).max() < 1e-3
    # support duality: every hull vertex is a swept point
    vid = np.random.default_rng(0).choice(len(h.vertices), min(100, len(h.vertices)), replace=False)
    for v in h.vertices[vid]:
        assert np.linalg.norm(pts - v, axis=1).min() < 1e-6


def line_gap(points):
    """Largest distance between neighbouring points of a parameter sweep."""
    return np.linalg.norm(np.diff(points, axis=0), axis=1).max()


def test_ruled_surface_needs_thermodynamic_limit():
    """Along B_x at J=1, B_z=0.5 a finite ring moves continuously between the
    two polarised sides; only the infinite-chain branches jump."""
    backend = SupportBackend("spin1d", N=8)

    def sweep(n_half):
        bx = np.geomspace(1e-6, 0.5, n_half)
        grid = np.concatenate([-bx[::-1], [0.0], bx])
        return surface_sweep(backend, [(1.0, 0.5, x) for x in grid]).points(), grid

    coarse, _ = sweep(100)
    fine, grid = sweep(400)
    assert line_gap(fine) < 0.5 * line_gap(coarse)
    assert line_gap(fine) < 0.05
    ends = [pfeuty_point(0.5, b).as_array() for b in ("minus", "plus")]
    neg, pos = fine[grid < 0], fine[grid > 0]
    limit = np.vstack([neg, ends, pos])
    assert line_gap(limit) == pytest.approx(2 * pfeuty_point(0.5, "plus").c, abs=1e-12)
