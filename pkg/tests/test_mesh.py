import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gamma_damage import (
    GeometryError,
    ParameterError,
    Triangulation,
    cohesive_mesh,
    double_stripe_mesh,
    jump_strip_mesh,
    stripe_mesh,
    uniform_mesh,
    validate,
)
from gamma_damage.mesh import clipped_areas, covering_frame, restrict

UNIT = (0.0, 0.0, 1.0, 1.0)
HALF_ASPECT = math.atan(0.5)


def edge_hash_ok(mesh: Triangulation) -> bool:
    """Independent conformity check: each edge used once (boundary) or twice (interior)."""
    count = Counter()
    for a, b, c in mesh.triangles.tolist():
        for e in ((a, b), (b, c), (c, a)):
            count[tuple(sorted(e))] += 1
    if any(n > 2 for n in count.values()):
        return False
    boundary = {v for e, n in count.items() if n == 1 for v in e}
    return boundary == set(mesh.boundary_vertices.tolist())


def assert_admissible(mesh, h, theta0, domain=None):
    rep = validate(mesh, h, 6.0, theta0, domain)
    assert rep.valid, rep.summary()
    assert edge_hash_ok(mesh)
    assert np.all(mesh.areas > 0)


# --- uniform -------------------------------------------------------------------


@pytest.mark.parametrize("n,r,nv,nt", [(1, 0, 4, 2), (4, 0, 25, 32), (1, 2, None, 8)])
def test_uniform_counts(n, r, nv, nt):
    m = uniform_mesh(n, r)
    assert m.n_triangles == nt
    if nv is not None:
        assert m.n_vertices == nv


def test_uniform_refined_validates_with_half():
    m = uniform_mesh(1, 2)
    assert set(np.round(np.unique(m.edge_lengths), 12)) == {0.5, round(math.sqrt(2) / 2, 12)}
    assert_admissible(m, 0.5, math.radians(45), UNIT)


@pytest.mark.parametrize("n", [2, 5, 9])
@pytest.mark.parametrize("r", [0, 1, 2])
def test_uniform_grid_admissible(n, r):
    m = uniform_mesh(n, r)
    h = (1.0 / n) * 2 ** (-r / 2)
    assert_admissible(m, h, math.radians(45), UNIT)
    assert m.areas.sum() == pytest.approx(1.0, rel=1e-12)


def test_validate_examples():
    m = uniform_mesh(4)
    rep = validate(m, 0.25, 6, math.radians(30))
    assert rep.valid
    assert rep.min_edge == pytest.approx(0.25) and rep.max_edge == pytest.approx(0.25 * math.sqrt(2))
    assert math.degrees(rep.min_angle) == pytest.approx(45)
    bad = validate(m, 0.25, 6, math.radians(50))
    flagged = {t for t, r in bad.violations if r == "angle below theta0"}
    assert not bad.valid and flagged == set(range(m.n_triangles))


def test_validate_short_edge():
    m = Triangulation.build([[0, 0], [0.05, 0], [0.025, 0.3]], [[0, 1, 2]])
    rep = validate(m, 0.1, 6, math.radians(1))
    assert ("edge shorter than h" in dict(rep.violations).values())


def test_validate_detects_hanging_vertex():
    # vertex 4 sits on the diagonal 1-2 of the lower-left triangle
    V = [[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]]
    T = [[0, 1, 2], [1, 3, 4], [4, 3, 2]]
    rep = validate(Triangulation.build(V, T), 0.1, 6, math.radians(10))
    assert any(r == "hanging vertex on an edge" for _, r in rep.violations)


def test_validate_detects_overused_edge():
    V = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 0.5]]
    T = [[0, 1, 2], [0, 3, 1], [0, 1, 4]]
    rep = validate(Triangulation.build(V, T), 0.1, 6, math.radians(5))
    assert any(r == "edge shared by more than two triangles" for _, r in rep.violations)


def test_validate_domain_coverage():
    m = uniform_mesh(2, side=0.5)
    rep = validate(m, 0.25, 6, math.radians(30), UNIT)
    assert not rep.valid and any("not covered" in r for _, r in rep.violations)


def test_build_orients_counterclockwise():
    m = Triangulation.build([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    assert m.areas[0] > 0


def test_build_rejects_bad_index():
    with pytest.raises(GeometryError):
        Triangulation.build([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]])


def test_json_roundtrip_is_exact():
    m = stripe_mesh((math.cos(0.4), math.sin(0.4)), (0.05, 0.1 * 1.0), 0.05, 1.2)
    m2 = Triangulation.from_json(m.to_json())
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.array_equal(m.tags, m2.tags)
    assert np.array_equal(m.boundary_vertices, m2.boundary_vertices)


# --- stripes --------------------------------------------------------------------


def test_stripe_axis_example():
    m = stripe_mesh((1, 0), (0.25, 0.25), 0.25, 1.0)
    assert_admissible(m, 0.25, math.radians(30), UNIT)
    cx = m.vertices[m.triangles].mean(1)[:, 0]
    damaged_cols = np.unique(np.floor(cx[m.tags == 1] / 0.25))
    sound_cols = np.unique(np.floor(cx[m.tags == 0] / 0.25))
    assert len(damaged_cols) == 2 and len(sound_cols) == 2
    assert m.areas[m.tags == 1].sum() == pytest.approx(0.5)


def _stripe_params(gamma_deg, h):
    b = np.array([math.cos(math.radians(gamma_deg)), math.sin(math.radians(gamma_deg))])
    _, L = covering_frame(b)
    m = int(L // (4 * h))
    period = L / m
    return b, L, (1.5 * h, period - 1.5 * h)


@pytest.mark.parametrize("gamma", [0.0, 30.0, 60.0])
@pytest.mark.parametrize("h", [0.04, 0.06, 0.1])
def test_stripe_grid_admissible(gamma, h):
    b, L, widths = _stripe_params(gamma, h)
    full = stripe_mesh(b, widths, h, L)
    assert full.areas.sum() == pytest.approx(L * L, rel=1e-9)
    frac = widths[0] / sum(widths)
    assert full.areas[full.tags == 1].sum() == pytest.approx(frac * L * L, rel=1e-9)
    assert_admissible(full, h, HALF_ASPECT)
    cov = stripe_mesh(b, widths, h)
    assert_admissible(cov, h, HALF_ASPECT, UNIT)
    assert clipped_areas(cov).sum() == pytest.approx(1.0, rel=1e-9)


def test_rotated_stripe_contains_unit_square():
    gamma = math.radians(30)
    b = (math.cos(gamma), math.sin(gamma))
    o, L = covering_frame(b)
    assert L == pytest.approx(math.cos(gamma) + math.sin(gamma))
    bb = np.array(b)
    bp = np.array([-bb[1], bb[0]])
    corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
    s, t = (corners - o) @ bb, (corners - o) @ bp
    assert np.all(s >= -1e-12) and np.all(s <= L + 1e-12)
    assert np.all(t >= -1e-12) and np.all(t <= L + 1e-12)


@pytest.mark.parametrize("gamma", [0.0, 20.0, 45.0])
@pytest.mark.parametrize("h", [0.04, 0.06, 0.1])
def test_double_stripe_grid_admissible(gamma, h):
    b, L, w1 = _stripe_params(gamma, h)
    m2 = int(L // (5 * h))
    w2 = (1.2 * h, L / m2 - 1.2 * h)
    full = double_stripe_mesh(b, w1, w2, L, cross_width=h)
    t1, t2 = w1[0] / sum(w1), w2[0] / sum(w2)
    assert full.areas.sum() == pytest.approx(L * L, rel=1e-9)
    assert full.areas[full.tags == 1].sum() == pytest.approx((t1 + t2 * (1 - t1)) * L * L, rel=1e-9)
    assert_admissible(full, h, HALF_ASPECT)
    assert_admissible(double_stripe_mesh(b, w1, w2, cross_width=h), h, HALF_ASPECT, UNIT)


def test_double_stripe_axis_example():
    m = double_stripe_mesh((1, 0), (0.25, 0.25), (0.25, 0.25), 1.0)
    assert_admissible(m, 0.25, math.radians(30), UNIT)


def test_double_stripe_degenerate_second_direction():
    a = double_stripe_mesh((1, 0), (0.25, 0.25), (0.0, 0.25), 1.0, cross_width=0.25)
    b = stripe_mesh((1, 0), (0.25, 0.25), 0.25, 1.0)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.tags, b.tags)


def test_stripe_rejects_non_dividing_period():
    with pytest.raises(ParameterError):
        stripe_mesh((1, 0), (0.3, 0.4), 0.1, 1.0)


def test_restrict_keeps_only_meeting_triangles():
    m = uniform_mesh(4, side=2.0, origin=(-0.5, -0.5))
    r = restrict(m)
    assert np.all(clipped_areas(r) > 0)
    assert clipped_areas(r).sum() == pytest.approx(1.0)


# --- jump strip ------------------------------------------------------------------


@pytest.mark.parametrize("h", [0.01, 0.02, 0.04])
@pytest.mark.parametrize("theta0_deg", [10.0, 20.0, 30.0])
def test_jump_strip_grid_admissible(h, theta0_deg):
    th = math.radians(theta0_deg)
    l = math.sin(th)
    bw, layer = 0.5 * h * l, 2 * h * l / math.tan(th)
    m = jump_strip_mesh(bw, layer, h=h, theta0=th)
    assert_admissible(m, h, th, UNIT)
    assert clipped_areas(m).sum() == pytest.approx(1.0, rel=1e-9)
    band = clipped_areas(m)[m.tags == 1].sum()
    assert band == pytest.approx(2 * bw, rel=1e-9)


def test_jump_strip_apex_angles_equal_theta0():
    th = math.radians(20)
    h = 0.02
    l = math.sin(th)
    m = jump_strip_mesh(0.5 * h * l, 2 * h * l / math.tan(th), h=h, theta0=th)
    ang = np.sort(m.angles[m.tags == 1], axis=1)
    assert np.allclose(ang[:, 0], th, atol=1e-9) and np.allclose(ang[:, 1], th, atol=1e-9)


def test_jump_strip_rejects_wide_band():
    with pytest.raises(ParameterError):
        jump_strip_mesh(0.2, 0.1)


# --- cohesive fan --------------------------------------------------------------------


@pytest.mark.parametrize("h", [0.01, 0.02, 0.05])
@pytest.mark.parametrize("theta_deg", [20.0, 30.0, 45.0])
def test_cohesive_grid_admissible(h, theta_deg):
    th = math.radians(theta_deg)
    frag = cohesive_mesh(((0, 0), (1, 0)), lambda x: 1.0, h, th)
    assert_admissible(frag.mesh, h, th)
    assert 1 <= frag.mesh.n_triangles <= 1 / (h * math.cos(th)) + 1


def test_cohesive_constant_amplitude_count_and_angles():
    th, h, l = math.radians(30), 0.01, 0.6
    frag = cohesive_mesh(((0, 0), (1, 0)), lambda x: l, h, th)
    M = frag.mesh.n_triangles
    assert abs(M - math.floor(math.tan(th) / (h * l))) <= 1
    ang = np.sort(frag.mesh.angles, axis=1)
    assert np.allclose(ang, np.sort([th, th, math.pi - 2 * th]), atol=1e-12)


@given(st.floats(0.0, 0.9))
def test_cohesive_lipschitz_amplitude(slope):
    th, h = math.radians(30), 0.005
    frag = cohesive_mesh(((0, 0), (1, 0)), lambda x: 1.0 + slope * x[0], h, th)
    spread = frag.diagnostics["angle_spread"]
    assert spread <= 4 * slope * h + 1e-12
    assert frag.mesh.edge_lengths.min() >= h * (1 - 1e-9)
    assert 1 <= frag.mesh.n_triangles <= frag.diagnostics["count_bound"]


def test_cohesive_rejects_small_amplitude():
    with pytest.raises(ParameterError):
        cohesive_mesh(((0, 0), (1, 0)), lambda x: 0.1, 0.01, math.radians(30))
