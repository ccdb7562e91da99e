import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamma_damage import (
    ConvergenceError,
    DamageField,
    DisplacementField,
    Hooke,
    RegimeParams,
    Sym2,
    UsageError,
    alt_minimize,
    energy,
    optimal_chi,
    quad_form,
    solve_elastic,
    sym_grad,
    uniform_mesh,
)
from gamma_damage.fem import (
    dirichlet_data,
    fields_from_json,
    fields_to_json,
    interpolate,
    pcg,
    stiffness_matrix,
    strains,
)
from gamma_damage.mesh import stripe_mesh

A0 = Hooke.isotropic(1.0, 1.0)
A1 = Hooke.identity()
P = RegimeParams(1.0, 0.1, 0.1, 0.1, math.radians(30))
entries = st.floats(-3, 3, allow_nan=False)


def affine(X, c=(0.0, 0.0)):
    X = np.asarray(X, dtype=float)
    return lambda Pts: Pts @ X.T + np.asarray(c)


@given(entries, entries, entries, entries)
def test_affine_strain_is_reproduced(a, b, c, d):
    m = uniform_mesh(3)
    X = np.array([[a, b], [c, d]])
    u = interpolate(m, affine(X))
    sym = Sym2.from_matrix(0.5 * (X + X.T)).vec()
    assert np.allclose(strains(u), sym[None, :], atol=1e-12)
    for t in (0, 5, 17):
        assert np.allclose(sym_grad(u, t).vec(), sym, atol=1e-12)


def test_rigid_motion_has_zero_strain():
    m = uniform_mesh(4)
    W = np.array([[0.0, -0.7], [0.7, 0.0]])
    u = interpolate(m, affine(W, (1.0, -2.0)))
    assert np.allclose(strains(u), 0.0, atol=1e-13)


def test_energy_examples():
    m = uniform_mesh(4)
    X = np.array([[0.3, 0.1], [0.1, -0.2]])
    u = interpolate(m, affine(X))
    e = energy(u, DamageField.zeros(m), A0, A1, P)
    assert e.total == pytest.approx(0.5 * quad_form(A1, Sym2.from_matrix(X)), rel=1e-12)
    zero = DisplacementField(m, np.zeros((m.n_vertices, 2)))
    e1 = energy(zero, DamageField.ones(m), A0, A1, P)
    assert e1.total == pytest.approx(P.kappa / P.eps, rel=1e-12)
    assert e1.sound_elastic == 0 and e1.damaged_elastic == 0


def test_energy_rejects_mismatched_meshes():
    m1, m2 = uniform_mesh(2), uniform_mesh(2)
    with pytest.raises(UsageError):
        energy(DisplacementField(m1, np.zeros((9, 2))), DamageField.zeros(m2), A0, A1, P)


def test_optimal_chi_examples():
    m = uniform_mesh(2)
    zero = DisplacementField(m, np.zeros((m.n_vertices, 2)))
    assert not optimal_chi(zero, A0, A1, P).chi.any()
    # scale s with 1/2 A1 e:e = 10 (1/2 eta A0 e:e + kappa/eps) at e = s diag(1, 0)
    p = RegimeParams(1.0, 0.1, 0.01, 0.1, math.radians(30))
    e = Sym2.diag(1.0, 0.0)
    q1, q0 = 0.5 * quad_form(A1, e), 0.5 * p.eta * quad_form(A0, e)
    s = math.sqrt(10 * p.kappa / p.eps / (q1 - 10 * q0))
    u = interpolate(m, affine(s * e.matrix()))
    assert optimal_chi(u, A0, A1, p).chi.all()


def test_optimal_chi_tie_stays_sound():
    m = uniform_mesh(1)
    e = Sym2.diag(1.0, 0.0)
    q1, q0 = 0.5 * quad_form(A1, e), 0.5 * P.eta * quad_form(A0, e)
    # exact tie: q1 s^2 = q0 s^2 + kappa/eps
    s2 = (P.kappa / P.eps) / (q1 - q0)
    u = interpolate(m, affine(math.sqrt(s2) * e.matrix()))
    q = strains(u)
    q1v = 0.5 * np.einsum("mi,ij,mj->m", q, A1.matrix, q)
    q0v = 0.5 * P.eta * np.einsum("mi,ij,mj->m", q, A0.matrix, q)
    chi = optimal_chi(u, A0, A1, P).chi
    assert np.array_equal(chi, q1v > q0v + P.kappa / P.eps)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31 - 1))
def test_optimal_chi_beats_random_damage(seed):
    rng = np.random.default_rng(seed)
    m = uniform_mesh(4)
    u = DisplacementField(m, 3 * rng.standard_normal((m.n_vertices, 2)))
    best = energy(u, optimal_chi(u, A0, A1, P), A0, A1, P).total
    for _ in range(20):
        chi = DamageField(m, rng.random(m.n_triangles) < 0.5)
        assert best <= energy(u, chi, A0, A1, P).total + 1e-12


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31 - 1))
def test_energy_frame_indifferent(seed):
    rng = np.random.default_rng(seed)
    m = uniform_mesh(3)
    u = DisplacementField(m, rng.standard_normal((m.n_vertices, 2)))
    chi = DamageField(m, rng.random(m.n_triangles) < 0.3)
    w = rng.standard_normal()
    rigid = interpolate(m, affine([[0, -w], [w, 0]], rng.standard_normal(2)))
    a, b = energy(u, chi, A0, A1, P), energy(u + rigid, chi, A0, A1, P)
    for k, v in a.as_dict().items():
        assert b.as_dict()[k] == pytest.approx(v, rel=1e-10, abs=1e-12)


def test_clipping_consistent_on_exact_tiling():
    rng = np.random.default_rng(3)
    m = uniform_mesh(5)
    u = DisplacementField(m, rng.standard_normal((m.n_vertices, 2)))
    chi = DamageField(m, rng.random(m.n_triangles) < 0.4)
    a = energy(u, chi, A0, A1, P, clip_to_unit_square=False)
    b = energy(u, chi, A0, A1, P, clip_to_unit_square=True)
    assert b.total == pytest.approx(a.total, rel=1e-12)


def test_clipping_discards_outside_area():
    m = uniform_mesh(4, side=2.0, origin=(-0.5, -0.5))
    zero = DisplacementField(m, np.zeros((m.n_vertices, 2)))
    e = energy(zero, DamageField.ones(m), A0, A1, P, clip_to_unit_square=True)
    assert e.dissipation == pytest.approx(P.kappa / P.eps)


def test_weights_multiply_area():
    m = uniform_mesh(2)
    zero = DisplacementField(m, np.zeros((m.n_vertices, 2)))
    w = np.full(m.n_triangles, 3.0)
    assert energy(zero, DamageField.ones(m), A0, A1, P, weights=w).total == pytest.approx(3 * P.kappa / P.eps)


def test_fields_json_roundtrip():
    m = uniform_mesh(2)
    rng = np.random.default_rng(0)
    u = DisplacementField(m, rng.standard_normal((m.n_vertices, 2)))
    chi = DamageField(m, rng.random(m.n_triangles) < 0.5)
    u2, chi2 = fields_from_json(m, fields_to_json(u, chi))
    assert np.array_equal(u.values, u2.values) and np.array_equal(chi.chi, chi2.chi)


# --- solver ---------------------------------------------------------------------------


def test_solve_reproduces_affine_data():
    m = uniform_mesh(6)
    X = np.array([[0.4, -0.3], [0.2, 0.1]])
    u = solve_elastic(m, DamageField.zeros(m), affine(X), A0, A1, P, 1e-13)
    assert np.allclose(u.values, affine(X)(m.vertices), atol=1e-10)
    sym = Sym2.from_matrix(0.5 * (X + X.T)).vec()
    assert np.allclose(strains(u), sym, atol=1e-10)


def test_solution_independent_of_chi_when_phases_agree():
    m = uniform_mesh(5)
    p1 = RegimeParams(1.0, 0.1, 1.0, 0.1, math.radians(30))
    rng = np.random.default_rng(1)
    bc = lambda Pt: np.column_stack([np.sin(3 * Pt[:, 0]), Pt[:, 0] * Pt[:, 1]])
    u1 = solve_elastic(m, DamageField.zeros(m), bc, A1, A1, p1, 1e-13)
    u2 = solve_elastic(m, DamageField(m, rng.random(m.n_triangles) < 0.5), bc, A1, A1, p1, 1e-13)
    assert np.allclose(u1.values, u2.values, atol=1e-10)


def test_solution_minimizes_among_same_trace():
    m = uniform_mesh(5)
    rng = np.random.default_rng(2)
    chi = DamageField(m, rng.random(m.n_triangles) < 0.3)
    bc = lambda Pt: np.column_stack([Pt[:, 0] ** 2, np.cos(Pt[:, 1])])
    u = solve_elastic(m, chi, bc, A0, A1, P, 1e-13)
    E = energy(u, chi, A0, A1, P).total
    interior = np.setdiff1d(np.arange(m.n_vertices), m.boundary_vertices)
    for _ in range(10):
        pert = np.zeros((m.n_vertices, 2))
        pert[interior] = 1e-2 * rng.standard_normal((len(interior), 2))
        assert E <= energy(u + DisplacementField(m, pert), chi, A0, A1, P).total + 1e-14


def test_dirichlet_forms_agree():
    m = uniform_mesh(2)
    f = affine([[1, 0], [0, 2]])
    idx, vals = dirichlet_data(m, f)
    for form in ({int(i): v for i, v in zip(idx, vals)}, (idx, vals), interpolate(m, f)):
        i2, v2 = dirichlet_data(m, form)
        assert np.array_equal(np.sort(i2), np.sort(idx))
        assert np.allclose(v2[np.argsort(i2)], vals[np.argsort(idx)])


def test_pcg_matches_direct_solve_and_reports_stall():
    m = uniform_mesh(4)
    K = stiffness_matrix(m, np.zeros(m.n_triangles, bool), A0, A1, 1.0, m.areas)
    K = K + 1e-2 * np.eye(K.shape[0])
    import scipy.sparse as sp
    K = sp.csr_matrix(K)
    b = np.random.default_rng(0).standard_normal(K.shape[0])
    x, hist = pcg(K, b, rel_tol=1e-12)
    assert np.allclose(K @ x, b, atol=1e-9)
    assert hist[-1] <= 1e-12
    with pytest.raises(ConvergenceError) as exc:
        pcg(K, b, rel_tol=1e-14, max_iter=3)
    assert len(exc.value.history) == 4


# --- alternating minimization ------------------------------------------------------------


def _monotone(history):
    scale = abs(history[0].total)
    return all(b.total <= a.total + 1e-10 * scale for a, b in zip(history, history[1:]))


def test_altmin_subthreshold_affine_one_iteration():
    m = uniform_mesh(6)
    res = alt_minimize(m, affine(0.1 * np.eye(2)), A0, A1, P, DamageField.zeros(m))
    assert res.iterations == 1 and not res.chi.chi.any()
    assert _monotone(res.history)


def test_altmin_phases_agree_stabilizes_quickly():
    m = uniform_mesh(5)
    p1 = RegimeParams(1.0, 0.1, 1.0, 0.1, math.radians(30))
    bc = affine([[3.0, 0.0], [0.0, -1.0]])
    res = alt_minimize(m, bc, A1, A1, p1, DamageField.zeros(m))
    assert res.iterations <= 2 and _monotone(res.history)


@pytest.mark.parametrize("seed", range(4))
def test_altmin_history_monotone_from_random_start(seed):
    rng = np.random.default_rng(seed)
    m = uniform_mesh(6)
    bc = lambda Pt: np.column_stack([4 * Pt[:, 0] * Pt[:, 1], -3 * Pt[:, 0]])
    res = alt_minimize(m, bc, A0, A1, P, DamageField(m, rng.random(m.n_triangles) < 0.5))
    assert _monotone(res.history)


def test_altmin_from_pair_never_exceeds_it():
    m = stripe_mesh((1, 0), (0.25, 0.25), 0.125, 1.0)
    chi = DamageField.from_tags(m)
    bc = affine([[2.0, 0.3], [0.0, -1.0]])
    u0 = interpolate(m, bc)
    E0 = energy(u0, chi, A0, A1, P).total
    res = alt_minimize(m, u0, A0, A1, P, chi, u_init=u0)
    assert res.history[0].total == pytest.approx(E0)
    assert res.history[-1].total <= E0 + 1e-12 and _monotone(res.history)
