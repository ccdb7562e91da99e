"""Explicit recovery sequences ``(mesh, u_eps, chi_eps)`` and their predicted limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .densities import (
    Hooke,
    RegimeParams,
    Sym2,
    as_vec,
    h as h_density,
    is_infinite,
    phi,
    quad_form,
    wbar,
)
from .errors import ParameterError, RegimeError, UnsupportedModeError
from .fem import DamageField, DisplacementField, EnergyBreakdown, energy, interpolate
from .mesh import (
    Triangulation,
    _bisect,
    _rect_grid,
    covering_frame,
    double_stripe_mesh,
    jump_strip_mesh,
    restrict,
    stripe_mesh,
    uniform_mesh,
)


@dataclass(frozen=True, eq=False)
class RecoveryOutput:
    """A recovery pair with everything needed to evaluate its energy.

    ``weights`` (optional) are per-triangle multiplicities; ``clip`` says
    whether the energy is integrated over the unit square only.
    """

    mesh: Triangulation
    u: DisplacementField
    chi: DamageField
    predicted_limit: float
    predicted_rate_note: str
    A0: Hooke
    A1: Hooke
    params: RegimeParams
    weights: Optional[np.ndarray] = None
    clip: bool = True
    info: Dict[str, object] = field(default_factory=dict)

    def energy(self) -> EnergyBreakdown:
        return energy(self.u, self.chi, self.A0, self.A1, self.params, self.clip, self.weights)


def _pitch_count(h: float, omega_factor: float) -> int:
    # uniform squares of side 1/n have edges 1/n and sqrt(2)/n
    n = max(1, int(math.floor(1.0 / h * (1 + 1e-12))))
    if math.sqrt(2.0) / n > omega_factor * h * (1 + 1e-9):
        raise ParameterError("h too large for a uniform unit-square mesh")
    return n


def _gauss_square(fn: Callable[[np.ndarray], np.ndarray], order: int = 24, cells: int = 8) -> float:
    x, w = np.polynomial.legendre.leggauss(order)
    pts = []
    wts = []
    for i in range(cells):
        for j in range(cells):
            xs = (i + 0.5 * (x + 1)) / cells
            ys = (j + 0.5 * (x + 1)) / cells
            X, Y = np.meshgrid(xs, ys)
            pts.append(np.column_stack([X.ravel(), Y.ravel()]))
            wts.append(np.outer(w, w).ravel() / (4 * cells * cells))
    P = np.vstack(pts)
    return float(np.sum(np.concatenate(wts) * fn(P)))


def _fd_strain(v: Callable[[np.ndarray], np.ndarray], step: float = 1e-6):
    def strain(P):
        ex = np.array([step, 0.0])
        ey = np.array([0.0, step])
        dx = (np.asarray(v(P + ex)) - np.asarray(v(P - ex))) / (2 * step)
        dy = (np.asarray(v(P + ey)) - np.asarray(v(P - ey))) / (2 * step)
        return np.column_stack([dx[:, 0], dy[:, 1], 0.5 * (dy[:, 0] + dx[:, 1])])
    return strain


def elastic_limit(v: Callable[[np.ndarray], np.ndarray], A1: Hooke,
                  strain: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
    """``1/2 int_(0,1)^2 A1 e(v):e(v)`` by tensor Gauss quadrature.

    ``strain`` returns plain entries ``(e_xx, e_yy, e_xy)`` per point; when
    omitted it is approximated by central differences of ``v``.
    """
    strain = strain or _fd_strain(v)
    M = A1.matrix
    s2 = math.sqrt(2.0)

    def dens(P):
        e = np.asarray(strain(P), dtype=float)
        ev = np.column_stack([e[:, 0], e[:, 1], s2 * e[:, 2]])
        return 0.5 * np.einsum("mi,ij,mj->m", ev, M, ev)
    return _gauss_square(dens)


def recover_elastic(v: Callable[[np.ndarray], np.ndarray], params: RegimeParams, A1: Hooke,
                    A0: Optional[Hooke] = None, *,
                    strain: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    predicted: Optional[float] = None) -> RecoveryOutput:
    """Lagrange interpolation of ``v`` on a uniform mesh with pitch in ``[h, 2h)``; no damage."""
    n = _pitch_count(params.h, params.omega_factor)
    mesh = uniform_mesh(n)
    u = interpolate(mesh, v)
    limit = elastic_limit(v, A1, strain) if predicted is None else float(predicted)
    return RecoveryOutput(mesh, u, DamageField.zeros(mesh), limit,
                          "O(h): interpolation error in H^1 is bounded by C h |D^2 v|",
                          A0 or A1, A1, params, None, True, {"n": n, "pitch": 1.0 / n})


# ---------------------------------------------------------------------------
# Trivial regime: cut-off frames
# ---------------------------------------------------------------------------


def _trivial_geometry(N: int, params: RegimeParams):
    eps, eta, h = params.eps, params.eta, params.h
    delta = math.sqrt(eps * (eta + h))
    if not delta < 1.0 / (2 * N):
        raise ParameterError(f"delta = {delta:.4g} must be below 1/(2N) = {1 / (2 * N):.4g}")
    Ne = int(math.floor(1.0 / (delta * N)))
    cell = 1.0 / (Ne * N)
    n_ref = 0
    while h / delta <= math.sqrt(2.0) ** (-(n_ref + 1)):
        n_ref += 1
    return delta, Ne, cell, n_ref


def _cutoff_block(nodes: int, u_val: np.ndarray) -> np.ndarray:
    """Nodal values on a ``nodes x nodes`` vertex grid: 0 on the outer ring, ``u_val`` inside."""
    vals = np.zeros((nodes, nodes, 2))
    vals[1:-1, 1:-1] = u_val
    return vals.reshape(-1, 2)


def recover_trivial(values, params: RegimeParams, A0: Hooke, A1: Hooke, *,
                    expand: Optional[bool] = None, max_full_triangles: int = 400_000) -> RecoveryOutput:
    """Cut-off recovery of a piecewise-constant field on an ``N x N`` grid of squares.

    Each square ``Q_i`` is split into ``N_eps^2`` cells of side ``l`` in
    ``[delta, 2 delta)``, ``delta = sqrt(eps (eta + h))``; the field equals
    ``u_i`` at interior cell vertices and 0 on ``dQ_i``, and the ring of
    cells along ``dQ_i`` is damaged.  Cells are bisected down to the scale h.

    With ``expand=False`` the mesh holds one representative per cell class
    (corner, edge, interior) of every square, with per-triangle
    multiplicities in ``weights``; energies are then exactly those of the
    full mesh.  By default the full mesh is built when it has at most
    ``max_full_triangles`` triangles.
    """
    U = np.asarray(values, dtype=float)
    if U.ndim != 3 or U.shape[0] != U.shape[1] or U.shape[2] != 2:
        raise ParameterError("values must have shape (N, N, 2)")
    N = U.shape[0]
    delta, Ne, cell, n_ref = _trivial_geometry(N, params)
    n_full = 2 * (N * Ne) ** 2 * 2 ** n_ref
    if expand is None:
        expand = n_full <= max_full_triangles

    if expand:
        xs = cell * np.arange(N * Ne + 1)
        V, T = _rect_grid(xs, xs)
        nodes = N * Ne + 1
        vals = np.zeros((nodes, nodes, 2))
        for i in range(N):          # i: x index, j: y index
            for j in range(N):
                vals[j * Ne + 1:(j + 1) * Ne, i * Ne + 1:(i + 1) * Ne] = U[i, j]
        vals = vals.reshape(-1, 2)
        # damaged ring: cells touching the boundary of their square
        ci = np.arange(N * Ne) % Ne
        ring1d = (ci == 0) | (ci == Ne - 1)
        cx, cy = np.meshgrid(ring1d, ring1d)
        tags = np.repeat((cx | cy).ravel(), 2).astype(np.int8)
        weights = None
    else:
        # 3x3 representative cells per square: corners (1), edges (Ne-2), interior ((Ne-2)^2)
        Vs, Ts, vs, tg, wt = [], [], [], [], []
        mult = np.array([1.0, Ne - 2.0, 1.0])
        nv = 0
        for i in range(N):
            for j in range(N):
                xs = i / N + cell * np.arange(4)
                ys = j / N + cell * np.arange(4)
                V, T = _rect_grid(xs, ys)
                Vs.append(V)
                Ts.append(T + nv)
                nv += len(V)
                vs.append(_cutoff_block(4, U[i, j]))
                cx, cy = np.meshgrid(np.arange(3), np.arange(3))
                ring = ((cx != 1) | (cy != 1)).ravel()
                w = (mult[cx] * mult[cy]).ravel()
                tg.append(np.repeat(ring, 2))
                wt.append(np.repeat(w, 2))
        V, T = np.vstack(Vs), np.vstack(Ts)
        vals = np.vstack(vs)
        tags = np.concatenate(tg).astype(np.int8)
        weights = np.concatenate(wt)

    # refinement is local to each triangle; new vertices inherit the affine values
    for _ in range(n_ref):
        V, T, tags, parents = _bisect(V, T, tags)
        vals = np.vstack([vals, 0.5 * (vals[parents[:, 0]] + vals[parents[:, 1]])])
        if weights is not None:
            weights = np.repeat(weights, 2)
    mesh = Triangulation.build(V, T, tags)
    u = DisplacementField(mesh, vals)
    chi = DamageField.from_tags(mesh)
    a_hi = A0.bounds[1]
    umax2 = float(np.max(np.sum(U * U, axis=2)))
    C = max(4.0 * a_hi * N * umax2, 8.0 * N * params.kappa)
    bound = params.eta / delta + delta / params.eps
    info = {"delta": delta, "N_eps": Ne, "cell": cell, "refine_steps": n_ref, "expanded": expand,
            "full_triangles": n_full, "bound_constant": C, "bound": C * bound,
            "frame_area_bound": 8 * N * delta}
    note = f"energy <= C (eta/delta + delta/eps) with C = {C:.6g}"
    return RecoveryOutput(mesh, u, chi, 0.0, note, A0, A1, params, weights, False, info)


# ---------------------------------------------------------------------------
# Hencky regime: laminations
# ---------------------------------------------------------------------------


def _sawtooth(s: np.ndarray, period: float, theta: float) -> np.ndarray:
    """Continuous, ``period``-periodic: slope ``(1-theta)/theta`` on the damaged part, -1 elsewhere."""
    k = np.floor(s / period + 1e-12)
    r = s - k * period
    return np.where(r <= theta * period, (1 - theta) / theta * r, period - r)


def rank_one_factor(tau: Sym2) -> Tuple[np.ndarray, np.ndarray]:
    """Factor a symmetric matrix with ``det <= 0`` as ``a ⊙ b`` with ``|b| = 1``."""
    w, Q = np.linalg.eigh(tau.matrix())
    t1, t2 = float(w[1]), float(w[0])  # t1 >= 0 >= t2
    b1, b2 = Q[:, 1], Q[:, 0]
    if t1 * t2 > 0:
        raise ParameterError("matrix is definite: no rank-one symmetric factorization")
    scale = max(abs(t1), abs(t2))
    if scale == 0:
        return np.zeros(2), np.array([1.0, 0.0])
    if abs(t2) <= 1e-14 * scale:
        return t1 * b1, b1
    if abs(t1) <= 1e-14 * scale:
        return t2 * b2, b2
    d = math.sqrt(abs(t1) / abs(t2))
    bb = d * b1 + b2
    aa = (t1 / d) * b1 + t2 * b2
    n = float(np.linalg.norm(bb))
    return aa * n, bb / n


def _lamination_counts(theta: float, L: float, h: float) -> Tuple[int, float]:
    m = int(math.floor(L * theta / h * (1 + 1e-12)))
    if m < 1:
        raise ParameterError("damaged fraction too small for the mesh size (need theta*L >= h)")
    l = L / m
    if (1 - theta) * l < h * (1 - 1e-12):
        raise ParameterError("sound stripe narrower than h")
    return m, l


def recover_lamination(xi, params: RegimeParams, A0: Hooke, A1: Hooke, *,
                       window: Optional[Tuple[int, int]] = (1, 1)) -> RecoveryOutput:
    """Laminated recovery of the affine field ``xi x`` in the Hencky regime.

    Parameters
    ----------
    xi : Sym2 or array-like
        Target strain.
    window : (int, int) or None
        Evaluate on this many whole periods by rows of the lamination that
        covers the unit square (energy densities are then exact averages);
        ``None`` builds the covering square and clips to the unit square.
    """
    alpha = params.alpha
    if is_infinite(alpha) or not alpha > 0:
        raise RegimeError("laminations need 0 < alpha < inf")
    xi_s = Sym2.from_vec(as_vec(xi))
    W = wbar(A0, A1, xi_s, alpha, params.kappa)
    tau = W.tau
    kappa, eps, h = params.kappa, params.eps, params.h
    X = xi_s.matrix()

    def affine(P):
        return P @ X.T

    if tau.norm() <= 1e-9 * max(1.0, xi_s.norm()):
        n = _pitch_count(h, params.omega_factor)
        mesh = uniform_mesh(n)
        u = interpolate(mesh, affine)
        return RecoveryOutput(mesh, u, DamageField.zeros(mesh), W.value, "exact: no damage",
                              A0, A1, params, None, True, {"case": 0, "tau": tau, "wbar": W.value})

    info: Dict[str, object] = {"tau": tau, "wbar": W.value}
    if tau.det <= 0:
        a, b = rank_one_factor(tau)
        hv = h_density(A0, tau, "closed_form" if A0.is_isotropic else "numeric")
        Delta = max(2 * kappa * alpha * (hv - quad_form(A0, tau)), 0.0)
        Theta = (math.sqrt(2 * alpha * kappa * hv) + math.sqrt(Delta)) / (2 * kappa)
        theta = eps * Theta
        if not theta < 1:
            raise ParameterError(f"damaged fraction {theta:.4g} >= 1; eps too large")
        origin, L = covering_frame(b)
        m, l = _lamination_counts(theta, L, h)
        wp, wr = (None, None) if window is None else window
        mesh = stripe_mesh(b, (theta * l, (1 - theta) * l), h, L, origin=origin,
                           n_periods=wp, n_rows=wr)
        if window is None:
            mesh = restrict(mesh)

        def v(P):
            s = (P - origin) @ b
            return affine(P) + _sawtooth(s, l, theta)[:, None] * a[None, :]

        info.update(case=1, a=a, b=b, Theta=Theta, theta=theta, periods=m, period=l)
    else:
        if not A0.is_isotropic:
            raise UnsupportedModeError("definite plastic strain needs an isotropic A0")
        lam, mu = A0.lame
        w, Q = np.linalg.eigh(tau.matrix())
        b1, b2 = Q[:, 1], np.array([-Q[1, 1], Q[0, 1]])
        t1 = float(b1 @ tau.matrix() @ b1)
        t2 = float(b2 @ tau.matrix() @ b2)
        a_ = lam + 2 * mu
        th1 = eps / (2 * kappa) * math.sqrt(2 * kappa * alpha * a_) * abs(t1)
        th2 = eps / (2 * kappa) * math.sqrt(2 * kappa * alpha * a_) * abs(t2)
        if not (th1 < 1 and th2 < 1):
            raise ParameterError("damaged fractions >= 1; eps too large")
        origin, L = covering_frame(b1)
        m1, l1 = _lamination_counts(th1, L, h)
        m2, l2 = _lamination_counts(th2, L, h)
        mesh = double_stripe_mesh(b1, (th1 * l1, (1 - th1) * l1), (th2 * l2, (1 - th2) * l2), L,
                                  cross_width=h, origin=origin, n_periods=window)
        if window is None:
            mesh = restrict(mesh)

        def v(P):
            s1 = (P - origin) @ b1
            s2 = (P - origin) @ b2
            return (affine(P) + t1 * _sawtooth(s1, l1, th1)[:, None] * b1[None, :]
                    + t2 * _sawtooth(s2, l2, th2)[:, None] * b2[None, :])

        info.update(case=2, b1=b1, b2=b2, tau_eigs=(t1, t2), thetas=(th1, th2),
                    periods=(m1, m2), period=(l1, l2))
    u = interpolate(mesh, v)
    chi = DamageField.from_tags(mesh)
    area = float(mesh.areas.sum()) if window is not None else 1.0
    info["window_area"] = area
    return RecoveryOutput(mesh, u, chi, W.value * area, "O(eps): lamination energy density minus Wbar",
                          A0, A1, params, None, window is None, info)


# ---------------------------------------------------------------------------
# Jumps: fracture and cohesive regimes
# ---------------------------------------------------------------------------


def jump_amplitude(jump, A0: Hooke, params: RegimeParams) -> Tuple[float, float]:
    """Return ``(t, l)`` with ``t = |sqrt(A0) [u] ⊙ e2|`` and the strip amplitude ``l``."""
    nu = np.array([0.0, 1.0])
    J = np.asarray(jump, dtype=float)
    t = math.sqrt(max(quad_form(A0, Sym2.sym_dyad(J, nu)), 0.0))
    s0 = math.sin(params.theta0)
    alpha, beta = params.alpha, params.beta
    if is_infinite(beta) or not beta > 0:
        raise RegimeError("jump recovery needs 0 < beta < inf")
    if is_infinite(alpha):
        raise RegimeError("jump recovery needs alpha < inf")
    if alpha > 0:
        l = max(s0, math.sqrt(alpha / (2 * params.kappa)) * t / beta)
    else:
        l = s0
    return t, l


def recover_jump(jump, params: RegimeParams, A0: Hooke, A1: Hooke) -> RecoveryOutput:
    """Strip recovery of the step ``u = 0`` below ``y = 1/2``, ``u = jump`` above.

    The band has height ``h l`` with ``l = max(sin theta0, sqrt(alpha/(2 kappa)) t / beta)``
    (``l = sin theta0`` when alpha = 0) and is tiled by isosceles triangles
    with base angles ``theta0``.
    """
    J = np.asarray(jump, dtype=float)
    if not np.any(J):
        raise ParameterError("jump must be non-zero")
    t, l = jump_amplitude(J, A0, params)
    h, th0 = params.h, params.theta0
    bw = 0.5 * h * l
    layer = 2 * h * l / math.tan(th0)
    mesh = jump_strip_mesh(bw, layer, h=h, theta0=th0, omega_factor=params.omega_factor)
    upper = mesh.vertices[:, 1] >= 0.5 + bw * (1 - 1e-9)
    vals = np.where(upper[:, None], J[None, :], 0.0)
    u = DisplacementField(mesh, vals)
    chi = DamageField.from_tags(mesh)
    if params.alpha > 0:
        pred = phi(t, params.alpha, params.beta, params.kappa, th0)
    else:
        pred = float(params.beta) * params.kappa * math.sin(th0)
    info = {"t": t, "amplitude": l, "band_halfwidth": bw, "layer_height": layer}
    return RecoveryOutput(mesh, u, chi, pred, "converges as eta/eps -> alpha and h/eps -> beta",
                          A0, A1, params, None, True, info)
