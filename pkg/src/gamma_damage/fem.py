"""P1 finite elements for the damage energy.

All integrands are constant per triangle, so integration is exact: a
triangle contributes its density times its area (optionally clipped to the
unit square, optionally multiplied by a weight).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .densities import Hooke, RegimeParams, Sym2
from .errors import ConvergenceError, GeometryError, UsageError
from .mesh import UNIT_SQUARE, Triangulation, clipped_areas

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class DisplacementField:
    mesh: Triangulation
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1, 2)
        if len(v) != self.mesh.n_vertices:
            raise UsageError("displacement needs one 2-vector per vertex")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "DisplacementField") -> "DisplacementField":
        _same_mesh(self.mesh, other.mesh)
        return DisplacementField(self.mesh, self.values + other.values)


@dataclass(frozen=True, eq=False)
class DamageField:
    mesh: Triangulation
    chi: np.ndarray

    def __post_init__(self):
        c = np.array(self.chi, dtype=bool).reshape(-1)
        if len(c) != self.mesh.n_triangles:
            raise UsageError("damage field needs one flag per triangle")
        c.setflags(write=False)
        object.__setattr__(self, "chi", c)

    @classmethod
    def zeros(cls, mesh: Triangulation) -> "DamageField":
        return cls(mesh, np.zeros(mesh.n_triangles, dtype=bool))

    @classmethod
    def ones(cls, mesh: Triangulation) -> "DamageField":
        return cls(mesh, np.ones(mesh.n_triangles, dtype=bool))

    @classmethod
    def from_tags(cls, mesh: Triangulation) -> "DamageField":
        return cls(mesh, mesh.tags.astype(bool))


@dataclass(frozen=True)
class EnergyBreakdown:
    sound_elastic: float
    damaged_elastic: float
    dissipation: float
    total: float

    def as_dict(self) -> dict:
        return {"sound_elastic": self.sound_elastic, "damaged_elastic": self.damaged_elastic,
                "dissipation": self.dissipation, "total": self.total}


def _same_mesh(a: Triangulation, b: Triangulation) -> None:
    if a is not b:
        raise UsageError("fields live on different meshes")


def fields_to_json(u: DisplacementField, chi: DamageField) -> str:
    _same_mesh(u.mesh, chi.mesh)
    disp = ",".join(f"[{x:.17g},{y:.17g}]" for x, y in u.values)
    return '{"displacement":[' + disp + '],"chi":' + json.dumps(chi.chi.astype(int).tolist()) + "}"


def fields_from_json(mesh: Triangulation, text: str) -> Tuple[DisplacementField, DamageField]:
    d = json.loads(text)
    return DisplacementField(mesh, d["displacement"]), DamageField(mesh, d["chi"])


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def shape_gradients(mesh: Triangulation) -> np.ndarray:
    """Gradients of the barycentric coordinates, shape ``(m, 3, 2)``."""
    P = mesh.vertices[mesh.triangles]
    area2 = 2.0 * mesh.areas
    if np.any(area2 <= 0):
        bad = int(np.nonzero(area2 <= 0)[0][0])
        raise GeometryError(f"degenerate triangle {bad}")
    x, y = P[..., 0], P[..., 1]
    G = np.empty(P.shape)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        G[:, a, 0] = (y[:, b] - y[:, c]) / area2
        G[:, a, 1] = (x[:, c] - x[:, b]) / area2
    return G


def strain_operator(mesh: Triangulation) -> np.ndarray:
    """Per-triangle ``B`` with ``e = B @ (u0x, u0y, u1x, u1y, u2x, u2y)``, shape ``(m, 3, 6)``."""
    G = shape_gradients(mesh)
    B = np.zeros((mesh.n_triangles, 3, 6))
    B[:, 0, 0::2] = G[..., 0]
    B[:, 1, 1::2] = G[..., 1]
    B[:, 2, 0::2] = G[..., 1] / SQRT2
    B[:, 2, 1::2] = G[..., 0] / SQRT2
    return B


def strains(u: DisplacementField) -> np.ndarray:
    """Symmetric gradients in orthonormal coordinates, shape ``(m, 3)``."""
    G = shape_gradients(u.mesh)
    U = u.values[u.mesh.triangles]  # (m, 3, 2)
    grad = np.einsum("mai,maj->mij", U, G)  # grad[i, j] = d u_i / d x_j
    return np.column_stack([grad[:, 0, 0], grad[:, 1, 1],
                            (grad[:, 0, 1] + grad[:, 1, 0]) / SQRT2])


def sym_grad(u: DisplacementField, triangle_index: int) -> Sym2:
    if not 0 <= triangle_index < u.mesh.n_triangles:
        raise IndexError(triangle_index)
    tri = u.mesh.triangles[triangle_index]
    P = u.mesh.vertices[tri]
    M = np.column_stack([P[1] - P[0], P[2] - P[0]])
    if abs(np.linalg.det(M)) <= 1e-300:
        raise GeometryError(f"degenerate triangle {triangle_index}")
    dU = np.column_stack([u.values[tri[1]] - u.values[tri[0]], u.values[tri[2]] - u.values[tri[0]]])
    grad = dU @ np.linalg.inv(M)
    return Sym2.from_matrix(0.5 * (grad + grad.T))


def interpolate(mesh: Triangulation, v: Callable[[np.ndarray], np.ndarray]) -> DisplacementField:
    """Nodal (Lagrange) interpolation of a vectorized ``v: (n, 2) -> (n, 2)``."""
    return DisplacementField(mesh, np.asarray(v(mesh.vertices), dtype=float).reshape(-1, 2))


def integration_weights(mesh: Triangulation, clip_to_unit_square: bool = False,
                        weights: Optional[np.ndarray] = None) -> np.ndarray:
    w = clipped_areas(mesh, UNIT_SQUARE) if clip_to_unit_square else np.array(mesh.areas)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != w.shape or np.any(weights < 0):
            raise UsageError("weights need one non-negative entry per triangle")
        w = w * weights
    return w


# ---------------------------------------------------------------------------
# Energy and pointwise damage
# ---------------------------------------------------------------------------


def _densities(e: np.ndarray, A0: Hooke, A1: Hooke, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    q0 = 0.5 * eta * np.einsum("mi,ij,mj->m", e, A0.matrix, e)
    q1 = 0.5 * np.einsum("mi,ij,mj->m", e, A1.matrix, e)
    return q0, q1


def energy(u: DisplacementField, chi: DamageField, A0: Hooke, A1: Hooke, params: RegimeParams,
           clip_to_unit_square: bool = False, weights: Optional[np.ndarray] = None) -> EnergyBreakdown:
    """Exact discrete energy of ``(u, chi)``.

    ``weights`` multiplies each triangle's area; it lets one triangle stand
    for several congruent copies carrying the same strain.
    """
    _same_mesh(u.mesh, chi.mesh)
    w = integration_weights(u.mesh, clip_to_unit_square, weights)
    q0, q1 = _densities(strains(u), A0, A1, params.eta)
    c = chi.chi
    damaged = float(np.sum(w[c] * q0[c]))
    sound = float(np.sum(w[~c] * q1[~c]))
    diss = float(params.kappa / params.eps * np.sum(w[c]))
    return EnergyBreakdown(sound, damaged, diss, sound + damaged + diss)


def optimal_chi(u: DisplacementField, A0: Hooke, A1: Hooke, params: RegimeParams) -> DamageField:
    """Damage exactly where it lowers the local density; ties stay sound."""
    q0, q1 = _densities(strains(u), A0, A1, params.eta)
    return DamageField(u.mesh, q1 > q0 + params.kappa / params.eps)


# ---------------------------------------------------------------------------
# Elastic solve
# ---------------------------------------------------------------------------


Dirichlet = Union[Callable[[np.ndarray], np.ndarray], Mapping[int, Sequence[float]],
                  Tuple[np.ndarray, np.ndarray], DisplacementField]


def dirichlet_data(mesh: Triangulation, dirichlet: Dirichlet) -> Tuple[np.ndarray, np.ndarray]:
    """Normalize boundary data to ``(vertex_indices, values)``.

    Accepts a vectorized function (evaluated on the boundary vertices), a
    mapping vertex -> 2-vector, an ``(indices, values)`` pair, or a
    displacement field whose boundary trace is used.
    """
    if isinstance(dirichlet, DisplacementField):
        idx = mesh.boundary_vertices
        return idx, dirichlet.values[idx]
    if callable(dirichlet):
        idx = mesh.boundary_vertices
        return idx, np.asarray(dirichlet(mesh.vertices[idx]), dtype=float).reshape(-1, 2)
    if isinstance(dirichlet, Mapping):
        idx = np.array(sorted(dirichlet), dtype=np.int64)
        return idx, np.array([dirichlet[i] for i in idx], dtype=float).reshape(-1, 2)
    idx, vals = dirichlet
    return np.asarray(idx, dtype=np.int64), np.asarray(vals, dtype=float).reshape(-1, 2)


def stiffness_matrix(mesh: Triangulation, chi: np.ndarray, A0: Hooke, A1: Hooke, eta: float,
                     area_weights: np.ndarray) -> sp.csr_matrix:
    B = strain_operator(mesh)
    C = np.where(chi[:, None, None], eta * A0.matrix, A1.matrix)
    Ke = np.einsum("m,mai,mab,mbj->mij", area_weights, B, C, B)
    dofs = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.n_vertices
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def pcg(A: sp.spmatrix, b: np.ndarray, x0: Optional[np.ndarray] = None, rel_tol: float = 1e-10,
        max_iter: Optional[int] = None) -> Tuple[np.ndarray, List[float]]:
    """Jacobi-preconditioned conjugate gradients.

    Returns the solution and the history of relative residuals
    ``|b - A x| / |b|``.  Raises :class:`ConvergenceError` when the
    iteration cap is reached first.
    """
    n = len(b)
    if max_iter is None:
        max_iter = max(1000, 20 * n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), [0.0]
    dinv = 1.0 / A.diagonal()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    hist = [float(np.linalg.norm(r)) / bnorm]
    for _ in range(max_iter):
        if hist[-1] <= rel_tol:
            return x, hist
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise ConvergenceError("matrix is not positive definite on the search space",
                                   best=x, history=hist)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        hist.append(float(np.linalg.norm(r)) / bnorm)
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if hist[-1] <= rel_tol:
        return x, hist
    raise ConvergenceError(f"PCG stalled at relative residual {hist[-1]:.3e} after {max_iter} iterations",
                           best=x, history=hist)


def solve_elastic(mesh: Triangulation, chi: DamageField, dirichlet: Dirichlet, A0: Hooke, A1: Hooke,
                  params: RegimeParams, rel_tol: float = 1e-10, *, clip_to_unit_square: bool = False,
                  weights: Optional[np.ndarray] = None, u0: Optional[DisplacementField] = None,
                  max_iter: Optional[int] = None, return_history: bool = False):
    """Minimize the elastic part of the energy at fixed damage under Dirichlet data.

    Boundary values are eliminated exactly.  ``u0`` warm-starts the
    iteration; the energy then never exceeds that of ``u0`` (with ``u0``'s
    boundary values replaced by the data).
    """
    _same_mesh(mesh, chi.mesh)
    idx, vals = dirichlet_data(mesh, dirichlet)
    w = integration_weights(mesh, clip_to_unit_square, weights)
    K = stiffness_matrix(mesh, chi.chi, A0, A1, params.eta, w)
    n = 2 * mesh.n_vertices
    fixed = np.zeros(n, dtype=bool)
    ubar = np.zeros(n)
    fixed[2 * idx] = fixed[2 * idx + 1] = True
    ubar[2 * idx], ubar[2 * idx + 1] = vals[:, 0], vals[:, 1]
    free = np.nonzero(~fixed)[0]
    u = ubar.copy()
    hist: List[float] = [0.0]
    if len(free):
        Kff = K[free][:, free]
        rhs = -(K[free] @ ubar)
        x0 = None if u0 is None else u0.values.reshape(-1)[free]
        if np.any(Kff.diagonal() <= 0):
            raise ConvergenceError("free degrees of freedom without stiffness")
        x, hist = pcg(Kff, rhs, x0, rel_tol, max_iter)
        u[free] = x
    field_ = DisplacementField(mesh, u.reshape(-1, 2))
    return (field_, hist) if return_history else field_


@dataclass
class AltMinResult:
    u: DisplacementField
    chi: DamageField
    history: List[EnergyBreakdown]
    iterations: int
    residual_histories: List[List[float]] = field(default_factory=list)

    def __iter__(self):
        return iter((self.u, self.chi, self.history))


def alt_minimize(mesh: Triangulation, dirichlet: Dirichlet, A0: Hooke, A1: Hooke, params: RegimeParams,
                 chi_init: DamageField, max_iters: int = 50, energy_tol: float = 1e-10, *,
                 u_init: Optional[DisplacementField] = None, clip_to_unit_square: bool = False,
                 rel_tol: float = 1e-10, max_cg_iter: Optional[int] = None) -> AltMinResult:
    """Alternate elastic solves and pointwise damage updates.

    The history holds the energy after every half-step (preceded by the
    initial pair when ``u_init`` is given).  Iteration stops when the damage
    pattern is unchanged or an iteration lowers the energy by less than
    ``energy_tol`` times the first recorded energy.
    """
    _same_mesh(mesh, chi_init.mesh)
    data = dirichlet_data(mesh, dirichlet)

    def E(u, c):
        return energy(u, c, A0, A1, params, clip_to_unit_square)

    history: List[EnergyBreakdown] = []
    chi = chi_init
    u = u_init
    if u_init is not None:
        _same_mesh(mesh, u_init.mesh)
        history.append(E(u_init, chi))
    residuals: List[List[float]] = []
    it = 0
    while it < max_iters:
        it += 1
        start = history[-1].total if history else math.inf
        u, res = solve_elastic(mesh, chi, data, A0, A1, params, rel_tol,
                               clip_to_unit_square=clip_to_unit_square, u0=u,
                               max_iter=max_cg_iter, return_history=True)
        residuals.append(res)
        history.append(E(u, chi))
        new_chi = optimal_chi(u, A0, A1, params)
        changed = bool(np.any(new_chi.chi != chi.chi))
        chi = new_chi
        history.append(E(u, chi))
        scale = max(abs(history[0].total), 1e-300)
        if not changed or (start - history[-1].total) < energy_tol * scale:
            break
    return AltMinResult(u, chi, history, it, residuals)
