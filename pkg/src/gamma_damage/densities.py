"""Scalar densities of the damage energy and of its Gamma-limits.

Symmetric 2x2 matrices are handled in the orthonormal coordinates
``(xx, yy, sqrt(2)*xy)`` so that the Frobenius product is the plain dot
product of 3-vectors.  Stiffness tensors are 3x3 SPD matrices in the same
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, ParameterError, RegimeError, UnsupportedModeError

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Symmetric matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sym2:
    """Symmetric 2x2 matrix with a single stored off-diagonal entry."""

    xx: float
    yy: float
    xy: float = 0.0

    @classmethod
    def from_matrix(cls, m) -> "Sym2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ParameterError(f"expected a 2x2 matrix, got shape {m.shape}")
        return cls(float(m[0, 0]), float(m[1, 1]), float(0.5 * (m[0, 1] + m[1, 0])))

    @classmethod
    def from_vec(cls, v) -> "Sym2":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2] / SQRT2))

    @classmethod
    def diag(cls, a: float, b: float) -> "Sym2":
        return cls(float(a), float(b), 0.0)

    @classmethod
    def identity(cls) -> "Sym2":
        return cls(1.0, 1.0, 0.0)

    @classmethod
    def sym_dyad(cls, a, b) -> "Sym2":
        """Return a ⊙ b = (a ⊗ b + b ⊗ a) / 2."""
        return cls(a[0] * b[0], a[1] * b[1], 0.5 * (a[0] * b[1] + a[1] * b[0]))

    def vec(self) -> np.ndarray:
        return np.array([self.xx, self.yy, SQRT2 * self.xy])

    def matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    @property
    def trace(self) -> float:
        return self.xx + self.yy

    @property
    def det(self) -> float:
        return self.xx * self.yy - self.xy * self.xy

    def eigenvalues(self) -> Tuple[float, float]:
        """Ordered eigenvalues ``(l1, l2)`` with ``l1 <= l2``."""
        return _ordered_eigs(self.xx, self.yy, self.xy)

    def dot(self, other: "Sym2") -> float:
        return self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def __add__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)

    def __sub__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)

    def __neg__(self) -> "Sym2":
        return Sym2(-self.xx, -self.yy, -self.xy)

    def __mul__(self, s: float) -> "Sym2":
        return Sym2(s * self.xx, s * self.yy, s * self.xy)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "Sym2":
        return Sym2(self.xx / s, self.yy / s, self.xy / s)


SymLike = Union[Sym2, Sequence[float], np.ndarray]


def _ordered_eigs(a: float, b: float, c: float) -> Tuple[float, float]:
    mean = 0.5 * (a + b)
    rad = math.hypot(0.5 * (a - b), c)
    lo, hi = mean - rad, mean + rad
    # recover the smaller root without cancellation when possible
    det = a * b - c * c
    if abs(hi) > abs(lo) and hi != 0.0:
        lo = det / hi
    elif lo != 0.0:
        hi = det / lo
    return (min(lo, hi), max(lo, hi))


def as_vec(xi: SymLike) -> np.ndarray:
    """Orthonormal 3-vector of a symmetric matrix.

    Accepts a :class:`Sym2`, a 2x2 array, or a ``(xx, yy, xy)`` triple
    (plain entries, not orthonormal coordinates).
    """
    if isinstance(xi, Sym2):
        return xi.vec()
    arr = np.asarray(xi, dtype=float)
    if arr.shape == (2, 2):
        return Sym2.from_matrix(arr).vec()
    if arr.shape == (3,):
        return np.array([arr[0], arr[1], SQRT2 * arr[2]])
    raise ParameterError(f"cannot interpret shape {arr.shape} as a symmetric matrix")


def as_sym(xi: SymLike) -> Sym2:
    if isinstance(xi, Sym2):
        return xi
    return Sym2.from_vec(as_vec(xi))


# ---------------------------------------------------------------------------
# Hooke tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hooke:
    """Stiffness tensor stored as a 3x3 SPD matrix.

    Use :meth:`isotropic` or :meth:`general` to build one.  ``lame`` is set
    only for the isotropic variant.
    """

    entries: Tuple[float, ...]
    lame: Optional[Tuple[float, float]] = None
    _eig: Tuple[float, float] = field(default=(0.0, 0.0), repr=False, compare=False)

    @classmethod
    def isotropic(cls, lam: float, mu: float) -> "Hooke":
        if not (lam > 0 and mu > 0):
            raise ParameterError(f"Lame parameters must be positive, got ({lam}, {mu})")
        a = lam + 2.0 * mu
        m = np.array([[a, lam, 0.0], [lam, a, 0.0], [0.0, 0.0, 2.0 * mu]])
        return cls._build(m, (float(lam), float(mu)))

    @classmethod
    def general(cls, matrix) -> "Hooke":
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ParameterError("a general Hooke tensor needs a 3x3 matrix")
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-14):
            raise ParameterError("Hooke matrix must be symmetric")
        return cls._build(0.5 * (m + m.T), None)

    @classmethod
    def identity(cls) -> "Hooke":
        return cls.general(np.eye(3))

    @classmethod
    def _build(cls, m: np.ndarray, lame) -> "Hooke":
        w = np.linalg.eigvalsh(m)
        if w[0] <= 0.0:
            raise ParameterError(f"Hooke matrix is not positive definite (eigenvalues {w})")
        return cls(tuple(float(x) for x in m.ravel()), lame, (float(w[0]), float(w[-1])))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries).reshape(3, 3)

    @property
    def is_isotropic(self) -> bool:
        return self.lame is not None

    @property
    def bounds(self) -> Tuple[float, float]:
        """``(a, a')`` with ``a Id <= A <= a' Id``."""
        return self._eig

    def scaled(self, s: float) -> "Hooke":
        if self.lame is not None:
            return Hooke.isotropic(s * self.lame[0], s * self.lame[1])
        return Hooke.general(s * self.matrix)

    def to_json(self) -> dict:
        if self.lame is not None:
            return {"lambda": self.lame[0], "mu": self.lame[1]}
        return {"matrix": self.matrix.tolist()}

    @classmethod
    def from_json(cls, d) -> "Hooke":
        if isinstance(d, dict) and "lambda" in d:
            return cls.isotropic(float(d["lambda"]), float(d["mu"]))
        if isinstance(d, dict) and "matrix" in d:
            return cls.general(d["matrix"])
        if isinstance(d, dict) and "scalar" in d:
            return cls.general(float(d["scalar"]) * np.eye(3))
        raise ParameterError(f"cannot read Hooke tensor from {d!r}")


def apply_hooke(A: Hooke, xi: SymLike) -> Sym2:
    return Sym2.from_vec(A.matrix @ as_vec(xi))


def quad_form(A: Hooke, xi: SymLike) -> float:
    v = as_vec(xi)
    return float(v @ A.matrix @ v)


# ---------------------------------------------------------------------------
# Regime parameters
# ---------------------------------------------------------------------------


class Infinity:
    """The limit value +inf of a rate (alpha or beta)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (Infinity, ())


INFINITY = Infinity()
Rate = Union[float, Infinity]


def is_infinite(r: Rate) -> bool:
    return isinstance(r, Infinity)


def rate_to_json(r: Rate):
    return "inf" if is_infinite(r) else float(r)


def rate_from_json(x) -> Rate:
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return INFINITY
    return float(x)


@dataclass(frozen=True)
class RegimeParams:
    kappa: float
    eps: float
    eta: float
    h: float
    theta0: float
    omega_factor: float = 6.0
    alpha: Rate = 0.0
    beta: Rate = 0.0

    def __post_init__(self):
        for name in ("kappa", "eps", "eta", "h", "theta0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be a positive finite number, got {v}")
        if self.omega_factor < 6.0:
            raise ParameterError(f"omega_factor must be >= 6, got {self.omega_factor}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not is_infinite(v) and not (v >= 0 and math.isfinite(v)):
                raise ParameterError(f"{name} must be in [0, inf) or INFINITY, got {v}")

    @property
    def omega(self) -> float:
        return self.omega_factor * self.h

    def with_eps(self, eps: float, eta: float, h: float) -> "RegimeParams":
        return RegimeParams(self.kappa, eps, eta, h, self.theta0, self.omega_factor,
                            self.alpha, self.beta)


def _finite_positive(r: Rate, what: str) -> float:
    if is_infinite(r) or not (r > 0):
        raise RegimeError(f"{what} must lie in (0, inf), got {r!r}")
    return float(r)


# ---------------------------------------------------------------------------
# g, h and the convex set K
# ---------------------------------------------------------------------------


def _dyad_basis(phi: np.ndarray) -> np.ndarray:
    """Columns e1⊙k, e2⊙k (orthonormal coordinates) for k = (cos phi, sin phi).

    Shape ``(len(phi), 3, 2)``.
    """
    c, s = np.cos(phi), np.sin(phi)
    P = np.zeros(phi.shape + (3, 2))
    P[..., 0, 0] = c
    P[..., 2, 0] = s / SQRT2
    P[..., 1, 1] = s
    P[..., 2, 1] = c / SQRT2
    return P


def _projector_forms(Amat: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Q_k = P (P^T A P)^{-1} P^T, so that xi^T Q_k xi = |Pi_k(A^{-1/2} xi)|^2."""
    P = _dyad_basis(phi)
    M = np.einsum("kia,ij,kjb->kab", P, Amat, P)
    Minv = np.linalg.inv(M)
    return np.einsum("kia,kab,kjb->kij", P, Minv, P)


@lru_cache(maxsize=32)
def _projector_grid(entries: Tuple[float, ...], k_samples: int) -> np.ndarray:
    A = np.array(entries).reshape(3, 3)
    phi = np.arange(k_samples) * (math.pi / k_samples)
    Q = _projector_forms(A, phi)
    Q.setflags(write=False)
    return Q


def _g_closed_vec(lam: float, mu: float, v: np.ndarray) -> float:
    x1, x2 = _ordered_eigs(v[0], v[1], v[2] / SQRT2)
    a = lam + 2.0 * mu
    c = a / (2.0 * (lam + mu))
    s = x1 + x2
    if c * s < x1:
        return x1 * x1 / a
    if c * s <= x2:
        return (x1 - x2) ** 2 / (4.0 * mu) + s * s / (4.0 * (lam + mu))
    return x2 * x2 / a


def _g_closed_grad(lam: float, mu: float, v: np.ndarray) -> Tuple[float, np.ndarray]:
    """Closed-form g and a (sub)gradient in orthonormal coordinates."""
    a_, b_, c_ = float(v[0]), float(v[1]), float(v[2]) / SQRT2
    x1, x2 = _ordered_eigs(a_, b_, c_)
    a = lam + 2.0 * mu
    c = a / (2.0 * (lam + mu))
    s = x1 + x2
    if x1 <= c * s <= x2:
        d = float(v[0]) - float(v[1])
        val = (d * d + 2.0 * float(v[2]) ** 2) / (4.0 * mu) + s * s / (4.0 * (lam + mu))
        grad = np.array([d / (2.0 * mu) + s / (2.0 * (lam + mu)),
                         -d / (2.0 * mu) + s / (2.0 * (lam + mu)),
                         float(v[2]) / mu])
        return val, grad
    x = x1 if c * s < x1 else x2
    e = np.array([c_, x - a_]) if abs(x - a_) >= abs(x - b_) else np.array([x - b_, c_])
    n = math.hypot(e[0], e[1])
    e = e / n if n > 0 else np.array([1.0, 0.0])
    return x * x / a, (2.0 * x / a) * np.array([e[0] ** 2, e[1] ** 2, SQRT2 * e[0] * e[1]])


def _g_grid_vec(Q: np.ndarray, v: np.ndarray) -> float:
    return float(np.max(np.einsum("i,kij,j->k", v, Q, v)))


def _g_numeric_vec(A: Hooke, v: np.ndarray, k_samples: int, refine: bool = True) -> float:
    Q = _projector_grid(A.entries, k_samples)
    vals = np.einsum("i,kij,j->k", v, Q, v)
    i = int(np.argmax(vals))
    best = float(vals[i])
    if not refine or best == 0.0:
        return max(best, 0.0)
    step = math.pi / k_samples
    Amat = A.matrix

    def neg(phi: float) -> float:
        q = _projector_forms(Amat, np.array([phi]))[0]
        return -float(v @ q @ v)

    res = optimize.minimize_scalar(
        neg, bracket=None, bounds=(i * step - step, i * step + step), method="bounded",
        options={"xatol": 1e-12 * max(1.0, step)},
    )
    return max(best, -float(res.fun))


def g(A0: Hooke, xi: SymLike, mode: str = "closed_form", k_samples: int = 4096) -> float:
    """Maximal squared projection of ``A0^{-1/2} xi`` onto the planes ``A0^{1/2} V_k``.

    Parameters
    ----------
    A0 : Hooke
        Stiffness of the damaged phase.
    xi : Sym2 or array-like
        Symmetric matrix.
    mode : {"closed_form", "numeric"}
        The closed form needs an isotropic ``A0``.  The numeric mode scans
        ``k_samples`` directions on ``[0, pi)`` and refines the best one.
    """
    v = as_vec(xi)
    if mode == "closed_form":
        if not A0.is_isotropic:
            raise UnsupportedModeError("closed-form g requires an isotropic tensor")
        lam, mu = A0.lame
        return _g_closed_vec(lam, mu, v)
    if mode == "numeric":
        if k_samples < 64:
            raise ParameterError("numeric g needs k_samples >= 64")
        return _g_numeric_vec(A0, v, k_samples)
    raise UnsupportedModeError(f"unknown mode {mode!r}")


def _h_closed_vec(lam: float, mu: float, v: np.ndarray) -> float:
    a = lam + 2.0 * mu
    quad = a * (v[0] ** 2 + v[1] ** 2) + 2.0 * lam * v[0] * v[1] + 2.0 * mu * v[2] ** 2
    det = v[0] * v[1] - 0.5 * v[2] ** 2
    return quad + 4.0 * mu * max(det, 0.0)


def _concave_sup(fun, starts, scale: float, rel_tol: float = 1e-6, max_iter: int = 10_000):
    """Maximize ``fun`` over R^3 by Nelder-Mead from several starts.

    Each start is restarted from its own optimum with a smaller simplex
    until a restart gains less than ``rel_tol``-scaled value.  Returns
    ``(best_value, best_point)``.
    """
    best_val, best_x = -math.inf, None
    size = max(scale, 1e-8)
    opts = {"maxiter": max_iter, "maxfev": 2 * max_iter,
            "xatol": 1e-11 * size, "fatol": 1e-14 * max(1.0, size * size)}
    for x0 in starts:
        x = np.asarray(x0, dtype=float)
        val = fun(x)
        step = size
        for _ in range(6):
            init = np.vstack([x, x + step * np.eye(3)])
            res = optimize.minimize(lambda y: -fun(y), x, method="Nelder-Mead",
                                    options={**opts, "initial_simplex": init})
            gain = -res.fun - val
            if gain > 0:
                x, val = res.x, -float(res.fun)
            if gain <= 1e-3 * rel_tol * max(1.0, abs(val)):
                break
            step *= 0.1
        if val > best_val:
            best_val, best_x = val, x
    return best_val, best_x


def h(A0: Hooke, xi: SymLike, mode: str = "closed_form", *, k_samples: int = 1024,
      seed: int = 0) -> float:
    """Return ``h(xi) = g*(2 xi)``.

    The numeric mode maximizes ``2 xi:eta - g(eta)`` with ``g`` sampled on
    ``k_samples`` directions, as a smooth constrained problem (SLSQP).  If
    that fails it falls back to Nelder-Mead from 0, +-2 xi and two random
    points drawn with ``seed``.
    """
    v = as_vec(xi)
    if mode == "closed_form":
        if not A0.is_isotropic:
            raise UnsupportedModeError("closed-form h requires an isotropic tensor")
        return _h_closed_vec(*A0.lame, v)
    if mode != "numeric":
        raise UnsupportedModeError(f"unknown mode {mode!r}")
    if not np.any(v):
        return 0.0
    Q = _projector_grid(A0.entries, k_samples)
    scale = float(v @ v)
    # epigraph form: maximize 2 xi:eta - s subject to s >= eta^T Q_k eta for every k
    res = optimize.minimize(
        lambda z: z[3] - 2.0 * float(v @ z[:3]),
        np.zeros(4),
        jac=lambda z: np.concatenate([-2.0 * v, [1.0]]),
        method="SLSQP",
        constraints=[{
            "type": "ineq",
            "fun": lambda z: z[3] - np.einsum("i,kij,j->k", z[:3], Q, z[:3]),
            "jac": lambda z: np.hstack([-2.0 * np.einsum("kij,j->ki", Q, z[:3]),
                                        np.ones((len(Q), 1))]),
        }],
        options={"ftol": 1e-13 * max(1.0, scale), "maxiter": 500},
    )
    val = -float(res.fun)
    if not (res.success and math.isfinite(val)):
        rng = np.random.default_rng(seed)
        norm = math.sqrt(scale)

        def obj(eta):
            return 2.0 * float(v @ eta) - _g_grid_vec(Q, eta)

        starts = [np.zeros(3), 2 * v, -2 * v] + [norm * rng.standard_normal(3) for _ in range(2)]
        val, _ = _concave_sup(obj, starts, norm)
    if not math.isfinite(val):
        raise ConvergenceError("numeric h did not converge", best=val)
    # A0 xi:xi is a certified lower bound
    return max(val, float(v @ A0.matrix @ v))


def _h_vec(A0: Hooke, v: np.ndarray) -> float:
    if A0.is_isotropic:
        return _h_closed_vec(*A0.lame, v)
    return h(A0, Sym2.from_vec(v), mode="numeric")


def k_set(A0: Hooke, xi: SymLike, alpha: Rate, kappa: float,
          mode: Optional[str] = None) -> Tuple[bool, float]:
    """Membership in ``K = {g <= 2 alpha kappa}`` and the support function at ``xi``."""
    a = _finite_positive(alpha, "alpha")
    mode = mode or ("closed_form" if A0.is_isotropic else "numeric")
    v = as_vec(xi)
    member = g(A0, v_to_sym(v), mode=mode) <= 2.0 * a * kappa
    hv = _h_closed_vec(*A0.lame, v) if mode == "closed_form" else h(A0, v_to_sym(v), "numeric")
    return bool(member), math.sqrt(2.0 * a * kappa * hv)


def v_to_sym(v: np.ndarray) -> Sym2:
    return Sym2.from_vec(v)


def wbar_recession(A0: Hooke, xi: SymLike, alpha: Rate, kappa: float) -> float:
    a = _finite_positive(alpha, "alpha")
    return math.sqrt(2.0 * a * kappa * _h_vec(A0, as_vec(xi)))


@dataclass(frozen=True)
class WbarResult:
    value: float
    tau: Sym2

    def __iter__(self):
        return iter((self.value, self.tau))


def _wbar_dual(A0: Hooke, A1m: np.ndarray, v: np.ndarray, c: float,
               k_samples: int = 1024) -> WbarResult:
    """Dual form ``sup {sigma:xi - 1/2 A1^-1 sigma:sigma : g(sigma) <= c}`` on a direction grid.

    Each direction contributes one smooth quadratic constraint, so SLSQP
    handles it directly; the plastic strain is ``xi - A1^-1 sigma``.
    """
    Q = _projector_grid(A0.entries, k_samples)
    S = np.linalg.inv(A1m)
    sigma0 = A1m @ v
    if _g_grid_vec(Q, sigma0) <= c:
        return WbarResult(0.5 * float(v @ A1m @ v), Sym2(0.0, 0.0, 0.0))
    # scaling sigma0 into K gives a feasible start
    start = sigma0 * math.sqrt(c / _g_grid_vec(Q, sigma0)) * (1 - 1e-9)
    res = optimize.minimize(
        lambda s: 0.5 * float(s @ S @ s) - float(s @ v),
        start,
        jac=lambda s: S @ s - v,
        method="SLSQP",
        constraints=[{
            "type": "ineq",
            "fun": lambda s: c - np.einsum("i,kij,j->k", s, Q, s),
            "jac": lambda s: -2.0 * np.einsum("kij,j->ki", Q, s),
        }],
        options={"ftol": 1e-12 * max(1.0, float(v @ sigma0)), "maxiter": 500},
    )
    if not res.success:
        raise ConvergenceError(f"wbar dual problem failed: {res.message}", best=(res.fun, res.x))
    sig = res.x
    return WbarResult(-float(res.fun), Sym2.from_vec(v - S @ sig))


def wbar(A0: Hooke, A1: Hooke, xi: SymLike, alpha: Rate, kappa: float) -> WbarResult:
    """Hencky-type density ``min_tau 1/2 A1(xi - tau):(xi - tau) + sqrt(2 alpha kappa h(tau))``.

    Returns the value and the minimizing plastic strain ``tau``.
    """
    a = _finite_positive(alpha, "alpha")
    v = as_vec(xi)
    A1m = A1.matrix
    c = 2.0 * a * kappa
    iso = A0.is_isotropic
    lame = A0.lame

    def hv(t):
        return _h_closed_vec(*lame, t) if iso else _h_vec(A0, t)

    def obj(t):
        d = v - t
        return 0.5 * float(d @ A1m @ d) + math.sqrt(c * max(hv(t), 0.0))

    if not np.any(v):
        return WbarResult(0.0, Sym2(0.0, 0.0, 0.0))
    if not iso:
        return _wbar_dual(A0, A1m, v, c)
    scale = float(np.linalg.norm(v))
    # sound-phase test: tau = 0 is optimal iff A1 xi lies in K
    sigma = A1m @ v
    if iso and _g_closed_vec(*lame, sigma) <= c:
        return WbarResult(obj(np.zeros(3)), Sym2(0.0, 0.0, 0.0))
    starts = [np.zeros(3), v.copy(), 0.5 * v]
    val, t = _concave_sup(lambda x: -obj(x), starts, scale, rel_tol=1e-8)
    val = -val
    if not math.isfinite(val):
        raise ConvergenceError("wbar minimization failed", best=(val, t))
    if obj(np.zeros(3)) <= val:
        t, val = np.zeros(3), obj(np.zeros(3))
    return WbarResult(val, Sym2.from_vec(t))


def phi(t: float, alpha: Rate, beta: Rate, kappa: float, theta0: float) -> float:
    """Cohesive surface density as a function of ``t = |sqrt(A0) [u] ⊙ nu|``."""
    a = _finite_positive(alpha, "alpha")
    b = _finite_positive(beta, "beta")
    t = abs(float(t))
    s = math.sin(theta0)
    if t <= b * s * math.sqrt(2.0 * kappa / a):
        return a / (2.0 * b * s) * t * t + b * kappa * s
    return math.sqrt(2.0 * kappa * a) * t


def phi1d(t: float) -> float:
    """One-dimensional cohesive lower bound (kappa = 1, h = eps = eta)."""
    t = abs(float(t))
    if t <= SQRT2:
        return 1.0 + 0.5 * t * t
    return SQRT2 * t


@dataclass(frozen=True)
class SQWResult:
    value: float
    theta: float

    def __iter__(self):
        return iter((self.value, self.theta))


def sqw1d(xi: float, eps: float, a0: float, a1: float) -> SQWResult:
    """Closed-form one-dimensional relaxed two-phase energy (kappa = 1, eta = eps)."""
    if not (eps > 0 and 0 < eps * a0 < a1):
        raise ParameterError("sqw1d needs eps > 0 and 0 < eps*a0 < a1")
    x = abs(float(xi))
    if a1 * x <= math.sqrt(2.0 * a0):
        theta = 0.0
    else:
        d = a1 - eps * a0
        theta = eps * math.sqrt(a1 * a0 / (2.0 * d)) * (x - math.sqrt(2.0 * a0 / (a1 * d)))
        theta = max(theta, 0.0)
    if theta > 1.0:
        raise ParameterError(f"damaged fraction {theta:.4g} exceeds 1: |xi| too large for eps")
    return SQWResult(_two_phase_1d(theta, x, eps, a0, a1), theta)


def _two_phase_1d(theta: float, xi: float, eps: float, a0: float, a1: float) -> float:
    comp = theta / (eps * a0) + (1.0 - theta) / a1
    return theta / eps + 0.5 * xi * xi / comp


def _hs_sup_vec(A0: Hooke, D_inv: np.ndarray, v: np.ndarray, theta: float, eps: float,
                t0: Optional[np.ndarray], scale: float) -> Tuple[float, np.ndarray]:
    """sup_tau 2 xi:tau - D^{-1} tau:tau - (theta/eps) g(tau)."""
    if theta == 0.0:
        # pure quadratic: maximizer D xi
        D = np.linalg.inv(D_inv)
        return float(v @ D @ v), D @ v
    w = theta / eps
    if A0.is_isotropic:
        lam, mu = A0.lame

        def neg(t):
            gv, gg = _g_closed_grad(lam, mu, t)
            Dt = D_inv @ t
            return -(2.0 * float(v @ t) - float(t @ Dt) - w * gv), -(2.0 * v - 2.0 * Dt - w * gg)
        jac = True
    else:
        Q = _projector_grid(A0.entries, 1024)

        def neg(t):
            return -(2.0 * float(v @ t) - float(t @ D_inv @ t) - w * _g_grid_vec(Q, t))
        jac = None

    def fval(t):
        return neg(t)[0] if jac else neg(t)

    # strongly concave: a quasi-Newton run from a warm start, then a
    # derivative-free polish for the kinks of g
    best_t, best = None, math.inf
    for x0 in ([t0] if t0 is not None else []) + [np.linalg.solve(D_inv, v)]:
        res = optimize.minimize(neg, x0, jac=jac, method="BFGS", options={"gtol": 1e-9 * scale})
        if res.fun < best:
            best_t, best = res.x, float(res.fun)
    init = np.vstack([best_t, best_t + 1e-4 * scale * np.eye(3)])
    res = optimize.minimize(fval, best_t, method="Nelder-Mead",
                            options={"initial_simplex": init, "xatol": 1e-11 * scale,
                                     "fatol": 1e-14 * max(1.0, scale * scale), "maxiter": 2_000})
    if res.fun < best:
        best_t, best = res.x, float(res.fun)
    return -best, best_t


def hashin_shtrikman(A0: Hooke, A1: Hooke, xi: SymLike, theta: float, eps: float) -> float:
    """Two-phase bound ``H_eps(theta, xi)`` of the relaxed energy."""
    v = as_vec(xi)
    D = A1.matrix - eps * A0.matrix
    if np.linalg.eigvalsh(D)[0] <= 0:
        raise ParameterError("A1 - eps*A0 must be positive definite")
    D_inv = np.linalg.inv(D)
    sup, _ = _hs_sup_vec(A0, D_inv, v, theta, eps, None, max(float(np.linalg.norm(v)), 1e-12))
    return eps * float(v @ A0.matrix @ v) + (1.0 - theta) * sup


def sqw2d(A0: Hooke, A1: Hooke, xi: SymLike, eps: float, n_theta: int = 512) -> SQWResult:
    """Relaxed two-phase energy ``min_theta theta/eps + 1/2 H_eps(theta, xi)`` (kappa = 1, eta = eps)."""
    if eps <= 0:
        raise ParameterError("eps must be positive")
    v = as_vec(xi)
    D = A1.matrix - eps * A0.matrix
    if np.linalg.eigvalsh(D)[0] <= 0:
        raise ParameterError("A1 - eps*A0 must be positive definite")
    D_inv = np.linalg.inv(D)
    q0 = float(v @ A0.matrix @ v)
    scale = max(float(np.linalg.norm(v)), 1e-12)
    if scale == 1e-12 and not np.any(v):
        return SQWResult(0.0, 0.0)

    cache = {}

    def total(theta: float, t0=None) -> float:
        if theta in cache:
            return cache[theta][0]
        sup, t = _hs_sup_vec(A0, D_inv, v, theta, eps, t0, scale)
        val = theta / eps + 0.5 * (eps * q0 + (1.0 - theta) * sup)
        cache[theta] = (val, t)
        return val

    grid = np.linspace(0.0, 1.0, n_theta)
    vals = np.empty(n_theta)
    warm = None
    for i, th in enumerate(grid):
        vals[i] = total(float(th), warm)
        warm = cache[float(th)][1]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_theta - 1)]
    best_val, best_th = float(vals[i]), float(grid[i])
    if hi > lo:
        t_warm = cache[float(grid[i])][1]
        res = optimize.minimize_scalar(lambda th: total(float(th), t_warm), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-10})
        if res.fun < best_val:
            best_val, best_th = float(res.fun), float(res.x)
    return SQWResult(best_val, best_th)
