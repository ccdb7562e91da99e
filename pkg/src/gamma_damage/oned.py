"""The one-dimensional damage model: exact pattern energies, brute force and recovery."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .densities import RegimeParams
from .errors import BudgetError, ParameterError
from .parallel import max_workers

MAX_BRUTE_N = 24
_BLOCK_BITS = 18


@dataclass(frozen=True, eq=False)
class Subdivision1D:
    breakpoints: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        if len(x) < 2 or x[0] != 0.0 or abs(x[-1] - 1.0) > 1e-12 or np.any(np.diff(x) <= 0):
            raise ParameterError("breakpoints must increase strictly from 0 to 1")
        x = x.copy()
        x[-1] = 1.0
        x.setflags(write=False)
        object.__setattr__(self, "breakpoints", x)

    @classmethod
    def uniform(cls, n: int) -> "Subdivision1D":
        if n < 1:
            raise ParameterError("need at least one interval")
        return cls(np.arange(n + 1) / n)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def n(self) -> int:
        return len(self.breakpoints) - 1

    def is_admissible(self, h: float, omega_factor: float) -> bool:
        L = self.lengths
        return bool(L.min() >= h * (1 - 1e-9) and L.max() <= omega_factor * h * (1 + 1e-9))


@dataclass(frozen=True, eq=False)
class Pattern1D:
    chi: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.chi, dtype=bool).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "chi", c)

    def matches(self, sub: Subdivision1D) -> bool:
        return len(self.chi) == sub.n


@dataclass(frozen=True, eq=False)
class Recovery1D:
    subdivision: Subdivision1D
    pattern: Pattern1D
    u: np.ndarray
    energy: float

    def __iter__(self):
        return iter((self.subdivision, self.pattern, self.u, self.energy))


def _check(sub: Subdivision1D, pattern: Pattern1D) -> None:
    if not pattern.matches(sub):
        raise ParameterError("pattern length differs from the number of intervals")


def pattern_energy(xi: float, subdivision: Subdivision1D, pattern: Pattern1D, params: RegimeParams,
                   a0: float, a1: float) -> float:
    """Minimal energy for fixed damage with ``u(0) = 0``, ``u(1) = xi``.

    The minimizer has constant flux, so the elastic part is
    ``1/2 (sum l_i / a_i)^-1 xi^2`` with ``a_i = eta a0`` on damaged intervals.
    """
    _check(subdivision, pattern)
    L = subdivision.lengths
    c = pattern.chi
    ld = float(L[c].sum())
    compliance = ld / (params.eta * a0) + float(L[~c].sum()) / a1
    return 0.5 * xi * xi / compliance + params.kappa / params.eps * ld


def field_energy_1d(subdivision: Subdivision1D, pattern: Pattern1D, u: np.ndarray,
                    params: RegimeParams, a0: float, a1: float) -> float:
    """Energy of a given piecewise-affine ``u`` (nodal values) and damage pattern."""
    _check(subdivision, pattern)
    L = subdivision.lengths
    du = np.diff(np.asarray(u, dtype=float)) / L
    a = np.where(pattern.chi, params.eta * a0, a1)
    return float(0.5 * np.sum(a * du * du * L) + params.kappa / params.eps * np.sum(L[pattern.chi]))


def _block_energies(lo: int, hi: int, n: int, L: np.ndarray, xi: float, params: RegimeParams,
                    a0: float, a1: float) -> np.ndarray:
    """Pattern energies for codes ``lo..hi-1``; interval 0 is the most significant bit."""
    p = np.arange(lo, hi, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = ((p[:, None] >> shifts[None, :]) & 1).astype(float)
    ld = bits @ L
    ls = L.sum() - ld
    return 0.5 * xi * xi / (ld / (params.eta * a0) + ls / a1) + params.kappa / params.eps * ld


def brute_min_1d(xi: float, n: int, params: RegimeParams, a0: float, a1: float, *,
                 subdivision: Optional[Subdivision1D] = None,
                 check_admissible: bool = True) -> Tuple[float, Pattern1D]:
    """Exhaustive minimum of :func:`pattern_energy` over all ``2^n`` patterns.

    Ties go to the lexicographically smallest pattern.  The uniform
    subdivision with ``n`` intervals is used unless ``subdivision`` is given;
    with ``check_admissible`` its interval lengths must lie in
    ``[h, omega_factor h]``.
    """
    if n > MAX_BRUTE_N:
        raise BudgetError(f"n = {n} exceeds the exhaustive-search budget of {MAX_BRUTE_N}")
    sub = subdivision or Subdivision1D.uniform(n)
    if sub.n != n:
        raise ParameterError("subdivision does not have n intervals")
    if check_admissible and not sub.is_admissible(params.h, params.omega_factor):
        raise ParameterError(f"intervals of {sub.n}-subdivision are not in [h, omega h]")
    L = sub.lengths
    total = 1 << n
    block = 1 << min(_BLOCK_BITS, n)
    ranges = [(lo, min(lo + block, total)) for lo in range(0, total, block)]

    def block_min(r):
        return float(_block_energies(r[0], r[1], n, L, xi, params, a0, a1).min())

    workers = min(max_workers(), len(ranges))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            mins = list(ex.map(block_min, ranges))
    else:
        mins = [block_min(r) for r in ranges]
    best = min(mins)
    tol = 1e-12 * max(1.0, abs(best))
    # second pass: smallest code within the tie tolerance
    lo, hi = next(r for r, m in zip(ranges, mins) if m <= best + tol)
    e = _block_energies(lo, hi, n, L, xi, params, a0, a1)
    code = lo + int(np.nonzero(e <= best + tol)[0][0])
    chi = [(code >> (n - 1 - i)) & 1 for i in range(n)]
    pattern = Pattern1D(np.array(chi, dtype=bool))
    return pattern_energy(xi, sub, pattern, params, a0, a1), pattern


def optimal_fraction_1d(xi: float, params: RegimeParams, a0: float, a1: float) -> float:
    """Damaged volume fraction minimizing ``kappa theta / eps + 1/2 (theta/(eta a0) + (1-theta)/a1)^-1 xi^2``."""
    c = 1.0 / (params.eta * a0) - 1.0 / a1
    if c <= 0:
        return 0.0
    d = 1.0 / a1
    theta = (abs(xi) * math.sqrt(c * params.eps / (2 * params.kappa)) - d) / c
    return min(max(theta, 0.0), 1.0)


def _fill(a: float, b: float, h: float, omega_factor: float) -> np.ndarray:
    """Breakpoints splitting ``[a, b]`` into equal intervals with lengths in ``[h, omega h]``."""
    L = b - a
    if L < h * (1 - 1e-12):
        raise ParameterError("interval shorter than h")
    n = max(1, int(math.ceil(L / (omega_factor * h) * (1 - 1e-12))))
    return a + L * np.arange(n + 1) / n


def _flux_field(sub: Subdivision1D, chi: np.ndarray, xi: float, params: RegimeParams,
                a0: float, a1: float) -> np.ndarray:
    L = sub.lengths
    a = np.where(chi, params.eta * a0, a1)
    sigma = xi / float(np.sum(L / a))
    return np.concatenate([[0.0], np.cumsum(sigma * L / a)])


def recover_affine_1d(xi: float, params: RegimeParams, a0: float, a1: float) -> Recovery1D:
    """Periodic lamination realizing the relaxed energy of the affine field ``xi x``.

    ``m = floor(theta/h)`` periods of length ``1/m``, each damaged on its
    first fraction ``theta``; the displacement has constant flux.
    """
    theta = optimal_fraction_1d(xi, params, a0, a1)
    h, om = params.h, params.omega_factor
    if theta == 0.0:
        sub = Subdivision1D(_fill(0.0, 1.0, h, om))
        chi = np.zeros(sub.n, dtype=bool)
    else:
        m = int(math.floor(theta / h * (1 + 1e-12)))
        if m < 1:
            raise ParameterError(f"damaged fraction {theta:.3g} below h = {h:.3g}")
        l = 1.0 / m
        pts = [0.0]
        flags = []
        for k in range(m):
            x0 = k * l
            pts.append(x0 + theta * l)
            flags.append(True)
            snd = _fill(x0 + theta * l, (k + 1) * l if k < m - 1 else 1.0, h, om)[1:]
            pts.extend(snd.tolist())
            flags.extend([False] * len(snd))
        sub = Subdivision1D(np.array(pts))
        chi = np.array(flags, dtype=bool)
    pattern = Pattern1D(chi)
    u = _flux_field(sub, chi, xi, params, a0, a1)
    return Recovery1D(sub, pattern, u, field_energy_1d(sub, pattern, u, params, a0, a1))


def recover_step_1d(jump: float, params: RegimeParams, a0: float = 1.0, a1: float = 1.0) -> Recovery1D:
    """Damaged ramp of width ``delta = sqrt(eps (h + eta))`` at ``x = 1/2`` carrying the whole jump."""
    delta = math.sqrt(params.eps * (params.h + params.eta))
    if delta >= 0.5:
        raise ParameterError(f"ramp width {delta:.4g} must be below 1/2")
    left = _fill(0.0, 0.5 - delta / 2, params.h, params.omega_factor)
    right = _fill(0.5 + delta / 2, 1.0, params.h, params.omega_factor)
    sub = Subdivision1D(np.concatenate([left, right]))
    chi = np.zeros(sub.n, dtype=bool)
    chi[len(left) - 1] = True
    u = np.concatenate([np.zeros(len(left)), np.full(len(right), float(jump))])
    pattern = Pattern1D(chi)
    return Recovery1D(sub, pattern, u, field_energy_1d(sub, pattern, u, params, a0, a1))


def wbar_1d(xi: float, alpha: float, kappa: float, a0: float, a1: float) -> float:
    """Limit as eps -> 0 (``eta = alpha eps``) of the relaxed 1D density.

    Writing the damaged fraction as ``eps s`` gives
    ``min_{s >= 0} kappa s + 1/2 xi^2 / (s/(alpha a0) + 1/a1)``.
    """
    if not (alpha > 0 and kappa > 0 and a0 > 0 and a1 > 0):
        raise ParameterError("alpha, kappa, a0, a1 must be positive")
    c = 1.0 / (alpha * a0)
    s = max((abs(xi) * math.sqrt(c / (2 * kappa)) - 1.0 / a1) / c, 0.0)
    return kappa * s + 0.5 * xi * xi / (c * s + 1.0 / a1)
