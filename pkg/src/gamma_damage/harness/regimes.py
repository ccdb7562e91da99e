"""Scaling laws and classification of the five limit regimes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Tuple

from ..densities import INFINITY, Rate, RegimeParams, is_infinite
from ..errors import ParameterError

FRACTURE_ANGLE = math.pi / 4 - math.atan(0.5)
PLASTIC_ANGLE = math.atan(0.25)


class Regime(enum.Enum):
    ELASTICITY = "Elasticity"
    TRIVIAL = "Trivial"
    HENCKY_PLASTICITY = "HenckyPlasticity"
    BRITTLE_FRACTURE = "BrittleFracture"
    INTERMEDIATE = "Intermediate"

    @property
    def angle_bound(self) -> float:
        """Largest admissible theta0 for the regime (inf when unrestricted)."""
        return {
            Regime.ELASTICITY: math.inf,
            Regime.TRIVIAL: math.pi / 4,
            Regime.HENCKY_PLASTICITY: PLASTIC_ANGLE,
            Regime.BRITTLE_FRACTURE: FRACTURE_ANGLE,
            Regime.INTERMEDIATE: PLASTIC_ANGLE,
        }[self]


@dataclass(frozen=True)
class ScalingLaw:
    """``eta = c_eta eps^p`` and ``h = c_h eps^q`` along a decreasing list of eps."""

    c_eta: float
    p: float
    c_h: float
    q: float
    eps_list: Tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.c_eta > 0 and self.c_h > 0):
            raise ParameterError("scaling coefficients must be positive")
        eps = tuple(float(e) for e in self.eps_list)
        if any(e <= 0 for e in eps):
            raise ParameterError("eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ParameterError("eps_list must be strictly decreasing")
        object.__setattr__(self, "eps_list", eps)

    def eta(self, eps: float) -> float:
        return self.c_eta * eps ** self.p

    def h(self, eps: float) -> float:
        return self.c_h * eps ** self.q

    @staticmethod
    def _limit(c: float, power: float) -> Rate:
        # lim c eps^(power-1) as eps -> 0
        if power < 1:
            return INFINITY
        if power == 1:
            return float(c)
        return 0.0

    @property
    def alpha(self) -> Rate:
        return self._limit(self.c_eta, self.p)

    @property
    def beta(self) -> Rate:
        return self._limit(self.c_h, self.q)

    def params(self, eps: float, kappa: float, theta0: float, omega_factor: float = 6.0) -> RegimeParams:
        return RegimeParams(kappa, eps, self.eta(eps), self.h(eps), theta0, omega_factor,
                            self.alpha, self.beta)


def regime_of(alpha: Rate, beta: Rate) -> Regime:
    if is_infinite(alpha) or is_infinite(beta):
        return Regime.ELASTICITY
    if alpha == 0 and beta == 0:
        return Regime.TRIVIAL
    if beta == 0:
        return Regime.HENCKY_PLASTICITY
    if alpha == 0:
        return Regime.BRITTLE_FRACTURE
    return Regime.INTERMEDIATE


def classify_regime(law: ScalingLaw, kappa: float, theta0: float) -> Tuple[Regime, Rate, Rate, bool]:
    """Regime and limit rates of a power law, computed from the exponents.

    The angle check accepts ``theta0`` up to and including the regime's
    bound, which is what the explicit constructions attain.
    """
    if not kappa > 0:
        raise ParameterError("kappa must be positive")
    alpha, beta = law.alpha, law.beta
    regime = regime_of(alpha, beta)
    ok = theta0 <= regime.angle_bound * (1 + 1e-12)
    return regime, alpha, beta, bool(ok)
