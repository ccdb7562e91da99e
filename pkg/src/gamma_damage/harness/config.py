"""JSON configuration documents and the objects they describe.

Every physical parameter is explicit: there are no defaults for ``kappa``
or ``theta0``.  Angles are given in degrees (``theta0_deg``) or radians
(``theta0``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import numpy as np
import sympy

from ..densities import Hooke, Rate, RegimeParams, Sym2, as_vec, rate_from_json
from ..errors import ParameterError
from .regimes import ScalingLaw

TARGET_KINDS = ("affine", "jump", "smooth", "piecewise_constant")


def load(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParameterError(f"{path}: top level must be an object")
    return doc


def require(doc: Mapping[str, Any], key: str):
    if key not in doc:
        raise ParameterError(f"missing required key '{key}'")
    return doc[key]


def theta0_of(doc: Mapping[str, Any]) -> float:
    if "theta0_deg" in doc:
        return math.radians(float(doc["theta0_deg"]))
    if "theta0" in doc:
        return float(doc["theta0"])
    raise ParameterError("missing required key 'theta0_deg' (or 'theta0' in radians)")


def hooke_of(doc: Mapping[str, Any], key: str) -> Hooke:
    return Hooke.from_json(require(doc, key))


def sym_of(x) -> Sym2:
    return Sym2.from_vec(as_vec(x if not isinstance(x, list) else np.asarray(x, dtype=float)))


def law_of(doc: Mapping[str, Any]) -> ScalingLaw:
    d = require(doc, "law")
    return ScalingLaw(float(require(d, "c_eta")), float(require(d, "p")),
                      float(require(d, "c_h")), float(require(d, "q")),
                      tuple(d.get("eps_list", ())))


def params_of(doc: Mapping[str, Any]) -> RegimeParams:
    """Single-eps parameters: ``kappa, eps, eta, h, theta0`` and the rates."""
    return RegimeParams(float(require(doc, "kappa")), float(require(doc, "eps")),
                        float(require(doc, "eta")), float(require(doc, "h")), theta0_of(doc),
                        float(doc.get("omega_factor", 6.0)),
                        rate_from_json(doc.get("alpha", 0.0)), rate_from_json(doc.get("beta", 0.0)))


def rate_of(doc: Mapping[str, Any], key: str) -> Rate:
    return rate_from_json(require(doc, key))


@dataclass(frozen=True)
class SmoothField:
    """A displacement given by two expressions in ``x`` and ``y``."""

    expressions: tuple

    def __post_init__(self):
        if len(self.expressions) != 2:
            raise ParameterError("a smooth field needs two expressions")
        x, y = sympy.symbols("x y")
        try:
            exprs = [sympy.sympify(e) for e in self.expressions]
        except (sympy.SympifyError, TypeError) as exc:
            raise ParameterError(f"cannot parse field expression: {exc}") from exc
        extra = set().union(*(e.free_symbols for e in exprs)) - {x, y}
        if extra:
            raise ParameterError(f"unknown symbols in field: {sorted(map(str, extra))}")
        e = [sympy.diff(exprs[0], x), sympy.diff(exprs[1], y),
             (sympy.diff(exprs[0], y) + sympy.diff(exprs[1], x)) / 2]
        object.__setattr__(self, "_u", [sympy.lambdify((x, y), ex, "numpy") for ex in exprs])
        object.__setattr__(self, "_e", [sympy.lambdify((x, y), ex, "numpy") for ex in e])

    @staticmethod
    def _eval(fns, P):
        P = np.asarray(P, dtype=float)
        return np.column_stack([np.broadcast_to(f(P[:, 0], P[:, 1]), (len(P),)) for f in fns])

    def __call__(self, P) -> np.ndarray:
        return self._eval(self._u, P)

    def strain(self, P) -> np.ndarray:
        return self._eval(self._e, P)


@dataclass(frozen=True)
class Target:
    """The displacement whose limit energy a run approximates."""

    kind: str
    data: Any

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "Target":
        kind = require(d, "kind")
        if kind == "affine":
            return cls(kind, sym_of(require(d, "xi")))
        if kind == "jump":
            j = np.asarray(require(d, "jump"), dtype=float).reshape(-1)
            if j.shape != (2,):
                raise ParameterError("jump must be a 2-vector")
            return cls(kind, tuple(float(v) for v in j))
        if kind == "smooth":
            return cls(kind, SmoothField(tuple(str(e) for e in require(d, "u"))))
        if kind == "piecewise_constant":
            v = np.asarray(require(d, "values"), dtype=float)
            if v.ndim != 3 or v.shape[0] != v.shape[1] or v.shape[2] != 2:
                raise ParameterError("values must have shape (N, N, 2)")
            return cls(kind, v)
        raise ParameterError(f"unknown target kind '{kind}'; expected one of {TARGET_KINDS}")

    def field(self) -> Callable[[np.ndarray], np.ndarray]:
        """The target as a vectorized function on points (jumps step across ``y = 1/2``)."""
        if self.kind == "affine":
            X = self.data.matrix()
            return lambda P: np.asarray(P, dtype=float) @ X.T
        if self.kind == "smooth":
            return self.data
        if self.kind == "jump":
            J = np.asarray(self.data)
            return lambda P: np.where((np.asarray(P)[:, 1] > 0.5)[:, None], J[None, :], 0.0)
        raise ParameterError("piecewise-constant targets have no pointwise boundary form")


def dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def optional_float(doc: Mapping[str, Any], key: str, default: Optional[float]) -> Optional[float]:
    v = doc.get(key, default)
    return None if v is None else float(v)
