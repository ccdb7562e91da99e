"""Epsilon sweeps: construct (and optionally relax) recovery pairs, compare with the limit."""

from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

from ..densities import Hooke, RegimeParams, quad_form
from ..errors import ParameterError, RegimeError, UnsupportedModeError
from ..fem import alt_minimize
from ..parallel import max_workers
from ..recovery import (
    RecoveryOutput,
    elastic_limit,
    recover_elastic,
    recover_jump,
    recover_lamination,
    recover_trivial,
)
from .config import Target, hooke_of, law_of, require, theta0_of
from .regimes import Regime, ScalingLaw, classify_regime, regime_of

HEADER = ("eps", "eta", "h", "regime", "recovery_energy", "altmin_energy",
          "predicted_limit", "rel_gap", "error")


@dataclass(frozen=True)
class AltMinSettings:
    enabled: bool = False
    max_iters: int = 50
    energy_tol: float = 1e-10
    rel_tol: float = 1e-10

    @classmethod
    def from_json(cls, d: Optional[Mapping[str, Any]]) -> "AltMinSettings":
        if d is None or d is False:
            return cls()
        if d is True:
            return cls(True)
        return cls(bool(d.get("enabled", True)), int(d.get("max_iters", 50)),
                   float(d.get("energy_tol", 1e-10)), float(d.get("rel_tol", 1e-10)))


@dataclass(frozen=True)
class SweepConfig:
    law: ScalingLaw
    kappa: float
    theta0: float
    A0: Hooke
    A1: Hooke
    target: Target
    omega_factor: float = 6.0
    run_recovery: bool = True
    altmin: AltMinSettings = AltMinSettings()
    window: Optional[tuple] = (1, 1)

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "SweepConfig":
        window = doc.get("window", [1, 1])
        return cls(law_of(doc), float(require(doc, "kappa")), theta0_of(doc),
                   hooke_of(doc, "A0"), hooke_of(doc, "A1"), Target.from_json(require(doc, "target")),
                   float(doc.get("omega_factor", 6.0)), bool(doc.get("run_recovery", True)),
                   AltMinSettings.from_json(doc.get("altmin")),
                   None if window is None else tuple(int(w) for w in window))


@dataclass
class SweepRow:
    eps: float
    eta: float
    h: float
    regime: str
    recovery_energy: Optional[float] = None
    altmin_energy: Optional[float] = None
    predicted_limit: Optional[float] = None
    rel_gap: Optional[float] = None
    error: str = ""

    def cells(self) -> List[str]:
        def num(x):
            return "" if x is None else repr(float(x))
        return [num(self.eps), num(self.eta), num(self.h), self.regime, num(self.recovery_energy),
                num(self.altmin_energy), num(self.predicted_limit), num(self.rel_gap), self.error]


@dataclass
class SweepResult:
    rows: List[SweepRow]
    regime: Regime
    alpha: Any
    beta: Any
    theta0_bound_ok: bool
    details: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(not r.error for r in self.rows)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def relative_gap(value: float, predicted: float) -> float:
    """``|value - predicted| / |predicted|``; the absolute gap when the limit is 0."""
    d = abs(value - predicted)
    return d if predicted == 0 else d / abs(predicted)


def construct(target: Target, params: RegimeParams, A0: Hooke, A1: Hooke, *,
              window: Optional[tuple] = (1, 1)) -> RecoveryOutput:
    """Pick the recovery construction matching the regime of ``params`` and the target."""
    regime = regime_of(params.alpha, params.beta)
    kind = target.kind
    if regime is Regime.ELASTICITY:
        if kind == "affine":
            xi = target.data
            return recover_elastic(target.field(), params, A1, A0, predicted=0.5 * quad_form(A1, xi))
        if kind == "smooth":
            f = target.data
            return recover_elastic(f, params, A1, A0, predicted=elastic_limit(f, A1, f.strain))
        raise RegimeError(f"{kind} targets have infinite energy in the elastic regime")
    if regime is Regime.TRIVIAL:
        if kind == "piecewise_constant":
            return recover_trivial(target.data, params, A0, A1)
        raise UnsupportedModeError("the trivial regime is constructed for piecewise-constant targets")
    if regime is Regime.HENCKY_PLASTICITY:
        if kind == "affine":
            return recover_lamination(target.data, params, A0, A1, window=window)
        raise UnsupportedModeError("the plastic regime is constructed for affine targets")
    if kind == "jump":
        return recover_jump(target.data, params, A0, A1)
    raise UnsupportedModeError(f"the {regime.value} regime is constructed for jump targets")


def relax(out: RecoveryOutput, settings: AltMinSettings):
    """Alternating minimization started from a recovery pair, with its boundary trace fixed."""
    if out.weights is not None:
        raise UnsupportedModeError("cannot relax a compressed (weighted) mesh")
    return alt_minimize(out.mesh, out.u, out.A0, out.A1, out.params, out.chi,
                        settings.max_iters, settings.energy_tol, u_init=out.u,
                        clip_to_unit_square=out.clip, rel_tol=settings.rel_tol)


def _run_one(cfg: SweepConfig, eps: float, regime: Regime) -> tuple:
    law = cfg.law
    eta, h = law.eta(eps), law.h(eps)
    row = SweepRow(eps, eta, h, regime.value)
    detail: Dict[str, Any] = {"eps": eps}
    try:
        params = law.params(eps, cfg.kappa, cfg.theta0, cfg.omega_factor)
        if not (cfg.run_recovery or cfg.altmin.enabled):
            raise ParameterError("nothing to run: enable recovery and/or altmin")
        out = construct(cfg.target, params, cfg.A0, cfg.A1, window=cfg.window)
        row.predicted_limit = out.predicted_limit
        E = out.energy().total
        detail.update(triangles=len(out.mesh.triangles), note=out.predicted_rate_note)
        if cfg.run_recovery:
            row.recovery_energy = E
        if cfg.altmin.enabled:
            res = relax(out, cfg.altmin)
            row.altmin_energy = res.history[-1].total
            detail["altmin_iterations"] = res.iterations
        best = row.recovery_energy if row.recovery_energy is not None else row.altmin_energy
        row.rel_gap = relative_gap(best, out.predicted_limit)
    except Exception as exc:  # recorded per row; the sweep keeps going
        row.error = f"{type(exc).__name__}: {exc}"
    return row, detail


def run_sweep(config) -> SweepResult:
    """One row per eps of the scaling law, in the order of ``eps_list``.

    ``config`` is a :class:`SweepConfig` or its JSON mapping.  Runs for
    different eps are independent and execute in parallel, up to the worker
    cap from the environment.
    """
    cfg = config if isinstance(config, SweepConfig) else SweepConfig.from_json(config)
    regime, alpha, beta, ok = classify_regime(cfg.law, cfg.kappa, cfg.theta0)
    if not ok:
        print(f"warning: theta0 = {math.degrees(cfg.theta0):.4g} deg exceeds the "
              f"{regime.value} angle bound", file=sys.stderr)
    eps_list = cfg.law.eps_list
    workers = min(max_workers(), max(1, len(eps_list)))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda e: _run_one(cfg, e, regime), eps_list))
    else:
        results = [_run_one(cfg, e, regime) for e in eps_list]
    return SweepResult([r for r, _ in results], regime, alpha, beta, ok, [d for _, d in results])
