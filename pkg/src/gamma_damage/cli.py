"""Command line entry point: ``gamma-damage <command> [<action>] --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
import sympy

from . import densities as dens
from .densities import RegimeParams, Sym2, rate_from_json, rate_to_json
from .errors import GammaDamageError, ParameterError
from .fem import DamageField, alt_minimize, fields_to_json
from .harness.config import (
    Target,
    dump,
    hooke_of,
    load,
    params_of,
    require,
    sym_of,
    theta0_of,
)
from .harness.regimes import regime_of
from .harness.report import emit_plot
from .harness.sweep import AltMinSettings, construct, relax, relative_gap, run_sweep
from .mesh import (
    Triangulation,
    cohesive_mesh,
    double_stripe_mesh,
    jump_strip_mesh,
    stripe_mesh,
    uniform_mesh,
    validate,
)
from .oned import brute_min_1d, recover_affine_1d, wbar_1d

DENSITIES = ("g", "h", "k_set", "wbar", "wbar_recession", "phi", "phi1d", "sqw1d", "sqw2d")


def _jsonable(x):
    if isinstance(x, Sym2):
        return [[x.xx, x.xy], [x.xy, x.yy]]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dens.Infinity):
        return rate_to_json(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


# ---------------------------------------------------------------------------
# density eval
# ---------------------------------------------------------------------------


def eval_densities(doc: Mapping[str, Any]) -> Dict[str, Any]:
    """Evaluate the quantities listed under ``quantities`` from explicit inputs.

    ``xi`` is the 2D strain; the 1D relaxed density reads its scalar from ``xi_1d``.
    """
    names = require(doc, "quantities")
    unknown = [n for n in names if n not in DENSITIES]
    if unknown:
        raise ParameterError(f"unknown quantities {unknown}; choose from {list(DENSITIES)}")
    mode = doc.get("mode", "closed_form")
    out: Dict[str, Any] = {}
    for name in names:
        if name == "g":
            out[name] = dens.g(hooke_of(doc, "A0"), sym_of(require(doc, "xi")), mode)
        elif name == "h":
            out[name] = dens.h(hooke_of(doc, "A0"), sym_of(require(doc, "xi")), mode,
                               seed=int(doc.get("seed", 0)))
        elif name == "k_set":
            member, support = dens.k_set(hooke_of(doc, "A0"), sym_of(require(doc, "xi")),
                                         rate_from_json(require(doc, "alpha")), float(require(doc, "kappa")))
            out[name] = {"member": bool(member), "support": support}
        elif name == "wbar":
            r = dens.wbar(hooke_of(doc, "A0"), hooke_of(doc, "A1"), sym_of(require(doc, "xi")),
                          rate_from_json(require(doc, "alpha")), float(require(doc, "kappa")))
            out[name] = {"value": r.value, "tau": _jsonable(r.tau)}
        elif name == "wbar_recession":
            out[name] = dens.wbar_recession(hooke_of(doc, "A0"), sym_of(require(doc, "xi")),
                                            rate_from_json(require(doc, "alpha")),
                                            float(require(doc, "kappa")))
        elif name == "phi":
            out[name] = dens.phi(float(require(doc, "t")), rate_from_json(require(doc, "alpha")),
                                 rate_from_json(require(doc, "beta")), float(require(doc, "kappa")),
                                 theta0_of(doc))
        elif name == "phi1d":
            out[name] = dens.phi1d(float(require(doc, "t")))
        elif name == "sqw1d":
            r = dens.sqw1d(float(require(doc, "xi_1d")), float(require(doc, "eps")),
                           float(require(doc, "a0")), float(require(doc, "a1")))
            out[name] = {"value": r.value, "theta": r.theta}
        else:
            r = dens.sqw2d(hooke_of(doc, "A0"), hooke_of(doc, "A1"), sym_of(require(doc, "xi")),
                           float(require(doc, "eps")), int(doc.get("n_theta", 512)))
            out[name] = {"value": r.value, "theta": r.theta}
    return _jsonable(out)


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------


def _scalar_expr(expr) -> Any:
    x, y = sympy.symbols("x y")
    try:
        e = sympy.sympify(expr)
    except (sympy.SympifyError, TypeError) as exc:
        raise ParameterError(f"cannot parse amplitude: {exc}") from exc
    if e.free_symbols - {x, y}:
        raise ParameterError("amplitude may only use x and y")
    f = sympy.lambdify((x, y), e, "math")
    return lambda p: float(f(float(p[0]), float(p[1])))


def generate_mesh(spec: Mapping[str, Any]) -> Triangulation:
    kind = require(spec, "generator")
    if kind == "uniform":
        return uniform_mesh(int(require(spec, "n")), int(spec.get("refine_steps", 0)),
                            float(spec.get("side", 1.0)), tuple(spec.get("origin", (0.0, 0.0))))
    if kind == "stripe":
        return stripe_mesh(require(spec, "b"), tuple(require(spec, "period_widths")),
                           float(require(spec, "cross_width")), spec.get("side"),
                           n_periods=spec.get("n_periods"), n_rows=spec.get("n_rows"))
    if kind == "double_stripe":
        np_ = spec.get("n_periods")
        return double_stripe_mesh(require(spec, "b"), tuple(require(spec, "widths1")),
                                  tuple(require(spec, "widths2")), spec.get("side"),
                                  cross_width=spec.get("cross_width"),
                                  n_periods=None if np_ is None else tuple(np_))
    if kind == "jump_strip":
        th = theta0_of(spec) if ("theta0_deg" in spec or "theta0" in spec) else None
        return jump_strip_mesh(float(require(spec, "band_halfwidth")), float(require(spec, "layer_height")),
                               spec.get("n_columns"), h=spec.get("h"), theta0=th,
                               omega_factor=float(spec.get("omega_factor", 6.0)))
    if kind == "cohesive":
        theta = math.radians(float(require(spec, "theta_deg")))
        th0 = theta0_of(spec) if ("theta0_deg" in spec or "theta0" in spec) else None
        frag = cohesive_mesh(require(spec, "segment"), _scalar_expr(require(spec, "amplitude")),
                             float(require(spec, "h")), theta, theta0=th0)
        return frag.mesh
    raise ParameterError(f"unknown mesh generator '{kind}'")


def _mesh_from(doc: Mapping[str, Any], base: Path) -> Triangulation:
    m = require(doc, "mesh")
    if isinstance(m, str):
        return Triangulation.read(base / m)
    return generate_mesh(m)


def _validation(doc: Mapping[str, Any], mesh: Triangulation):
    dom = doc.get("domain")
    return validate(mesh, float(require(doc, "h")), float(doc.get("omega_factor", 6.0)), theta0_of(doc),
                    None if dom is None else tuple(float(v) for v in dom))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _energy_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["step", "sound_elastic", "damaged_elastic", "dissipation", "total"])
    for i, e in enumerate(history):
        w.writerow([i, repr(e.sound_elastic), repr(e.damaged_elastic), repr(e.dissipation), repr(e.total)])
    return buf.getvalue()


def _write_pair(out: Path, mesh: Triangulation, u, chi) -> None:
    mesh.write(out / "mesh.json")
    (out / "fields.json").write_text(fields_to_json(u, chi), encoding="utf-8")


def cmd_density(doc, out: Path, base: Path) -> int:
    res = eval_densities(doc)
    dump(res, out / "densities.json")
    print(json.dumps(res, sort_keys=True))
    return 0


def cmd_mesh_gen(doc, out: Path, base: Path) -> int:
    mesh = generate_mesh(doc)
    mesh.write(out / "mesh.json")
    print(f"{len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    return 0


def cmd_mesh_validate(doc, out: Path, base: Path) -> int:
    rep = _validation(doc, _mesh_from(doc, base))
    dump({"valid": rep.valid, "min_edge": rep.min_edge, "max_edge": rep.max_edge,
          "min_angle_deg": math.degrees(rep.min_angle),
          "violations": [[int(i), str(m)] for i, m in rep.violations]}, out / "validation.json")
    print(rep.summary())
    return 0 if rep.valid else 1


def cmd_solve(doc, out: Path, base: Path) -> int:
    mesh = _mesh_from(doc, base)
    params = params_of(doc)
    A0, A1 = hooke_of(doc, "A0"), hooke_of(doc, "A1")
    bc = Target.from_json(require(doc, "dirichlet")).field()
    init = doc.get("chi_init", "zeros")
    chi0 = {"zeros": DamageField.zeros, "ones": DamageField.ones, "tags": DamageField.from_tags}.get(init)
    if chi0 is None:
        raise ParameterError("chi_init must be 'zeros', 'ones' or 'tags'")
    res = alt_minimize(mesh, bc, A0, A1, params, chi0(mesh), int(doc.get("max_iters", 50)),
                       float(doc.get("energy_tol", 1e-10)),
                       clip_to_unit_square=bool(doc.get("clip_to_unit_square", False)),
                       rel_tol=float(doc.get("rel_tol", 1e-10)))
    _write_pair(out, mesh, res.u, res.chi)
    (out / "history.csv").write_text(_energy_csv(res.history), encoding="utf-8")
    print(f"{res.iterations} iterations, energy {res.history[-1].total!r}")
    return 0


RECOVER_HEADER = ("eps", "eta", "h", "sound_elastic", "damaged_elastic", "dissipation", "total",
                  "predicted_limit")


def cmd_recover(doc, out: Path, base: Path) -> int:
    params = params_of(doc)
    A0, A1 = hooke_of(doc, "A0"), hooke_of(doc, "A1")
    window = doc.get("window", [1, 1])
    rec = construct(Target.from_json(require(doc, "target")), params, A0, A1,
                    window=None if window is None else tuple(window))
    E = rec.energy()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(RECOVER_HEADER)
    w.writerow([repr(float(v)) for v in (params.eps, params.eta, params.h, E.sound_elastic,
                                         E.damaged_elastic, E.dissipation, E.total, rec.predicted_limit)])
    (out / "recover.csv").write_text(buf.getvalue(), encoding="utf-8")
    _write_pair(out, rec.mesh, rec.u, rec.chi)
    if rec.weights is not None:
        dump({"weights": rec.weights.tolist()}, out / "weights.json")
    summary = {"regime": regime_of(params.alpha, params.beta).value, "energy": E.as_dict(),
               "predicted_limit": rec.predicted_limit,
               "rel_gap": relative_gap(E.total, rec.predicted_limit),
               "rate": rec.predicted_rate_note, "info": rec.info}
    settings = AltMinSettings.from_json(doc.get("altmin"))
    if settings.enabled:
        res = relax(rec, settings)
        (out / "altmin_history.csv").write_text(_energy_csv(res.history), encoding="utf-8")
        summary["altmin_energy"] = res.history[-1].total
        summary["altmin_iterations"] = res.iterations
    dump(_jsonable(summary), out / "recovery.json")
    print(f"energy {E.total!r}, predicted {rec.predicted_limit!r}")
    return 0


ONED_HEADER = ("n", "eps", "brute_energy", "sqw_value", "recovery_energy", "eta", "h", "limit")


def cmd_oned(doc, out: Path, base: Path) -> int:
    xi = float(require(doc, "xi"))
    a0, a1, kappa = (float(require(doc, k)) for k in ("a0", "a1", "kappa"))
    law = doc.get("law") or {}
    c_eta, p = float(require(law, "c_eta")), float(require(law, "p"))
    c_h, q = float(require(law, "c_h")), float(require(law, "q"))
    om = float(doc.get("omega_factor", 6.0))
    check = bool(doc.get("check_admissible", True))
    limit = wbar_1d(xi, c_eta, kappa, a0, a1) if p == 1 else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(ONED_HEADER)
    for eps in require(doc, "eps_list"):
        eps = float(eps)
        prm = RegimeParams(kappa, eps, c_eta * eps ** p, c_h * eps ** q, math.pi / 4, om)
        # default: the coarsest admissible uniform subdivision
        n = int(doc["n"]) if "n" in doc else max(1, int(math.ceil(1.0 / (om * prm.h))))
        brute, _ = brute_min_1d(xi, n, prm, a0, a1, check_admissible=check)
        sq = dens.sqw1d(xi, eps, a0, a1) if prm.eta == eps and kappa == 1 else None
        rec = recover_affine_1d(xi, prm, a0, a1)
        w.writerow([n, repr(eps), repr(brute), "" if sq is None else repr(sq.value),
                    repr(rec.energy), repr(prm.eta), repr(prm.h), "" if limit is None else repr(limit)])
    (out / "oned.csv").write_text(buf.getvalue(), encoding="utf-8")
    print(buf.getvalue(), end="")
    return 0


def cmd_sweep(doc, out: Path, base: Path) -> int:
    res = run_sweep(doc)
    text = res.to_csv()
    (out / "sweep.csv").write_text(text, encoding="utf-8", newline="")
    emit_plot(out / "sweep.csv", out / "sweep.svg")
    dump(_jsonable({"regime": res.regime.value, "alpha": rate_to_json(res.alpha),
                    "beta": rate_to_json(res.beta), "theta0_bound_ok": res.theta0_bound_ok,
                    "runs": res.details}), out / "sweep.json")
    for r in res.rows:
        if r.error:
            print(f"eps={r.eps!r}: {r.error}", file=sys.stderr)
    return res.exit_code


def cmd_plot(doc, out: Path, base: Path) -> int:
    src = base / require(doc, "csv")
    path = emit_plot(src, out / doc.get("name", "plot.svg"))
    print(path)
    return 0


COMMANDS = {
    ("density", "eval"): cmd_density,
    ("mesh", "gen"): cmd_mesh_gen,
    ("mesh", "validate"): cmd_mesh_validate,
    ("solve", None): cmd_solve,
    ("recover", None): cmd_recover,
    ("oned", None): cmd_oned,
    ("sweep", None): cmd_sweep,
    ("plot", None): cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamma-damage",
                                     description="Discrete brittle-damage energies, recovery constructions and sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def io_args(p):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")

    d = sub.add_parser("density", help="evaluate densities")
    dsub = d.add_subparsers(dest="action", required=True)
    io_args(dsub.add_parser("eval", help="evaluate the listed densities"))
    m = sub.add_parser("mesh", help="generate or validate meshes")
    msub = m.add_subparsers(dest="action", required=True)
    io_args(msub.add_parser("gen", help="generate a mesh"))
    io_args(msub.add_parser("validate", help="check admissibility of a mesh"))
    for name, text in (("solve", "alternating minimization with Dirichlet data"),
                       ("recover", "build a recovery pair and evaluate its energy"),
                       ("oned", "one-dimensional brute force against the relaxed density"),
                       ("sweep", "eps sweep to CSV and SVG"),
                       ("plot", "render a sweep CSV as SVG")):
        io_args(sub.add_parser(name, help=text))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg_path = Path(args.config)
    out = Path(args.out)
    try:
        doc = load(cfg_path)
        out.mkdir(parents=True, exist_ok=True)
        handler = COMMANDS[(args.command, getattr(args, "action", None))]
        return handler(doc, out, cfg_path.resolve().parent)
    except (GammaDamageError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
