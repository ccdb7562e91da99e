import csv
import io
import json
import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gamma_damage import INFINITY, ParameterError
from gamma_damage.cli import main
from gamma_damage.harness import (
    HEADER,
    Regime,
    ScalingLaw,
    classify_regime,
    emit_plot,
    parse_csv,
    regime_of,
    run_sweep,
)
from gamma_damage.errors import CSVParseError

ISO = {"lambda": 1.0, "mu": 1.0}
ID = {"scalar": 1.0}
SVG = "{http://www.w3.org/2000/svg}"


def law(c_eta, p, c_h, q, eps=()):
    return {"c_eta": c_eta, "p": p, "c_h": c_h, "q": q, "eps_list": list(eps)}


def elastic_doc(eps=(0.2, 0.1, 0.05)):
    return {"law": law(1.0, 0.5, 1.0, 1.0, eps), "kappa": 1.0, "theta0_deg": 30.0,
            "A0": ISO, "A1": ID, "target": {"kind": "affine", "xi": [0.3, -0.1, 0.2]}}


def hencky_doc(eps=(0.1, 0.05)):
    return {"law": law(1.0, 1.0, 1.0, 2.0, eps), "kappa": 1.0, "theta0_deg": 10.0,
            "A0": ISO, "A1": ID, "target": {"kind": "affine", "xi": [3.0, -3.0, 0.0]}}


# --- classification ----------------------------------------------------------


@pytest.mark.parametrize("args,expect", [
    ((1.0, 2.0, 1.0, 2.0), (Regime.TRIVIAL, 0.0, 0.0)),
    ((1.0, 1.0, 1.0, 2.0), (Regime.HENCKY_PLASTICITY, 1.0, 0.0)),
    ((1.0, 1.0, 1.0, 1.0), (Regime.INTERMEDIATE, 1.0, 1.0)),
    ((1.0, 2.0, 0.5, 1.0), (Regime.BRITTLE_FRACTURE, 0.0, 0.5)),
    ((1.0, 0.5, 1.0, 2.0), (Regime.ELASTICITY, INFINITY, 0.0)),
    ((1.0, 2.0, 1.0, 0.5), (Regime.ELASTICITY, 0.0, INFINITY)),
])
def test_classify_examples(args, expect):
    regime, a, b, ok = classify_regime(ScalingLaw(*args), 1.0, math.radians(5))
    assert (regime, a, b) == expect
    assert ok


def test_angle_bounds():
    assert Regime.TRIVIAL.angle_bound == pytest.approx(math.pi / 4)
    assert Regime.BRITTLE_FRACTURE.angle_bound == pytest.approx(math.pi / 4 - math.atan(0.5))
    assert Regime.HENCKY_PLASTICITY.angle_bound == pytest.approx(math.atan(0.25))
    assert Regime.INTERMEDIATE.angle_bound == pytest.approx(math.atan(0.25))
    assert classify_regime(ScalingLaw(1, 1, 1, 1), 1.0, math.radians(30))[3] is False
    assert classify_regime(ScalingLaw(1, 0.5, 1, 1), 1.0, math.radians(80))[3] is True


@given(st.lists(st.floats(1e-6, 1.0), min_size=0, max_size=6, unique=True),
       st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.5, 1.0, 2.0]))
def test_classification_ignores_eps_list(eps, p, q):
    eps = tuple(sorted(eps, reverse=True))
    a = classify_regime(ScalingLaw(1.3, p, 0.7, q), 1.0, 0.1)
    b = classify_regime(ScalingLaw(1.3, p, 0.7, q, eps), 1.0, 0.1)
    assert a == b
    assert a[0] is regime_of(a[1], a[2])


def test_scaling_law_validation():
    with pytest.raises(ParameterError):
        ScalingLaw(0.0, 1, 1, 1)
    with pytest.raises(ParameterError):
        ScalingLaw(1, 1, 1, 1, (0.1, 0.2))
    with pytest.raises(ParameterError):
        classify_regime(ScalingLaw(1, 1, 1, 1), 0.0, 0.1)


# --- sweeps and CSV ----------------------------------------------------------


def test_elastic_sweep_gap_vanishes():
    res = run_sweep(elastic_doc())
    assert res.exit_code == 0
    assert res.regime is Regime.ELASTICITY
    assert [r.eps for r in res.rows] == [0.2, 0.1, 0.05]
    for r in res.rows:
        assert r.rel_gap <= 1e-14


def test_hencky_sweep_gap_shrinks():
    res = run_sweep(hencky_doc((0.1, 0.05, 0.025)))
    gaps = [r.rel_gap for r in res.rows]
    assert res.ok
    assert gaps[0] > gaps[1] > gaps[2]


def test_empty_eps_list_gives_header_only():
    res = run_sweep(elastic_doc(()))
    assert res.exit_code == 0
    assert res.to_csv() == ",".join(HEADER) + "\r\n"


def test_failures_become_error_rows():
    doc = elastic_doc((0.1,))
    doc["law"] = law(1.0, 2.0, 1.0, 2.0, (0.1,))      # trivial regime, affine target
    res = run_sweep(doc)
    assert res.exit_code == 1
    assert res.rows[0].error
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == list(HEADER)
    assert rows[1][-1] == res.rows[0].error


def test_csv_quotes_commas():
    doc = elastic_doc((0.1,))
    doc["law"] = law(1.0, 2.0, 1.0, 2.0, (0.1,))
    res = run_sweep(doc)
    res.rows[0].error = 'bad, "quoted" value'
    text = res.to_csv()
    assert '"bad, ""quoted"" value"' in text
    assert list(csv.reader(io.StringIO(text)))[1][-1] == 'bad, "quoted" value'


def test_sweep_is_deterministic_across_thread_counts(monkeypatch):
    monkeypatch.setenv("GAMMA_DAMAGE_THREADS", "1")
    a = run_sweep(hencky_doc()).to_csv()
    monkeypatch.setenv("GAMMA_DAMAGE_THREADS", "4")
    b = run_sweep(hencky_doc()).to_csv()
    assert a == b


# --- plotting ----------------------------------------------------------------


def six_row_csv():
    rows = [",".join(HEADER)]
    for k in range(6):
        e = 0.1 / 2 ** k
        rows.append(f"{e!r},{e!r},{e * e!r},HenckyPlasticity,{1 + e!r},,1.0,{e!r},")
    return "\r\n".join(rows) + "\r\n"


def series_markers(svg):
    root = ET.fromstring(svg)
    out = {}
    for g in root.iter(SVG + "g"):
        gid = g.get("id", "")
        if gid.startswith("series-"):
            out[gid[7:]] = len(list(g.iter(SVG + "use")))
    return out


def test_plot_has_six_markers_per_series(tmp_path):
    svg = emit_plot(six_row_csv(), tmp_path / "a.svg").read_text()
    assert series_markers(svg) == {"rel_gap": 6, "recovery_energy": 6, "predicted_limit": 6}


def test_plot_is_byte_deterministic(tmp_path):
    a = emit_plot(six_row_csv(), tmp_path / "a.svg").read_bytes()
    b = emit_plot(six_row_csv(), tmp_path / "b.svg").read_bytes()
    assert a == b


def test_plot_without_data(tmp_path):
    svg = emit_plot(",".join(HEADER) + "\r\n", tmp_path / "e.svg").read_text()
    assert series_markers(svg) == {}
    assert len(re.findall(r'<g id="no-data"', svg)) == 2


@pytest.mark.parametrize("text,line", [
    ("eps,eta\r\n", 1),
    (",".join(HEADER) + "\r\n0.1,0.1\r\n", 2),
    (",".join(HEADER) + "\r\n0.1,0.1,0.01,Elasticity,x,,1.0,0.0,\r\n", 2),
    (six_row_csv() + "-0.1,0.1,0.01,Elasticity,1.0,,1.0,0.0,\r\n", 8),
])
def test_malformed_csv_reports_line(text, line):
    with pytest.raises(CSVParseError) as exc:
        parse_csv(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_parse_roundtrip():
    rows = parse_csv(six_row_csv())
    assert len(rows) == 6
    assert rows[0].values["eps"] == 0.1
    assert rows[0].values["altmin_energy"] is None
    assert rows[5].regime == "HenckyPlasticity"


# --- command line ------------------------------------------------------------


def run_cli(tmp_path, args, doc, name="cfg.json"):
    cfg = tmp_path / name
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    out.mkdir(exist_ok=True)
    return main(args + ["--config", str(cfg), "--out", str(out)]), out


def test_cli_density_eval(tmp_path, capsys):
    doc = {"quantities": ["g", "h", "wbar", "phi", "sqw1d"], "A0": ISO, "A1": ID,
           "xi": [3.0, -3.0, 0.0], "alpha": 1.0, "beta": 1.0, "kappa": 1.0, "theta0_deg": 30,
           "t": 0.3, "xi_1d": 2.0, "eps": 0.05, "a0": 1.0, "a1": 1.0}
    rc, out = run_cli(tmp_path, ["density", "eval"], doc)
    assert rc == 0
    res = json.loads((out / "densities.json").read_text())
    assert res["g"] == pytest.approx(9.0)
    assert res["h"] == pytest.approx(36.0)
    assert res["phi"] == pytest.approx(0.59)


def test_cli_mesh_gen_and_validate(tmp_path):
    rc, out = run_cli(tmp_path, ["mesh", "gen"], {"generator": "uniform", "n": 4})
    assert rc == 0
    doc = {"mesh": str(out / "mesh.json"), "h": 0.25, "omega_factor": 6.0, "theta0_deg": 45}
    rc, out = run_cli(tmp_path, ["mesh", "validate"], doc, "v.json")
    assert rc == 0
    assert json.loads((out / "validation.json").read_text())["valid"] is True
    doc["h"] = 0.3
    rc, _ = run_cli(tmp_path, ["mesh", "validate"], doc, "v.json")
    assert rc == 1


def test_cli_solve(tmp_path):
    doc = {"mesh": {"generator": "uniform", "n": 4}, "kappa": 1.0, "eps": 0.1, "eta": 0.1,
           "h": 0.25, "theta0_deg": 45, "A0": ISO, "A1": ID,
           "dirichlet": {"kind": "affine", "xi": [0.1, 0.0, 0.0]}}
    rc, out = run_cli(tmp_path, ["solve"], doc)
    assert rc == 0
    hist = list(csv.reader(io.StringIO((out / "history.csv").read_text())))
    assert len(hist) >= 2


def test_cli_recover_and_oned(tmp_path):
    doc = {"kappa": 1.0, "eps": 0.05, "eta": 0.05, "h": 0.0025, "theta0_deg": 10, "alpha": 1.0,
           "beta": 0.0, "A0": ISO, "A1": ID, "target": {"kind": "affine", "xi": [3.0, -3.0, 0.0]}}
    rc, out = run_cli(tmp_path, ["recover"], doc)
    assert rc == 0
    rows = list(csv.reader(io.StringIO((out / "recover.csv").read_text())))
    assert rows[0] == ["eps", "eta", "h", "sound_elastic", "damaged_elastic", "dissipation",
                       "total", "predicted_limit"]
    doc = {"xi": 2.0, "a0": 1.0, "a1": 1.0, "kappa": 1.0, "law": law(1.0, 1.0, 1.0 / 16, 0.0),
           "eps_list": [0.2], "n": 16}
    rc, out = run_cli(tmp_path, ["oned"], doc, "o.json")
    assert rc == 0
    rows = list(csv.reader(io.StringIO((out / "oned.csv").read_text())))
    assert rows[0][:5] == ["n", "eps", "brute_energy", "sqw_value", "recovery_energy"]
    assert float(rows[1][2]) == pytest.approx(float(rows[1][3]), rel=0.05)


def test_cli_sweep_and_plot(tmp_path):
    rc, out = run_cli(tmp_path, ["sweep"], elastic_doc())
    assert rc == 0
    assert (out / "sweep.svg").exists()
    meta = json.loads((out / "sweep.json").read_text())
    assert meta["regime"] == "Elasticity"
    rc, out = run_cli(tmp_path, ["plot"], {"csv": "out/sweep.csv", "name": "again.svg"}, "p.json")
    assert rc == 0
    assert (out / "again.svg").read_bytes() == (out / "sweep.svg").read_bytes()


def test_cli_reports_bad_config(tmp_path, capsys):
    doc = elastic_doc()
    del doc["law"]
    rc, _ = run_cli(tmp_path, ["sweep"], doc)
    assert rc == 2
    assert "law" in capsys.readouterr().err


def test_cli_sweep_failure_exit_code(tmp_path):
    doc = elastic_doc((0.1,))
    doc["law"] = law(1.0, 2.0, 1.0, 2.0, (0.1,))
    rc, out = run_cli(tmp_path, ["sweep"], doc)
    assert rc == 1
    assert np.isfinite(float(list(csv.reader(io.StringIO((out / "sweep.csv").read_text())))[1][0]))
