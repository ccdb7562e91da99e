"""Reading sweep CSV files back and rendering them as SVG charts."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from ..errors import CSVParseError
from .sweep import HEADER

NUMERIC = ("eps", "eta", "h", "recovery_energy", "altmin_energy", "predicted_limit", "rel_gap")
ENERGY_SERIES = (("recovery_energy", "recovery", "o"), ("altmin_energy", "alt-min", "s"),
                 ("predicted_limit", "predicted limit", "^"))
# zero gaps and zero limits cannot sit on a log axis; they are drawn at this floor
LOG_FLOOR = 1e-16


@dataclass(frozen=True)
class ReportRow:
    values: Dict[str, Optional[float]]
    regime: str
    error: str


def parse_csv(text: str) -> List[ReportRow]:
    """Parse a sweep CSV; malformed input raises :class:`CSVParseError` with the line number."""
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise CSVParseError("empty file, expected a header", 1) from None
    except csv.Error as exc:
        raise CSVParseError(str(exc), reader.line_num) from None
    if tuple(header) != HEADER:
        raise CSVParseError(f"unexpected header {header!r}", 1)
    rows = []
    while True:
        try:
            rec = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise CSVParseError(str(exc), reader.line_num) from None
        line = reader.line_num
        if not rec:
            continue
        if len(rec) != len(HEADER):
            raise CSVParseError(f"expected {len(HEADER)} fields, got {len(rec)}", line)
        d = dict(zip(HEADER, rec))
        vals: Dict[str, Optional[float]] = {}
        for k in NUMERIC:
            s = d[k].strip()
            if s == "":
                vals[k] = None
                continue
            try:
                vals[k] = float(s)
            except ValueError:
                raise CSVParseError(f"column '{k}': not a number: {s!r}", line) from None
        if vals["eps"] is None or not vals["eps"] > 0:
            raise CSVParseError("column 'eps' must be a positive number", line)
        rows.append(ReportRow(vals, d["regime"], d["error"]))
    return rows


def _series(rows: List[ReportRow], key: str):
    pts = [(r.values["eps"], r.values[key]) for r in rows
           if r.values[key] is not None and math.isfinite(r.values[key])]
    return [p[0] for p in pts], [max(abs(p[1]), LOG_FLOOR) for p in pts]


def render_svg(rows: List[ReportRow]) -> bytes:
    """Two log-log panels: relative gap vs eps, and energies vs eps.

    Each data series is an SVG group with id ``series-<column>``.
    """
    with matplotlib.rc_context({"svg.hashsalt": "gamma-damage", "svg.fonttype": "path",
                                "path.simplify": False}):
        fig = Figure(figsize=(10, 4.2))
        FigureCanvasSVG(fig)
        ax_gap, ax_en = fig.subplots(1, 2)
        drawn = False
        x, y = _series(rows, "rel_gap")
        if x:
            ax_gap.plot(x, y, marker="o", label="relative gap", gid="series-rel_gap")
            drawn = True
        for key, label, marker in ENERGY_SERIES:
            x, y = _series(rows, key)
            if x:
                ax_en.plot(x, y, marker=marker, label=label, gid=f"series-{key}")
                drawn = True
        for ax, title in ((ax_gap, "relative gap to the limit"), (ax_en, "energy")):
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel("eps")
            ax.set_title(title)
            ax.grid(True, which="both", alpha=0.3)
            if ax.lines:
                ax.legend(loc="best")
        if not drawn:
            for ax in (ax_gap, ax_en):
                ax.text(0.5, 0.5, "no data", transform=ax.transAxes, ha="center", va="center",
                        gid="no-data")
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def emit_plot(csv_source: Union[str, Path], out_path: Union[str, Path]) -> Path:
    """Render a sweep CSV (path or CSV text) to an SVG file; identical input gives identical bytes."""
    src = Path(csv_source) if not (isinstance(csv_source, str) and "\n" in csv_source) else None
    text = src.read_text(encoding="utf-8") if src is not None else csv_source
    data = render_svg(parse_csv(text))
    out = Path(out_path)
    out.write_bytes(data)
    return out
