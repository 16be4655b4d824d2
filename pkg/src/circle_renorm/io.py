"""Deterministic CSV/JSON/SVG emission and the run manifest inventory."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import gmpy2

from .numerics import AdaptiveReal, scientific
from .reports import DecayReport

MPFR = type(gmpy2.mpfr(0))
JSON_MAX_DIGITS = 15


def significant_digits(prec: int) -> int:
    return max(1, min(int(prec / 3.32), 40))


def format_number(x, prec: int) -> str:
    """Decimal rendering with ``min(P/3.32, 40)`` significant digits; floats keep at most 17."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, AdaptiveReal):
        x = x.value
    if isinstance(x, Fraction):
        x = gmpy2.mpfr(x, max(prec, 64))
    digits = significant_digits(prec)
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        # shortest round-trip form; never more digits than the precision tag allows
        text = repr(x)
        return text if _mantissa_digits(text) <= digits else f"{x:.{digits}g}"
    if isinstance(x, MPFR):
        if gmpy2.is_zero(x):
            return "0"
        if not gmpy2.is_finite(x):
            return str(float(x))
        return scientific(x, digits)
    return str(x)


def _mantissa_digits(text: str) -> int:
    return len(text.split("e")[0].replace("-", "").replace(".", "").lstrip("0"))


def write_csv(path, header, rows, prec: int) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v, prec) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _jsonable(x, prec: int):
    if isinstance(x, dict):
        return {str(k): _jsonable(v, prec) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v, prec) for v in x]
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, int):
        return x if abs(x) < 10**JSON_MAX_DIGITS else str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (float, MPFR, AdaptiveReal, Fraction)):
        s = format_number(x, prec)
        if _mantissa_digits(s) > JSON_MAX_DIGITS:
            return s
        return float(s)
    return str(x)


def write_json(path, obj, prec: int) -> Path:
    path = Path(path)
    text = json.dumps(_jsonable(obj, prec), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_report_csv(path, report: DecayReport, prec: int) -> Path:
    return write_csv(path, ["n", "value"], report.points, prec)


def write_cells_csv(path, cells, prec: int) -> Path:
    return write_csv(path, ["n", "m", "value"], cells, prec)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def inventory(root) -> dict:
    """``relative path -> sha256`` for every file below ``root``."""
    root = Path(root)
    return {str(p.relative_to(root)): sha256_file(p) for p in sorted(root.rglob("*")) if p.is_file()}


def emit_decay_plot(report: DecayReport, path) -> Path:
    """Standalone SVG: log-scale values against level, with the fitted line if there is one."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not report.points:
        raise ValueError("cannot plot an empty report")
    path = Path(path)
    matplotlib.rcParams["svg.hashsalt"] = "circle-renorm"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    pos = [(n, v) for n, v in report.points if v > 0 and math.isfinite(v)]
    if pos:
        ax.semilogy([n for n, _ in pos], [v for _, v in pos], "o", label=report.name)
    else:
        ax.set_yscale("log")
        ax.set_ylim(report.floor or 1e-300, 1)
        ax.text(0.5, 0.5, f"all values below floor {report.floor:.3g} (censored)",
                transform=ax.transAxes, ha="center", va="center")
    if report.fitted:
        ns = [n for n in report.levels if n >= report.fit_start]
        ax.semilogy(ns, [report.C * report.lam**n for n in ns], "-",
                    label=f"C={report.C:.3g}, lambda={report.lam:.3g}")
    ax.set_xlabel("level n")
    ax.set_ylabel(report.name)
    if pos or report.fitted:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
