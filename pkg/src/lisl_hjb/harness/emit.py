"""Table output in CSV, JSON and markdown.

A table is a list of flat records plus an explicit column order. Floats are
written with 6 significant digits, NaN as ``nan`` and infinities as
``inf`` / ``-inf`` (JSON uses ``null`` for NaN and the strings ``"inf"`` /
``"-inf"``), booleans as ``true`` / ``false``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

CONVERGENCE_COLUMNS = ("N_x", "error_full", "rate_full", "error_interior", "rate_interior", "diverged")
BENCH_COLUMNS = ("solver", "model", "sigma", "level", "n", "iterations", "rho", "converged",
                 "c_G", "c_A", "levels", "status")


@dataclass
class Table:
    columns: Sequence[str]
    rows: list[dict] = field(default_factory=list)
    name: str = "table"


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6g}"
    return str(v)


def _json_value(v: Any):
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, float):
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.6g}")
    return str(v)


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(row.get(c)) for c in table.columns])
    return buf.getvalue()


def to_json(table: Table) -> str:
    recs = [{c: _json_value(row.get(c)) for c in table.columns} for row in table.rows]
    return json.dumps(recs, indent=2) + "\n"


def to_markdown(table: Table) -> str:
    lines = ["| " + " | ".join(table.columns) + " |",
             "|" + "|".join("---" for _ in table.columns) + "|"]
    for row in table.rows:
        lines.append("| " + " | ".join(format_value(row.get(c)) for c in table.columns) + " |")
    return "\n".join(lines) + "\n"


RENDERERS = {"csv": to_csv, "json": to_json, "markdown": to_markdown}
SUFFIX = {"csv": ".csv", "json": ".json", "markdown": ".md"}


def render(table: Table, fmt: str) -> str:
    if fmt not in RENDERERS:
        raise ValueError(f"unknown format {fmt!r}; choose csv, json or markdown")
    return RENDERERS[fmt](table)


def emit(table: Table, fmt: str, path: Optional[Path] = None) -> str:
    """Render ``table``; write it to ``path`` when given. Returns the text."""
    text = render(table, fmt)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text
