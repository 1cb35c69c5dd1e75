"""Artifact writers: OBJ surface meshes, CSV polylines and tables, and
canonical JSON reports.

All floats are written with 9 significant digits so identical runs give
byte-identical CSV/JSON output.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt(x: float) -> str:
    return f"{float(x):.9g}"


def round9(obj):
    """Round every float in a nested structure to 9 significant digits."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(f"{obj:.9g}")
        return obj
    if isinstance(obj, dict):
        return {k: round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round9(v) for v in obj]
    if isinstance(obj, np.floating):
        return round9(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round9(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_json(report: dict) -> str:
    return json.dumps(round9(report), indent=2, sort_keys=True) + "\n"


def write_report(path: str | Path, report: dict) -> None:
    Path(path).write_text(report_json(report))


def write_free_boundary_csv(path: str | Path, polyline: np.ndarray) -> None:
    """Closed polyline as ``x,y`` rows, first vertex repeated at the end."""
    pts = np.asarray(polyline, dtype=float)
    lines = ["x,y"]
    for p in pts:
        lines.append(f"{fmt(p[0])},{fmt(p[1])}")
    if len(pts):
        lines.append(f"{fmt(pts[0][0])},{fmt(pts[0][1])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_obj(path: str | Path, vertices: np.ndarray, faces: np.ndarray) -> None:
    """Triangle mesh of the solution graph; the height is the z axis (z-up)."""
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=int)
    lines = [
        "# solution surface: graph of the height function",
        "# axes: x y z with z the height (z-up)",
    ]
    for p in v:
        lines.append(f"v {fmt(p[0])} {fmt(p[1])} {fmt(p[2])}")
    for tri in f:
        lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_csv_table(path: str | Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for c in row:
            if c is None:
                cells.append("")
            elif isinstance(c, bool):
                cells.append("true" if c else "false")
            elif isinstance(c, float):
                cells.append(fmt(c))
            else:
                cells.append(str(c))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
