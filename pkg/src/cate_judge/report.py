"""JSON, CSV and dependency-free SVG output.

Figure labels are rendered with ``json.dumps`` of the same value that is
written to the results JSON, so every number in a figure appears verbatim in
the payload.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

FIG_METRICS = ("coverage", "mean_width", "mean_abs_error_of_estimate", "selection_accuracy")


def json_safe(obj):
    """Recursively convert to plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k.value if isinstance(k, enum.Enum) else k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    return obj


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(json_safe(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def fmt(value) -> str:
    return json.dumps(json_safe(value))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow(["" if v is None else fmt(v) if isinstance(v, float) else v
                          for v in (json_safe(x) for x in row)])


# ---------------------------------------------------------------------------
# SVG

WIDTH, ROW_H, LEFT, RIGHT, TOP = 640, 34, 170, 40, 46


def _svg(height: int, body: List[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
            f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<text x="10" y="22" font-size="15">{escape(title)}</text>', *body, "</svg>\n"])


def _scale(lo: float, hi: float):
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    span = WIDTH - LEFT - RIGHT
    return lambda v: LEFT + span * (v - lo) / (hi - lo)


def bar_chart_svg(title: str, items: Sequence[Tuple[str, Optional[float]]],
                  reference: Optional[float] = None) -> str:
    """Horizontal bars, one per label; missing values are drawn as ``null`` with no bar."""
    vals = [v for _, v in items if v is not None and math.isfinite(v)]
    if reference is not None:
        vals.append(reference)
    lo, hi = min([0.0, *vals]), max([1e-12, *vals])
    x = _scale(lo, hi)
    body = []
    for i, (label, v) in enumerate(items):
        y = TOP + i * ROW_H
        body.append(f'<text x="10" y="{y + 16}">{escape(label)}</text>')
        if v is not None and math.isfinite(v):
            x0, x1 = sorted((x(0.0), x(v)))
            body.append(f'<rect x="{x0:.2f}" y="{y + 4}" width="{x1 - x0:.2f}" height="{ROW_H - 12}" fill="#4c78a8"/>')
        body.append(f'<text x="{WIDTH - RIGHT + 4}" y="{y + 16}" font-size="10" class="value">{escape(fmt(v))}</text>')
    if reference is not None:
        xr = x(reference)
        bottom = TOP + len(items) * ROW_H
        body.append(f'<line x1="{xr:.2f}" y1="{TOP}" x2="{xr:.2f}" y2="{bottom}" stroke="#d62728" stroke-dasharray="4 3"/>')
    return _svg(TOP + len(items) * ROW_H + 20, body, title)


def interval_plot_svg(title: str,
                      items: Sequence[Tuple[str, float, float, float, Optional[float]]]) -> str:
    """Point estimates with intervals; an optional true value is drawn as a red tick."""
    pts = [v for it in items for v in it[1:] if v is not None and math.isfinite(v)]
    x = _scale(min([0.0, *pts]), max([0.0, *pts]))
    body = []
    zero = x(0.0)
    bottom = TOP + len(items) * ROW_H
    body.append(f'<line x1="{zero:.2f}" y1="{TOP}" x2="{zero:.2f}" y2="{bottom}" stroke="#999"/>')
    for i, (label, point, lo, hi, truth) in enumerate(items):
        y = TOP + i * ROW_H + ROW_H / 2
        body.append(f'<text x="10" y="{y + 4}">{escape(label)}</text>')
        body.append(f'<line x1="{x(lo):.2f}" y1="{y}" x2="{x(hi):.2f}" y2="{y}" stroke="#4c78a8" stroke-width="2"/>')
        body.append(f'<circle cx="{x(point):.2f}" cy="{y}" r="4" fill="#4c78a8"/>')
        if truth is not None and math.isfinite(truth):
            xt = x(truth)
            body.append(f'<line x1="{xt:.2f}" y1="{y - 9}" x2="{xt:.2f}" y2="{y + 9}" stroke="#d62728" stroke-width="2"/>')
        text = f"{fmt(point)} [{fmt(lo)}, {fmt(hi)}]" + ("" if truth is None else f" true {fmt(truth)}")
        body.append(f'<text x="{LEFT}" y="{y - 8}" font-size="9" class="value">{escape(text)}</text>')
    return _svg(bottom + 20, body, title)
