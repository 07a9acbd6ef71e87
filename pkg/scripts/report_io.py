#!/usr/bin/env python3
"""
Output writers: canonical JSON + SHA-256 digest, CSV tables, SVG line charts.

CSV is the canonical artifact (header row, '.' decimals, LF endings, floats
in shortest round-trip form). SVG charts are advisory and rendered from a
jinja2 template.
"""
import csv
import hashlib
import io
import json
import math
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from jinja2 import Template


def _plain(obj: Any) -> Any:
    """numpy scalars/arrays and tuples to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def canonical_json(obj: Any) -> str:
    """Deterministic JSON: keys sorted, no whitespace, arrays unchanged."""
    obj = _plain(obj)
    if isinstance(obj, list):
        return "[" + ",".join(canonical_json(item) for item in obj) + "]"
    if isinstance(obj, dict):
        keys = sorted(obj.keys())
        return "{" + ",".join(json.dumps(k) + ":" + canonical_json(obj[k]) for k in keys) + "}"
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def digest(obj: Any) -> str:
    """SHA-256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def dumps_pretty(obj: Any) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_text(path: Optional[str], text: str) -> None:
    """Write to `path`, or stdout when path is None or '-'."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def csv_text(rows: Iterable[Dict[str, Any]], columns: Sequence[str], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    if header:
        writer.writeheader()
    for row in rows:
        writer.writerow({k: _plain(v) for k, v in row.items()})
    return buf.getvalue()


def write_csv(path: Optional[str], rows: Iterable[Dict[str, Any]], columns: Sequence[str],
              header: bool = True) -> None:
    write_text(path, csv_text(rows, columns, header=header))


def read_signal_rows(path: str) -> List[List[str]]:
    """Rows of an (x, value) CSV, header skipped when its first cell is not an integer."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = [r for r in csv.reader(f) if r]
    if rows and not rows[0][0].lstrip("-").isdigit():
        rows = rows[1:]
    return rows


SVG_TEMPLATE = Template("""<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
  <rect width="100%" height="100%" fill="white"/>
  <text x="{{ width // 2 }}" y="18" text-anchor="middle" font-family="sans-serif" font-size="13">{{ title }}</text>
  <line x1="{{ pad }}" y1="{{ height - pad }}" x2="{{ width - pad }}" y2="{{ height - pad }}" stroke="black"/>
  <line x1="{{ pad }}" y1="{{ pad }}" x2="{{ pad }}" y2="{{ height - pad }}" stroke="black"/>
  <text x="{{ width // 2 }}" y="{{ height - 8 }}" text-anchor="middle" font-family="sans-serif" font-size="11">{{ xlabel }}</text>
  <text x="12" y="{{ height // 2 }}" font-family="sans-serif" font-size="11" transform="rotate(-90 12 {{ height // 2 }})">{{ ylabel }}</text>
  <text x="{{ pad }}" y="{{ height - pad + 14 }}" font-family="sans-serif" font-size="10">{{ xmin }}</text>
  <text x="{{ width - pad }}" y="{{ height - pad + 14 }}" text-anchor="end" font-family="sans-serif" font-size="10">{{ xmax }}</text>
  <text x="{{ pad - 4 }}" y="{{ height - pad }}" text-anchor="end" font-family="sans-serif" font-size="10">{{ ymin }}</text>
  <text x="{{ pad - 4 }}" y="{{ pad + 4 }}" text-anchor="end" font-family="sans-serif" font-size="10">{{ ymax }}</text>
{% for s in series %}  <polyline fill="none" stroke="{{ s.color }}" stroke-width="1.5" points="{{ s.points }}"/>
{% endfor %}</svg>
""")

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def render_svg(series: Dict[str, Sequence[Sequence[float]]], title: str = "",
               xlabel: str = "", ylabel: str = "", logx: bool = False, logy: bool = False,
               width: int = 640, height: int = 400) -> str:
    """Line chart of named (x, y) series."""
    pad = 48

    def tx(v, log):
        return math.log10(v) if log else v

    pts = [(tx(x, logx), tx(y, logy)) for s in series.values() for x, y in s
           if (not logx or x > 0) and (not logy or y > 0)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs, ys = zip(*pts)
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    rendered = []
    for i, (name, data) in enumerate(series.items()):
        coords = []
        for x, y in data:
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            px = pad + (tx(x, logx) - x0) / (x1 - x0) * (width - 2 * pad)
            py = height - pad - (tx(y, logy) - y0) / (y1 - y0) * (height - 2 * pad)
            coords.append(f"{px:.2f},{py:.2f}")
        rendered.append({"name": name, "color": PALETTE[i % len(PALETTE)], "points": " ".join(coords)})

    def label(v, log):
        return f"1e{v:.1f}" if log else f"{v:.3g}"

    return SVG_TEMPLATE.render(
        width=width, height=height, pad=pad, title=title, xlabel=xlabel, ylabel=ylabel,
        xmin=label(x0, logx), xmax=label(x1, logx), ymin=label(y0, logy), ymax=label(y1, logy),
        series=rendered,
    )
