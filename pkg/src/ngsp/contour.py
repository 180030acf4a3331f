"""Marching-squares iso-lines and SVG output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .grid import Grid
from .solve import ValueField

COLORS = ("#1f4fd8", "#d62728")  # first field blue, overlay red

# Corner bits: 1 = (i, j), 2 = (i+1, j), 4 = (i+1, j+1), 8 = (i, j+1), set when value >= level.
# Edges: 0 bottom, 1 right, 2 top, 3 left.
_CASES = {
    1: ((3, 0),), 2: ((0, 1),), 3: ((3, 1),), 4: ((1, 2),), 6: ((0, 2),), 7: ((3, 2),),
    8: ((2, 3),), 9: ((2, 0),), 11: ((2, 1),), 12: ((1, 3),), 13: ((1, 0),), 14: ((0, 3),),
}


def _edge_key(i: int, j: int, e: int) -> tuple:
    # horizontal edges are ("h", i, j) from (i, j) to (i+1, j); vertical ones ("v", i, j)
    return (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))[e]


def _cell_segments(code: int, centre_above: bool):
    if code == 5:
        return ((3, 2), (1, 0)) if centre_above else ((3, 0), (1, 2))
    if code == 10:
        return ((3, 0), (1, 2)) if centre_above else ((0, 1), (2, 3))
    return _CASES.get(code, ())


def contour_lines(values: np.ndarray, grid: Grid, level: float) -> list[tuple[np.ndarray, bool]]:
    """Polylines (array of (x, y) vertices, closed flag) of ``values == level``."""
    U = np.asarray(values, float)
    above = U >= level
    points: dict[tuple, tuple[float, float]] = {}

    def crossing(key):
        if key not in points:
            kind, i, j = key
            if kind == "h":
                v0, v1 = U[j, i], U[j, i + 1]
                t = (level - v0) / (v1 - v0)
                points[key] = (grid.x_min + (i + t) * grid.dx, grid.y_min + j * grid.dx)
            else:
                v0, v1 = U[j, i], U[j + 1, i]
                t = (level - v0) / (v1 - v0)
                points[key] = (grid.x_min + i * grid.dx, grid.y_min + (j + t) * grid.dx)
        return key

    links: dict[tuple, list[tuple]] = {}
    code = (above[:-1, :-1] * 1 + above[:-1, 1:] * 2 + above[1:, 1:] * 4 + above[1:, :-1] * 8)
    for j, i in zip(*np.nonzero((code != 0) & (code != 15))):
        c = int(code[j, i])
        centre = 0.25 * (U[j, i] + U[j, i + 1] + U[j + 1, i] + U[j + 1, i + 1]) >= level
        for e0, e1 in _cell_segments(c, centre):
            a, b = crossing(_edge_key(i, j, e0)), crossing(_edge_key(i, j, e1))
            links.setdefault(a, []).append(b)
            links.setdefault(b, []).append(a)

    lines = []
    seen: set = set()
    # open chains start at an endpoint, so walk those first
    starts = [k for k, v in links.items() if len(v) == 1] + list(links)
    for start in starts:
        if start in seen:
            continue
        chain, prev, cur = [start], None, start
        seen.add(start)
        closed = False
        while True:
            nxt = [n for n in links[cur] if n != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            if cur == start:
                closed = True
                break
            if cur in seen:
                break
            seen.add(cur)
            chain.append(cur)
        lines.append((np.array([points[k] for k in chain]), closed))
    return lines


def _path_data(lines, round_to: int = 6) -> str:
    parts = []
    for pts, closed in lines:
        coords = [f"{x:.{round_to}f},{-y:.{round_to}f}" for x, y in pts]
        parts.append("M" + " L".join(coords) + (" Z" if closed else ""))
    return " ".join(parts)


def emit_contours(field: ValueField, levels: Sequence[float], path=None,
                  overlay: ValueField | None = None, labels: Sequence[str] = ("u", "u0")) -> str:
    """SVG 1.1 document with one group per field and one path per non-empty level."""
    g = field.grid
    w, h = g.x_max - g.x_min, g.y_max - g.y_min
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" '
        f'height="{600 * h / w:.0f}" viewBox="{g.x_min} {-g.y_max} {w} {h}">',
        f'<rect x="{g.x_min}" y="{-g.y_max}" width="{w}" height="{h}" fill="white" stroke="black" '
        'stroke-width="1" vector-effect="non-scaling-stroke"/>',
    ]
    fields = [field] if overlay is None else [field, overlay]
    for n, (vf, color) in enumerate(zip(fields, COLORS)):
        name = labels[n] if n < len(labels) else f"field{n}"
        out.append(f'<g id={quoteattr(name)} fill="none" stroke="{color}" stroke-width="1" '
                   'vector-effect="non-scaling-stroke">')
        for level in levels:
            lines = contour_lines(vf.values, vf.grid, level)
            if not lines:
                continue
            out.append(f'<g class="level" data-level="{level:g}">'
                       f'<path vector-effect="non-scaling-stroke" d="{_path_data(lines)}"/></g>')
        out.append("</g>")
    out.append("</svg>")
    doc = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(doc)
    return doc


def default_levels(values: np.ndarray, count: int = 10) -> list[float]:
    top = float(np.max(values))
    return [top * k / (count + 1) for k in range(1, count + 1)]
