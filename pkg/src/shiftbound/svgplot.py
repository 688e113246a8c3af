"""Static SVG rendering of a result bundle.

One panel per experiment. Each panel shows, per method, the full-sample
interval as a horizontal bar with end ticks, box glyphs over the bootstrap
replicates of each endpoint (quartile box, whiskers to min/max), the naive
point estimate as a diamond, and a dashed vertical line at the true value
when the bundle carries one. Output is plain SVG text assembled with fixed
number formatting, so identical bundles produce identical bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyBundle

_PANEL_W = 640
_MARGIN_L = 150
_MARGIN_R = 20
_ROW_H = 26
_HEADER_H = 22
_AXIS_H = 30
_METHOD_ORDER = ("ours", "dro-observable", "dro-omniscient", "naive")
_COLORS = {
    "ours": "#1f6feb",
    "dro-observable": "#d29922",
    "dro-omniscient": "#8250df",
    "naive": "#57606a",
    "truth": "#cf222e",
}


def _fmt(v):
    return f"{v:.2f}"


def _doc_of(bundle):
    if isinstance(bundle, dict):
        return bundle
    from .experiment import bundle_doc

    return bundle_doc(bundle)


def _finite(v):
    return v is not None and np.isfinite(v)


def _panel_rows(doc, name):
    """(method, side) -> {point, replicates} for one experiment."""
    slots = {}
    for row in doc.get("rows", ()):
        if row["experiment"] != name or row["status"] != "Optimal":
            continue
        if not _finite(row["value"]):
            continue
        slot = slots.setdefault(
            (row["method"], row["side"]), {"point": None, "replicates": []}
        )
        if row["replicate"] == 0:
            slot["point"] = float(row["value"])
        else:
            slot["replicates"].append(float(row["value"]))
    return slots


def _box_glyph(out, x_of, values, y, color):
    """Quartile box with min/max whiskers over replicate values."""
    if len(values) < 2:
        return
    lo, q1, med, q3, hi = np.percentile(values, [0, 25, 50, 75, 100])
    half = 5
    out.append(
        f'<line x1="{_fmt(x_of(lo))}" y1="{_fmt(y)}" x2="{_fmt(x_of(hi))}"'
        f' y2="{_fmt(y)}" stroke="{color}" stroke-width="0.8"/>'
    )
    out.append(
        f'<rect x="{_fmt(x_of(q1))}" y="{_fmt(y - half)}"'
        f' width="{_fmt(max(x_of(q3) - x_of(q1), 0.5))}" height="{_fmt(2 * half)}"'
        f' fill="{color}" fill-opacity="0.25" stroke="{color}" stroke-width="0.8"/>'
    )
    out.append(
        f'<line x1="{_fmt(x_of(med))}" y1="{_fmt(y - half)}" x2="{_fmt(x_of(med))}"'
        f' y2="{_fmt(y + half)}" stroke="{color}" stroke-width="1.2"/>'
    )


def emit_plot(bundle, path):
    """Render the bundle to ``path``; returns the path."""
    doc = _doc_of(bundle)
    names = [n for n in doc.get("experiments", ()) if _panel_rows(doc, n)]
    if not names:
        raise EmptyBundle("nothing to plot: bundle has no optimal rows")

    panels = []
    for name in names:
        slots = _panel_rows(doc, name)
        methods = [m for m in _METHOD_ORDER if any(k[0] == m for k in slots)]
        truth = doc.get("truth", {}).get(name)
        values = [s["point"] for s in slots.values() if s["point"] is not None]
        for s in slots.values():
            values.extend(s["replicates"])
        if truth is not None:
            values.append(float(truth))
        vmin, vmax = min(values), max(values)
        pad = 0.05 * (vmax - vmin) if vmax > vmin else 0.5
        panels.append((name, slots, methods, truth, vmin - pad, vmax + pad))

    heights = [_HEADER_H + _ROW_H * len(p[2]) + _AXIS_H for p in panels]
    total_h = sum(heights) + 10
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_PANEL_W}"'
        f' height="{total_h}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_PANEL_W}" height="{total_h}" fill="white"/>',
    ]
    y0 = 5
    span = _PANEL_W - _MARGIN_L - _MARGIN_R
    for (name, slots, methods, truth, vmin, vmax), height in zip(panels, heights):
        def x_of(v, vmin=vmin, vmax=vmax):
            return _MARGIN_L + span * (v - vmin) / (vmax - vmin)

        out.append(
            f'<text x="{_MARGIN_L}" y="{_fmt(y0 + 14)}" font-weight="bold">'
            f"{name}</text>"
        )
        base = y0 + _HEADER_H
        axis_y = base + _ROW_H * len(methods) + 6
        if truth is not None:
            xt = x_of(float(truth))
            out.append(
                f'<line x1="{_fmt(xt)}" y1="{_fmt(base)}" x2="{_fmt(xt)}"'
                f' y2="{_fmt(axis_y - 6)}" stroke="{_COLORS["truth"]}"'
                ' stroke-width="1" stroke-dasharray="4 3"/>'
            )
        for i, method in enumerate(methods):
            y = base + _ROW_H * i + _ROW_H / 2
            color = _COLORS[method]
            out.append(
                f'<text x="{_MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end"'
                f' fill="{color}">{method}</text>'
            )
            lo = slots.get((method, "lower"), {"point": None, "replicates": []})
            hi = slots.get((method, "upper"), {"point": None, "replicates": []})
            if (
                method != "naive"
                and lo["point"] is not None
                and hi["point"] is not None
            ):
                xl, xr = x_of(lo["point"]), x_of(hi["point"])
                out.append(
                    f'<line x1="{_fmt(xl)}" y1="{_fmt(y)}" x2="{_fmt(xr)}"'
                    f' y2="{_fmt(y)}" stroke="{color}" stroke-width="2"/>'
                )
                for xe in (xl, xr):
                    out.append(
                        f'<line x1="{_fmt(xe)}" y1="{_fmt(y - 6)}" x2="{_fmt(xe)}"'
                        f' y2="{_fmt(y + 6)}" stroke="{color}" stroke-width="2"/>'
                    )
            elif method == "naive" and lo["point"] is not None:
                xc = x_of(lo["point"])
                out.append(
                    f'<path d="M {_fmt(xc)} {_fmt(y - 5)} L {_fmt(xc + 5)} {_fmt(y)}'
                    f' L {_fmt(xc)} {_fmt(y + 5)} L {_fmt(xc - 5)} {_fmt(y)} Z"'
                    f' fill="{color}"/>'
                )
            sides = ("lower",) if method == "naive" else ("lower", "upper")
            for side in sides:
                slot = slots.get((method, side))
                if slot:
                    _box_glyph(out, x_of, slot["replicates"], y, color)
        for tick in np.linspace(vmin, vmax, 5):
            xt = x_of(float(tick))
            out.append(
                f'<line x1="{_fmt(xt)}" y1="{_fmt(axis_y)}" x2="{_fmt(xt)}"'
                f' y2="{_fmt(axis_y + 4)}" stroke="#333" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{_fmt(xt)}" y="{_fmt(axis_y + 16)}"'
                f' text-anchor="middle">{tick:.3f}</text>'
            )
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{_fmt(axis_y)}"'
            f' x2="{_PANEL_W - _MARGIN_R}" y2="{_fmt(axis_y)}"'
            ' stroke="#333" stroke-width="1"/>'
        )
        y0 += height
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out))
        fh.write("\n")
    return path
