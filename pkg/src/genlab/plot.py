"""Dependency-free SVG 1.1 scatter and line plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .linalg import InvalidInput

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _range(vals, pad=0.05):
    lo, hi = min(vals), max(vals)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def plot_svg(rows, kind: str, title: str = "", xlabel: str = "x", ylabel: str = "y") -> str:
    """``rows``: dicts with "x", "y" and optional "series". ``kind``: scatter, line, or gde.

    "gde" is a scatter with equal axis ranges and the y = x reference line.
    """
    if kind not in ("scatter", "line", "gde"):
        raise InvalidInput(f"unknown plot kind {kind!r}")
    rows = list(rows)
    xs = [float(r["x"]) for r in rows]
    ys = [float(r["y"]) for r in rows]
    if kind == "gde":
        both = xs + ys + [0.0]
        xr = yr = _range(both) if rows else (0.0, 1.0)
    else:
        xr = _range(xs) if rows else (0.0, 1.0)
        yr = _range(ys) if rows else (0.0, 1.0)
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(x):
        return LEFT + (x - xr[0]) / (xr[1] - xr[0]) * pw

    def py(y):
        return TOP + ph - (y - yr[0]) / (yr[1] - yr[0]) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.2f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for i in range(5):
        tx = xr[0] + (xr[1] - xr[0]) * i / 4
        ty = yr[0] + (yr[1] - yr[0]) * i / 4
        out.append(f'<text x="{_fmt(px(tx))}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{tx:.3g}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(py(ty) + 3)}" text-anchor="end" '
                   f'font-size="10">{ty:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{H - 10}" text-anchor="middle" '
               f'font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{TOP + ph / 2:.2f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {TOP + ph / 2:.2f})">{escape(ylabel)}</text>')
    if kind == "gde":
        lo, hi = xr
        out.append(f'<line x1="{_fmt(px(lo))}" y1="{_fmt(py(lo))}" x2="{_fmt(px(hi))}" y2="{_fmt(py(hi))}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    series: list[str] = []
    for r in rows:
        s = str(r.get("series", ""))
        if s not in series:
            series.append(s)
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = [(float(r["x"]), float(r["y"])) for r in rows if str(r.get("series", "")) == s]
        if kind == "line" and len(pts) > 1:
            path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        if s:
            out.append(f'<text x="{LEFT + pw - 4}" y="{TOP + 12 + 12 * k}" text-anchor="end" font-size="10" '
                       f'fill="{color}">{escape(s)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
