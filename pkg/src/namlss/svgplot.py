"""Static SVG line plots with no plotting dependency.

Output is deterministic: fixed palette, fixed float formatting, no
timestamps or randomized ids, so identical inputs give identical bytes.
"""

import math
from html import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_LEFT = 62
_MARGIN_RIGHT = 14
_MARGIN_TOP = 30
_MARGIN_BOTTOM = 44


def _fmt(v) -> str:
    s = format(float(v), ".6g")
    return "0" if s == "-0" else s


def _ticks(lo, hi, target=5):
    """Round tick positions covering [lo, hi] at a 1/2/2.5/5 step."""
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = 10 * mag
    for mult in (1.0, 2.0, 2.5, 5.0):
        if span / (mult * mag) <= target:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


def _span(values):
    lo = min(values)
    hi = max(values)
    if lo == hi:
        lo -= 1.0
        hi += 1.0
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def line_plot(series, title="", xlabel="", ylabel="", width=640, height=420) -> str:
    """Render series = [(label, xs, ys), ...] as one SVG document string."""
    series = [(str(lab), [float(v) for v in xs], [float(v) for v in ys])
              for lab, xs, ys in series]
    if not series or any(len(xs) != len(ys) or not xs for _, xs, ys in series):
        raise ValueError("each series needs equal-length, nonempty xs and ys")

    x_lo, x_hi = _span([v for _, xs, _ in series for v in xs])
    y_lo, y_hi = _span([v for _, _, ys in series for v in ys])
    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(v):
        return _MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v):
        return _MARGIN_TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>',
    ]

    for t in _ticks(x_lo, x_hi):
        x = _fmt(px(t))
        parts.append(f'<line x1="{x}" y1="{_MARGIN_TOP + plot_h}" x2="{x}" '
                     f'y2="{_MARGIN_TOP + plot_h + 5}" stroke="#444444"/>')
        parts.append(f'<text x="{x}" y="{_MARGIN_TOP + plot_h + 18}" font-size="11" '
                     f'font-family="sans-serif" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = _fmt(py(t))
        parts.append(f'<line x1="{_MARGIN_LEFT - 5}" y1="{y}" x2="{_MARGIN_LEFT}" '
                     f'y2="{y}" stroke="#444444"/>')
        parts.append(f'<text x="{_MARGIN_LEFT - 8}" y="{y}" font-size="11" '
                     f'font-family="sans-serif" text-anchor="end" '
                     f'dominant-baseline="middle">{_fmt(t)}</text>')

    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')

    # legend, top-right inside the frame
    for i, (label, _, _) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ly = _MARGIN_TOP + 14 + 16 * i
        lx = width - _MARGIN_RIGHT - 130
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly}" font-size="11" '
                     f'font-family="sans-serif">{escape(label)}</text>')

    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="19" font-size="13" '
                     f'font-family="sans-serif" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        parts.append(f'<text x="{_MARGIN_LEFT + plot_w / 2:.0f}" y="{height - 8}" '
                     f'font-size="12" font-family="sans-serif" '
                     f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        parts.append(f'<text x="14" y="{_MARGIN_TOP + plot_h / 2:.0f}" font-size="12" '
                     f'font-family="sans-serif" text-anchor="middle" '
                     f'transform="rotate(-90 14 {_MARGIN_TOP + plot_h / 2:.0f})">'
                     f'{escape(ylabel)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
