"""Minimal deterministic SVG emission: lines, histograms, scatter.

No plotting dependency; output is plain vector markup with fixed float
formatting so identical data produces identical bytes.
"""

from __future__ import annotations

import numpy as np

_W, _H = 720, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        lo, hi = lo - 0.5, lo + 0.5
    span = hi - lo
    step = 10.0 ** np.floor(np.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = np.ceil(lo / step) * step
    return np.arange(first, hi + 0.5 * step, step)


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str,
                 xlim, ylim, log_y: bool = False):
        self.log_y = log_y
        self.x0, self.x1 = float(xlim[0]), float(xlim[1])
        y0, y1 = float(ylim[0]), float(ylim[1])
        if log_y:
            y0 = max(y0, 1e-300)
            y0, y1 = np.log10(y0), np.log10(max(y1, y0 * 10))
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        self.y0, self.y1 = y0, y1
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W/2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
            f'<text x="{(_ML + _W - _MR)/2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>',
            f'<text x="16" y="{(_MT + _H - _MB)/2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(_MT + _H - _MB)/2})">{ylabel}</text>',
            f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
            f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>',
        ]
        self._axes()

    def px(self, x):
        f = (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0)
        return _ML + f * (_W - _ML - _MR)

    def py(self, y):
        y = np.asarray(y, dtype=float)
        if self.log_y:
            y = np.log10(np.clip(y, 1e-300, None))
        f = (y - self.y0) / (self.y1 - self.y0)
        return _H - _MB - f * (_H - _MT - _MB)

    def _axes(self):
        for tx in _ticks(self.x0, self.x1):
            px = self.px(tx)
            self.parts.append(
                f'<line x1="{_fmt(px)}" y1="{_H - _MB}" x2="{_fmt(px)}" '
                f'y2="{_H - _MB + 5}" stroke="black"/>')
            self.parts.append(
                f'<text x="{_fmt(px)}" y="{_H - _MB + 18}" '
                f'text-anchor="middle">{_fmt(tx)}</text>')
        for ty in _ticks(self.y0, self.y1):
            py = _H - _MB - (ty - self.y0) / (self.y1 - self.y0) * (_H - _MT - _MB)
            label = f"1e{_fmt(ty)}" if self.log_y else _fmt(ty)
            self.parts.append(
                f'<line x1="{_ML - 5}" y1="{_fmt(py)}" x2="{_ML}" '
                f'y2="{_fmt(py)}" stroke="black"/>')
            self.parts.append(
                f'<text x="{_ML - 8}" y="{_fmt(py + 4)}" '
                f'text-anchor="end">{label}</text>')

    def legend(self, labels):
        for i, label in enumerate(labels):
            y = _MT + 14 + 16 * i
            color = _PALETTE[i % len(_PALETTE)]
            self.parts.append(
                f'<line x1="{_W - _MR - 140}" y1="{y}" x2="{_W - _MR - 116}" '
                f'y2="{y}" stroke="{color}" stroke-width="2"/>')
            self.parts.append(
                f'<text x="{_W - _MR - 110}" y="{y + 4}">{label}</text>')

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts))
            fh.write("\n")


def _finite_range(arrays):
    lo, hi = np.inf, -np.inf
    for arr in arrays:
        arr = np.asarray(arr, dtype=float)
        good = arr[np.isfinite(arr)]
        if good.size:
            lo, hi = min(lo, good.min()), max(hi, good.max())
    if not np.isfinite(lo):
        lo, hi = 0.0, 1.0
    return lo, hi


def line_plot(path, series, title="", xlabel="", ylabel="", log_y=False):
    """series: list of (label, x, y); colors follow the fixed palette."""
    xlim = _finite_range([s[1] for s in series])
    ylim = _finite_range([s[2] for s in series])
    cv = _Canvas(title, xlabel, ylabel, xlim, ylim, log_y=log_y)
    for i, (_, x, y) in enumerate(series):
        px, py = cv.px(x), cv.py(y)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        color = _PALETTE[i % len(_PALETTE)]
        cv.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.2"/>')
    cv.legend([s[0] for s in series])
    cv.save(path)


def histogram_plot(path, edges, counts_by_label, title="", xlabel=""):
    """Overlaid step histograms on shared bin edges."""
    edges = np.asarray(edges, dtype=float)
    ymax = max(float(np.max(c)) for _, c in counts_by_label) or 1.0
    cv = _Canvas(title, xlabel, "count", (edges[0], edges[-1]), (0.0, ymax))
    for i, (_, counts) in enumerate(counts_by_label):
        xs, ys = [edges[0]], [0.0]
        for j, c in enumerate(counts):
            xs.extend([edges[j], edges[j + 1]])
            ys.extend([c, c])
        xs.append(edges[-1])
        ys.append(0.0)
        px, py = cv.px(xs), cv.py(ys)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        cv.parts.append(
            f'<polyline points="{pts}" fill="none" '
            f'stroke="{_PALETTE[i % len(_PALETTE)]}" stroke-width="1.2"/>')
    cv.legend([lbl for lbl, _ in counts_by_label])
    cv.save(path)


def scatter_plot(path, x, y, title="", xlabel="", ylabel=""):
    cv = _Canvas(title, xlabel, ylabel, _finite_range([x]), _finite_range([y]))
    px, py = cv.px(x), cv.py(y)
    for a, b in zip(px, py):
        cv.parts.append(
            f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="1.5" '
            f'fill="{_PALETTE[0]}" fill-opacity="0.5"/>')
    cv.save(path)
