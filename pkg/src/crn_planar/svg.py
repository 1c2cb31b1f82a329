"""Minimal SVG phase portraits (direct path emission, fixed 800x800 viewport)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

SIZE = 800
MARGIN = 60


class Axis:
    def __init__(self, lo: float, hi: float, log: bool, flip: bool):
        if not (hi > lo):
            raise ValueError("axis range must satisfy lo < hi")
        if log and lo <= 0:
            raise ValueError("log axis needs a positive range")
        self.lo, self.hi, self.log, self.flip = lo, hi, log, flip

    def _t(self, v):
        return math.log(v) if self.log else v

    def __call__(self, v: float) -> float:
        a, b = self._t(self.lo), self._t(self.hi)
        frac = (self._t(v) - a) / (b - a)
        if self.flip:
            frac = 1 - frac
        return MARGIN + frac * (SIZE - 2 * MARGIN)

    def ticks(self, n=5):
        if self.log:
            lo, hi = math.floor(math.log10(self.lo)), math.ceil(math.log10(self.hi))
            return [10.0 ** k for k in range(lo, hi + 1) if self.lo <= 10.0 ** k <= self.hi]
        return [self.lo + (self.hi - self.lo) * i / (n - 1) for i in range(n)]


def _f(v: float) -> str:
    return f"{v:.2f}"


def render(paths, xrange, yrange, *, log=False, equilibrium=None, section=None, title="") -> str:
    """``paths`` is a list of point sequences; coordinates outside the window are clipped."""
    ax = Axis(*xrange, log, False)
    ay = Axis(*yrange, log, True)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">',
           '<defs><clipPath id="plot"><rect x="{0}" y="{0}" width="{1}" height="{1}"/></clipPath></defs>'
           .format(MARGIN, SIZE - 2 * MARGIN),
           f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE - 2 * MARGIN}" height="{SIZE - 2 * MARGIN}" '
           'fill="none" stroke="black"/>']
    for v in ax.ticks():
        out.append(f'<text x="{_f(ax(v))}" y="{SIZE - MARGIN + 20}" font-size="12" '
                   f'text-anchor="middle">{v:.3g}</text>')
    for v in ay.ticks():
        out.append(f'<text x="{MARGIN - 8}" y="{_f(ay(v) + 4)}" font-size="12" '
                   f'text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{SIZE / 2}" y="{SIZE - 15}" font-size="14" text-anchor="middle">x</text>')
    out.append(f'<text x="15" y="{SIZE / 2}" font-size="14" text-anchor="middle">y</text>')
    if title:
        out.append(f'<text x="{SIZE / 2}" y="30" font-size="16" text-anchor="middle">{escape(title)}</text>')
    out.append('<g clip-path="url(#plot)" fill="none" stroke="steelblue" stroke-width="1">')
    for pts in paths:
        pts = [(x, y) for x, y in pts if x > 0 and y > 0]
        if len(pts) < 2:
            continue
        d = "M" + " L".join(f"{_f(ax(x))},{_f(ay(y))}" for x, y in pts)
        out.append(f'<path d="{d}"/>')
    out.append('</g>')
    if section is not None:
        (bx, by), (dx, dy), smax = section
        ex, ey = bx + smax * dx, by + smax * dy
        if ex > 0 and ey > 0:
            out.append(f'<line x1="{_f(ax(bx))}" y1="{_f(ay(by))}" x2="{_f(ax(ex))}" y2="{_f(ay(ey))}" '
                       'stroke="darkorange" stroke-dasharray="6,4" clip-path="url(#plot)"/>')
    if equilibrium is not None:
        ex, ey = equilibrium
        out.append(f'<circle cx="{_f(ax(ex))}" cy="{_f(ay(ey))}" r="5" fill="crimson" '
                   'clip-path="url(#plot)"/>')
    out.append('</svg>')
    return "\n".join(out) + "\n"
