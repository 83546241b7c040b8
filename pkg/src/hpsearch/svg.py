"""Minimal deterministic SVG writer and the result color ramp."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape, quoteattr

# viridis sampled at 0.0, 0.1, ..., 1.0
RAMP = (
    "#440154",
    "#482475",
    "#414487",
    "#355f8d",
    "#2a788e",
    "#21918c",
    "#22a884",
    "#44bf70",
    "#7ad151",
    "#bddf26",
    "#fde725",
)


def _rgb(hex_color: str) -> tuple[int, int, int]:
    return tuple(int(hex_color[i : i + 2], 16) for i in (1, 3, 5))


def ramp_color(t: float) -> str:
    """Linear interpolation between the ramp stops; ``t`` is clipped to [0, 1]."""
    t = min(max(float(t), 0.0), 1.0)
    pos = t * (len(RAMP) - 1)
    i = min(int(math.floor(pos)), len(RAMP) - 2)
    f = pos - i
    a, b = _rgb(RAMP[i]), _rgb(RAMP[i + 1])
    r, g, bl = (round(x + (y - x) * f) for x, y in zip(a, b))
    return f"#{r:02x}{g:02x}{bl:02x}"


def ramp_position(value: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.5
    return (value - lo) / (hi - lo)


def fmt(x: float) -> str:
    s = f"{x:.2f}"
    if s == "-0.00":
        s = "0.00"
    return s


def tick_label(x: float) -> str:
    if x == 0:
        return "0"
    return f"{x:.3g}"


class Svg:
    def __init__(self, width: int = 640, height: int = 480, title: str | None = None):
        self.width = width
        self.height = height
        self.defs: list[str] = []
        self.parts: list[str] = []
        if title:
            self.text(width / 2, 20, title, anchor="middle", cls="title", size=15)

    def _el(self, tag: str, attrs: dict, body: str | None = None) -> None:
        rendered = []
        for k, v in attrs.items():
            if v is None:
                continue
            if isinstance(v, float):
                v = fmt(v)
            rendered.append(f"{k}={quoteattr(str(v))}")
        head = f"<{tag} {' '.join(rendered)}" if rendered else f"<{tag}"
        if body is None:
            self.parts.append(head + "/>")
        else:
            self.parts.append(f"{head}>{body}</{tag}>")

    def line(self, x1, y1, x2, y2, stroke="#333", width=1.0, cls=None) -> None:
        self._el("line", {"class": cls, "x1": float(x1), "y1": float(y1), "x2": float(x2), "y2": float(y2),
                          "stroke": stroke, "stroke-width": float(width)})

    def rect(self, x, y, w, h, fill="none", stroke=None, cls=None, **extra) -> None:
        self._el("rect", {"class": cls, "x": float(x), "y": float(y), "width": float(w), "height": float(h),
                          "fill": fill, "stroke": stroke, **extra})

    def circle(self, cx, cy, r, fill="none", stroke=None, width=None, cls=None, **extra) -> None:
        self._el("circle", {"class": cls, "cx": float(cx), "cy": float(cy), "r": float(r), "fill": fill,
                            "stroke": stroke, "stroke-width": None if width is None else float(width), **extra})

    def cross(self, cx, cy, size, stroke, width=2.0, cls=None, **extra) -> None:
        d = (f"M{fmt(cx - size)},{fmt(cy - size)}L{fmt(cx + size)},{fmt(cy + size)}"
             f"M{fmt(cx - size)},{fmt(cy + size)}L{fmt(cx + size)},{fmt(cy - size)}")
        self._el("path", {"class": cls, "d": d, "stroke": stroke, "stroke-width": float(width), "fill": "none", **extra})

    def polygon(self, points, fill, cls=None, **extra) -> None:
        pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self._el("polygon", {"class": cls, "points": pts, "fill": fill, **extra})

    def polyline(self, points, stroke, width=1.5, cls=None, **extra) -> None:
        pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
        self._el("polyline", {"class": cls, "points": pts, "stroke": stroke, "stroke-width": float(width),
                              "fill": "none", **extra})

    def text(self, x, y, content, anchor="start", cls=None, size=11, fill="#222", rotate=None) -> None:
        transform = f"rotate({rotate} {fmt(x)} {fmt(y)})" if rotate is not None else None
        self._el("text", {"class": cls, "x": float(x), "y": float(y), "font-size": size, "font-family": "sans-serif",
                          "text-anchor": anchor, "fill": fill, "transform": transform}, escape(str(content)))

    def gradient(self, gid: str) -> None:
        stops = "".join(
            f'<stop offset="{i / (len(RAMP) - 1):.1f}" stop-color="{c}"/>' for i, c in enumerate(RAMP)
        )
        self.defs.append(f'<linearGradient id="{gid}" x1="0" y1="1" x2="0" y2="0">{stops}</linearGradient>')

    def to_string(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
        )
        body = ""
        if self.defs:
            body += "<defs>" + "".join(self.defs) + "</defs>\n"
        body += '<rect x="0" y="0" width="100%" height="100%" fill="white"/>\n'
        body += "\n".join(self.parts) + "\n"
        return head + body + "</svg>\n"
