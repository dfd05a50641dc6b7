"""Schematic symbol catalogue.

Every component class gets one glyph built from line/arc primitives in a
20x20 local frame (y grows downward, matching SVG).  Arcs sweep from
start_deg to end_deg counterclockwise in the mathematical sense, i.e.
point(t) = (cx + rx*cos t, cy - ry*sin t).  Glyphs are schematic previews,
not drafting-grade ISA symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ComponentClass

FRAME = 20.0


@dataclass(frozen=True)
class Line:
    x1: float
    y1: float
    x2: float
    y2: float


@dataclass(frozen=True)
class Arc:
    cx: float
    cy: float
    rx: float
    ry: float
    start_deg: float
    end_deg: float

    def point_at(self, deg: float) -> tuple[float, float]:
        t = math.radians(deg)
        return (self.cx + self.rx * math.cos(t), self.cy - self.ry * math.sin(t))


Primitive = Line | Arc


def _circle(cx: float, cy: float, r: float) -> list[Primitive]:
    return [Arc(cx, cy, r, r, 0, 180), Arc(cx, cy, r, r, 180, 360)]


def _polyline(*pts: tuple[float, float]) -> list[Primitive]:
    return [Line(a[0], a[1], b[0], b[1]) for a, b in zip(pts, pts[1:])]


def _bowtie() -> list[Primitive]:
    return _polyline((3, 6), (3, 14), (17, 6), (17, 14), (3, 6))


_RECTANGLE: list[Primitive] = _polyline((3, 3), (17, 3), (17, 17), (3, 17), (3, 3))

_GLYPHS: dict[str, list[Primitive]] = {
    # vessel: open rectangle with an elliptical top arc
    "Tank": [Line(2, 4, 2, 18), Line(18, 4, 18, 18), Line(2, 18, 18, 18),
             Arc(10, 4, 8, 3, 0, 180)],
    "Pump": _circle(10, 10, 7) + _polyline((6, 5), (6, 15), (16, 10), (6, 5)),
    "HeatExchanger": _circle(10, 10, 7) + _polyline(
        (3, 10), (7, 10), (9, 6), (12, 14), (14, 10), (17, 10)),
    "GlobeValve": _bowtie(),
    "BallValve": _bowtie() + _circle(10, 10, 3),
    "ButterflyValve": _bowtie() + [Line(10, 6, 10, 14)],
    "SwingCheckValve": _bowtie() + [Arc(10, 9, 7, 4, 20, 160)],
    "SpringLoadedGlobeSafetyValve": _polyline(
        (5, 10), (5, 18), (15, 10), (15, 18), (5, 10)) + _polyline(
        (10, 14), (10, 10), (7, 9), (13, 7), (7, 5), (13, 3), (10, 2)),
    "PipeReducer": _polyline((4, 6), (16, 9), (16, 11), (4, 14), (4, 6)),
    "PipeOffPageConnector": _polyline((3, 6), (13, 6), (17, 10), (13, 14), (3, 14), (3, 6)),
    "Equipment": _RECTANGLE,
    "PipingComponent": _polyline((10, 3), (17, 10), (10, 17), (3, 10), (10, 3)),
}


def glyph_for(class_name: str) -> list[Primitive]:
    """The glyph for a class; unknown classes get the fallback rectangle."""
    return _GLYPHS.get(class_name, _RECTANGLE)


def build_shape_catalogue(
        classes: set[ComponentClass] | set[str]) -> dict[str, list[Primitive]]:
    """One shape definition per class, keyed and ordered by class name."""
    names = {c.name if isinstance(c, ComponentClass) else c for c in classes}
    return {name: glyph_for(name) for name in sorted(names)}


def arc_svg_params(arc: Arc) -> tuple[tuple[float, float], tuple[float, float], int, int]:
    """Start point, end point, large-arc flag and sweep flag for SVG paths."""
    start = arc.point_at(arc.start_deg)
    end = arc.point_at(arc.end_deg)
    delta = (arc.end_deg - arc.start_deg) % 360 or 360
    large = 1 if delta > 180 else 0
    # counterclockwise in math coordinates renders counterclockwise on a
    # y-down screen as sweep flag 0
    return start, end, large, 0
