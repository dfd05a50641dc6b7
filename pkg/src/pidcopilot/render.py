"""SVG preview renderer for a laid-out graph."""

from __future__ import annotations

from .layout import DEFAULT_CONFIG, LayoutConfig, LayoutResult, Rect, element_box
from .model import PidGraph
from .shapes import Arc, Line, arc_svg_params, glyph_for
from .util import fmt_num as f
from .util import xml_escape

_STYLE = (
    "g.element path{fill:none;stroke:#1a1a1a;stroke-width:1}"
    "path.pipe{fill:none;stroke:#00527a;stroke-width:1}"
    "g.loop circle{fill:#fff;stroke:#7a2f00;stroke-width:0.8}"
    "g.loop path{fill:none;stroke:#7a2f00;stroke-width:0.6;stroke-dasharray:2 2}"
    "text{font-family:sans-serif;fill:#1a1a1a}"
)


def _glyph_path(class_name: str) -> str:
    parts: list[str] = []
    for prim in glyph_for(class_name):
        if isinstance(prim, Line):
            parts.append(f"M {f(prim.x1)} {f(prim.y1)} L {f(prim.x2)} {f(prim.y2)}")
        elif isinstance(prim, Arc):
            start, end, large, sweep = arc_svg_params(prim)
            parts.append(
                f"M {f(start[0])} {f(start[1])} "
                f"A {f(prim.rx)} {f(prim.ry)} 0 {large} {sweep} {f(end[0])} {f(end[1])}")
    return " ".join(parts)


def _poly_path(points: list[tuple[float, float]]) -> str:
    head = f"M {f(points[0][0])} {f(points[0][1])}"
    rest = " ".join(f"L {f(x)} {f(y)}" for x, y in points[1:])
    return f"{head} {rest}".strip()


def _anchor_of(graph: PidGraph, layout: LayoutResult, item_id: str) -> tuple[float, float]:
    if item_id in layout.element_placements:
        return layout.element_placements[item_id].position
    route = layout.routes.get(item_id) or [(0.0, 0.0)]
    a, b = route[0], route[-1]
    return ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)


def render_svg(graph: PidGraph, layout: LayoutResult,
               config: LayoutConfig = DEFAULT_CONFIG) -> str:
    """Byte-deterministic SVG: a labeled group per element, a path per
    connection, a tag bubble per actuation loop."""
    if not layout.covers(graph):
        raise ValueError("layout does not cover every element and connection")

    lines: list[str] = []
    bubbles: dict[str, tuple[float, float]] = {}
    for loop_id in sorted(graph.loops):
        loop = graph.loops[loop_id]
        sense = _anchor_of(graph, layout, loop.sensing_target)
        act = _anchor_of(graph, layout, loop.actuated_target)
        bubbles[loop_id] = ((sense[0] + act[0]) / 2, min(sense[1], act[1]) - 24)

    if graph.elements:
        ext = layout.extent
        xs = [ext.min_x, ext.max_x] + [b[0] - 7 for b in bubbles.values()] \
            + [b[0] + 7 for b in bubbles.values()]
        ys = [ext.min_y, ext.max_y] + [b[1] - 7 for b in bubbles.values()] \
            + [b[1] + 7 for b in bubbles.values()]
        view = Rect(min(xs), min(ys), max(xs), max(ys)).expanded(config.margin)
    else:
        view = None  # default 100x100 viewBox for the empty diagram
    vb = (f"{f(view.min_x)} {f(view.min_y)} {f(view.width)} {f(view.height)}"
          if view else "0 0 100 100")
    lines.append('<?xml version="1.0" encoding="UTF-8"?>')
    lines.append(f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vb}">')
    lines.append(f"  <style>{_STYLE}</style>")
    if graph.is_empty and not layout.element_placements:
        lines.append('  <g id="drawing"/>')
        lines.append("</svg>")
        return "\n".join(lines) + "\n"

    lines.append('  <g id="drawing">')

    for el_id in sorted(graph.elements):
        el = graph.elements[el_id]
        placement = layout.element_placements[el_id]
        (cx, cy), (sx, sy) = placement.position, placement.scale
        box = element_box(placement, config.base_size)
        transform = f"translate({f(box.min_x)} {f(box.min_y)}) scale({f(sx)} {f(sy)})"
        lines.append(f'    <g class="element" data-id="{xml_escape(el_id, quote=True)}">')
        lines.append(f'      <g transform="{transform}">')
        lines.append(f'        <path d="{_glyph_path(el.component_class.name)}"/>')
        lines.append("      </g>")
        label = xml_escape(el.component_name)
        lines.append(f'      <text x="{f(cx)}" y="{f(box.max_y + 5)}" '
                     f'text-anchor="middle" font-size="4.5">{label}</text>')
        lines.append("    </g>")

    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        route = layout.routes[conn_id]
        lines.append(f'    <path class="pipe" data-id="{xml_escape(conn_id, quote=True)}" '
                     f'd="{_poly_path(route)}"/>')
        if conn.line_number:
            mx = (route[0][0] + route[-1][0]) / 2
            my = (route[0][1] + route[-1][1]) / 2
            lines.append(f'    <text x="{f(mx)}" y="{f(my - 2)}" text-anchor="middle" '
                         f'font-size="3.5">{xml_escape(conn.line_number)}</text>')

    for loop_id in sorted(graph.loops):
        loop = graph.loops[loop_id]
        sense = _anchor_of(graph, layout, loop.sensing_target)
        act = _anchor_of(graph, layout, loop.actuated_target)
        bx, by = bubbles[loop_id]
        lines.append(f'    <g class="loop" data-id="{xml_escape(loop_id, quote=True)}">')
        lines.append(f'      <path d="{_poly_path([(bx, by), sense])}"/>')
        lines.append(f'      <path d="{_poly_path([(bx, by), act])}"/>')
        lines.append(f'      <circle cx="{f(bx)}" cy="{f(by)}" r="7"/>')
        lines.append(f'      <text x="{f(bx)}" y="{f(by + 1.2)}" text-anchor="middle" '
                     f'font-size="3">{xml_escape(loop.loop_tag)}</text>')
        lines.append("    </g>")

    lines.append("  </g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
