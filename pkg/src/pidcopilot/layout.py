"""Deterministic auto-layout: longest-path layering plus Manhattan routing.

Elements are arranged left-to-right by layer and stacked top-to-bottom
within a layer; connections get orthogonal routes with a single vertical
jog at the horizontal midpoint between the two endpoints.  All distances
are millimeters of drawing space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import PidGraph, has_errors, validate_graph

Point = tuple[float, float]


@dataclass(frozen=True)
class LayoutConfig:
    layer_pitch: float = 60.0
    row_pitch: float = 40.0
    base_size: float = 20.0
    margin: float = 10.0


DEFAULT_CONFIG = LayoutConfig()


@dataclass
class Rect:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def expanded(self, pad: float) -> "Rect":
        return Rect(self.min_x - pad, self.min_y - pad,
                    self.max_x + pad, self.max_y + pad)

    def overlaps(self, other: "Rect") -> bool:
        return (self.min_x < other.max_x and other.min_x < self.max_x
                and self.min_y < other.max_y and other.min_y < self.max_y)


@dataclass
class Placement:
    position: Point
    scale: Point = (1.0, 1.0)


@dataclass
class LayoutResult:
    element_placements: dict[str, Placement] = field(default_factory=dict)
    routes: dict[str, list[Point]] = field(default_factory=dict)
    extent: Rect = field(default_factory=lambda: Rect(0, 0, 100, 100))

    def covers(self, graph: PidGraph) -> bool:
        return (set(graph.elements) <= set(self.element_placements)
                and set(graph.connections) <= set(self.routes))


def element_box(placement: Placement, base_size: float = 20.0) -> Rect:
    (cx, cy), (sx, sy) = placement.position, placement.scale
    hw, hh = base_size * sx / 2, base_size * sy / 2
    return Rect(cx - hw, cy - hh, cx + hw, cy + hh)


def _layer_assignment(graph: PidGraph) -> dict[str, int]:
    """Longest-path layering; cycles are broken at DFS back edges."""
    succ: dict[str, list[str]] = {el_id: [] for el_id in graph.elements}
    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        src, dst = conn.source.element_id, conn.target.element_id
        if dst not in succ[src] and src != dst:
            succ[src].append(dst)

    # iterative DFS, nodes and successors visited in id order
    dag_edges: dict[str, list[str]] = {el_id: [] for el_id in succ}
    state: dict[str, int] = {}
    for root in sorted(succ):
        if state.get(root):
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        state[root] = 1
        while stack:
            node, idx = stack.pop()
            succs = sorted(succ[node])
            if idx < len(succs):
                stack.append((node, idx + 1))
                nxt = succs[idx]
                if state.get(nxt) == 1:
                    continue  # back edge: dropped to break the cycle
                dag_edges[node].append(nxt)
                if not state.get(nxt):
                    state[nxt] = 1
                    stack.append((nxt, 0))
            else:
                state[node] = 2

    indeg = dict.fromkeys(dag_edges, 0)
    for outs in dag_edges.values():
        for dst in outs:
            indeg[dst] += 1
    layer = dict.fromkeys(dag_edges, 0)
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for dst in dag_edges[node]:
            layer[dst] = max(layer[dst], layer[node] + 1)
            indeg[dst] -= 1
            if indeg[dst] == 0:
                ready.append(dst)
        ready.sort()
    return layer


def _route(src_box: Rect, dst_box: Rect, same_element: bool) -> list[Point]:
    sx, sy = (src_box.min_x + src_box.max_x) / 2, (src_box.min_y + src_box.max_y) / 2
    dx, dy = (dst_box.min_x + dst_box.max_x) / 2, (dst_box.min_y + dst_box.max_y) / 2

    if same_element:
        # short external loop: right edge out, around, into the bottom edge
        out = (src_box.max_x, sy)
        return [out, (src_box.max_x + 6, sy), (src_box.max_x + 6, dst_box.max_y + 6),
                (dx, dst_box.max_y + 6), (dx, dst_box.max_y)]

    if dx > sx:
        exit_pt, enter_pt = (src_box.max_x, sy), (dst_box.min_x, dy)
    elif dx < sx:
        exit_pt, enter_pt = (src_box.min_x, sy), (dst_box.max_x, dy)
    else:
        if dy >= sy:
            return [(sx, src_box.max_y), (dx, dst_box.min_y)]
        return [(sx, src_box.min_y), (dx, dst_box.max_y)]

    if exit_pt[1] == enter_pt[1]:
        return [exit_pt, enter_pt]
    mid_x = (exit_pt[0] + enter_pt[0]) / 2
    pts = [exit_pt, (mid_x, exit_pt[1]), (mid_x, enter_pt[1]), enter_pt]
    return [p for i, p in enumerate(pts) if i == 0 or p != pts[i - 1]]


def auto_layout(graph: PidGraph, config: LayoutConfig = DEFAULT_CONFIG) -> LayoutResult:
    """Place every element and route every connection, deterministically."""
    diags = validate_graph(graph)
    if has_errors(diags):
        raise ValueError("cannot lay out an invalid graph: "
                         + "; ".join(str(d) for d in diags))

    result = LayoutResult()
    if not graph.elements:
        return result

    layers = _layer_assignment(graph)
    rows: dict[int, list[str]] = {}
    for el_id in sorted(graph.elements):
        rows.setdefault(layers[el_id], []).append(el_id)
    for layer_idx, members in rows.items():
        for row_idx, el_id in enumerate(members):
            pos = (layer_idx * config.layer_pitch, row_idx * config.row_pitch)
            result.element_placements[el_id] = Placement(pos, (1.0, 1.0))

    boxes = {el_id: element_box(p, config.base_size)
             for el_id, p in result.element_placements.items()}
    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        src, dst = conn.source.element_id, conn.target.element_id
        result.routes[conn_id] = _route(boxes[src], boxes[dst], src == dst)

    xs: list[float] = []
    ys: list[float] = []
    for box in boxes.values():
        xs += [box.min_x, box.max_x]
        ys += [box.min_y, box.max_y]
    for route in result.routes.values():
        xs += [p[0] for p in route]
        ys += [p[1] for p in route]
    result.extent = Rect(min(xs), min(ys), max(xs), max(ys))
    return result
