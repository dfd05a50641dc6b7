"""Shared test utilities: graph builders, random generators, canonical forms."""

from __future__ import annotations

import random

from pidcopilot.model import (
    DEFAULT_TAXONOMY,
    ActuationLoop,
    Attribute,
    ConnectionEnd,
    KIND_ACTUATING,
    Node,
    Nozzle,
    PidConnection,
    PidElement,
    PidGraph,
)

CLASS_CHOICES = [n for n in DEFAULT_TAXONOMY.names if n not in ("Equipment", "PipingComponent")]


def make_element(el_id: str, tag: str, class_name: str = "Tank",
                 nozzle_count: int = 2, kind: str | None = None,
                 attributes: list[Attribute] | None = None) -> PidElement:
    cc = DEFAULT_TAXONOMY.component_class(class_name)
    nozzles = [Nozzle(f"N{i + 1}", [Node(f"N{i + 1}-1")]) for i in range(nozzle_count)]
    return PidElement(
        id=el_id,
        kind=kind or DEFAULT_TAXONOMY.kind_for(class_name),
        component_class=cc,
        component_name=tag,
        nozzles=nozzles,
        attributes=attributes or [],
    )


def make_connection(conn_id: str, src: PidElement, dst: PidElement,
                    line_number: str | None = None,
                    src_nozzle: str = "N1", dst_nozzle: str = "N1",
                    attributes: list[Attribute] | None = None) -> PidConnection:
    return PidConnection(
        id=conn_id,
        source=ConnectionEnd(src.id, src_nozzle),
        target=ConnectionEnd(dst.id, dst_nozzle),
        line_number=line_number,
        attributes=attributes or [],
    )


def tank_pump_graph() -> PidGraph:
    """Two elements and one connection: the workhorse fixture."""
    tank = make_element("TK-1", "T-01", "Tank")
    pump = make_element("PP-1", "P-01", "Pump")
    conn = make_connection("PIPE-1", tank, pump, line_number="L-100",
                           src_nozzle="N2", dst_nozzle="N1")
    g = PidGraph()
    g.elements[tank.id] = tank
    g.elements[pump.id] = pump
    g.connections[conn.id] = conn
    return g


# ── Random instance generators (seeded, deterministic) ──────────────────────


def random_graph(rng: random.Random, max_elements: int = 10,
                 with_loops: bool = True, with_attributes: bool = True,
                 min_elements: int = 1) -> PidGraph:
    """A random valid conceptual graph (no layout fields).

    Tags, line numbers and attribute text are drawn from pattern-safe
    alphabets so the describe/extract closed loop applies.
    """
    g = PidGraph()
    n_elements = rng.randint(min_elements, max_elements)
    class_seq: dict[str, int] = {}
    elements: list[PidElement] = []
    for i in range(n_elements):
        class_name = rng.choice(CLASS_CHOICES)
        abbrev = DEFAULT_TAXONOMY.abbrev_for(class_name)
        seq = class_seq.get(class_name, 0) + 1
        class_seq[class_name] = seq
        tag = f"{abbrev}-{i + 1:02d}"
        attrs = []
        if with_attributes and rng.random() < 0.5:
            for j in range(rng.randint(1, 2)):
                unit = rng.choice([None, "bar", "m3", "degC"])
                attrs.append(Attribute(f"Attr{j + 1}", str(rng.randint(1, 500)), unit))
        el = make_element(f"{abbrev}{i}-ID", tag, class_name,
                          nozzle_count=rng.randint(1, 4), attributes=attrs)
        elements.append(el)
        g.elements[el.id] = el

    n_conns = rng.randint(0, max(0, n_elements - 1))
    for c in range(n_conns):
        src, dst = rng.sample(elements, 2) if len(elements) >= 2 else (None, None)
        if src is None:
            break
        src_noz = rng.choice(src.nozzles).id
        dst_noz = rng.choice(dst.nozzles).id
        line = f"L-{c + 100}" if rng.random() < 0.8 else None
        attrs = []
        if with_attributes and line and rng.random() < 0.3:
            attrs.append(Attribute("Insulation", "IS-" + str(rng.randint(1, 9)), None))
        conn = PidConnection(
            id=f"PIPE{c}-ID",
            source=ConnectionEnd(src.id, src_noz),
            target=ConnectionEnd(dst.id, dst_noz),
            line_number=line,
            attributes=attrs,
        )
        g.connections[conn.id] = conn

    if with_loops and g.connections and rng.random() < 0.6:
        actuated = rng.choice(elements)
        # loops sense either an element or a line-numbered connection
        numbered = sorted(c.id for c in g.connections.values() if c.line_number)
        sensing: str | None = rng.choice(numbered) if numbered else None
        if rng.random() < 0.5 or sensing is None:
            candidates = [e for e in elements if e.id != actuated.id]
            sensing = rng.choice(candidates).id if candidates else None
        if sensing is not None and sensing != actuated.id:
            loop = ActuationLoop(
                id="LOOP0-ID",
                loop_tag="FIC-101",
                sensing_target=sensing,
                actuated_target=actuated.id,
                associations=[("actuates", actuated.id), ("senses", sensing)],
                information_flows=[(sensing, actuated.id)],
            )
            g.loops[loop.id] = loop
    return g


def random_dsl_document(rng: random.Random, max_steps: int = 8):
    """A schema-valid document with forward-only transitions.

    Semantic validity (grounding etc.) is not guaranteed; use for
    parse/serialize round trips and pruning.
    """
    from pidcopilot.dsl import ACTIONS, DslDocument, DslStep

    n = rng.randint(0, max_steps)
    steps = []
    for i in range(n):
        action = rng.choice(ACTIONS)
        tag = f"X-{rng.randint(1, 99):02d}"
        other = f"Y-{rng.randint(1, 99):02d}"
        if action == "AddElement":
            payload = {"component_class": rng.choice(CLASS_CHOICES), "tag": tag}
            if rng.random() < 0.4:
                payload["nozzle_count"] = rng.randint(1, 4)
            if rng.random() < 0.3:
                payload["attributes"] = [{"name": "Duty", "value": str(rng.randint(1, 50))}]
        elif action == "AddConnection":
            payload = {"from": {"tag": tag}, "to": {"tag": other}}
            if rng.random() < 0.5:
                payload["from"]["nozzle"] = f"N{rng.randint(1, 3)}"
            if rng.random() < 0.7:
                payload["line_number"] = f"L-{rng.randint(100, 999)}"
        elif action == "AddActuation":
            payload = {"loop_tag": f"FIC-{rng.randint(100, 999)}",
                       "sensing_target": tag, "actuated_target": other}
        else:
            payload = {"target": tag, "name": "Pressure", "value": str(rng.randint(1, 9))}
            if rng.random() < 0.5:
                payload["unit"] = "bar"
        provenance = (0, rng.randint(0, 40)) if rng.random() < 0.3 else None
        steps.append(DslStep(id=f"s{i + 1}", action=action, payload=payload,
                             next=[], provenance=provenance))
    for i, step in enumerate(steps):
        succs = list(range(i + 1, n))
        rng.shuffle(succs)
        step.next = [f"s{j + 1}" for j in sorted(succs[:rng.randint(0, 2)])]
    # keep a spine so most steps stay reachable
    for i in range(n - 1):
        if rng.random() < 0.8 and f"s{i + 2}" not in steps[i].next:
            steps[i].next.append(f"s{i + 2}")
    return DslDocument(version="1", steps=steps, entry="s1" if steps else None)


def assert_layout_invariants(g, result):
    """Non-overlapping element boxes; routes anchored on box boundaries."""
    from pidcopilot.layout import element_box

    boxes = {el_id: element_box(p) for el_id, p in result.element_placements.items()}
    ids = sorted(boxes)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            assert not boxes[a].overlaps(boxes[b]), f"{a} overlaps {b}"
    for conn_id, route in result.routes.items():
        assert len(route) >= 2
        conn = g.connections[conn_id]
        for point, end in ((route[0], conn.source), (route[-1], conn.target)):
            box = boxes[end.element_id]
            on_x = point[0] in (box.min_x, box.max_x) and box.min_y <= point[1] <= box.max_y
            on_y = point[1] in (box.min_y, box.max_y) and box.min_x <= point[0] <= box.max_x
            assert on_x or on_y, f"route end {point} off the box of {end.element_id}"


# ── Canonical forms for isomorphism-up-to-ids comparison ────────────────────


def _conn_key(g: PidGraph, conn: PidConnection):
    src_el = g.elements[conn.source.element_id]
    dst_el = g.elements[conn.target.element_id]
    return (src_el.component_name, conn.source.nozzle_id,
            dst_el.component_name, conn.target.nozzle_id,
            conn.line_number or "")


def _handle(g: PidGraph, item_id: str):
    if item_id in g.elements:
        return ("el", g.elements[item_id].component_name)
    if item_id in g.connections:
        return ("conn",) + _conn_key(g, g.connections[item_id])
    return ("?", item_id)


def canonical_form(g: PidGraph):
    """Conceptual content of a graph with internal ids normalized away.

    Two graphs are isomorphic modulo generated ids iff their canonical
    forms are equal.  Layout fields are excluded.
    """
    elements = sorted(
        (
            el.component_name,
            el.component_class.name,
            el.kind,
            tuple((noz.id, len(noz.nodes)) for noz in el.nozzles),
            tuple((a.name, a.value, a.unit) for a in el.attributes),
        )
        for el in g.elements.values()
    )
    connections = sorted(
        _conn_key(g, conn) + (tuple((a.name, a.value, a.unit) for a in conn.attributes),)
        for conn in g.connections.values()
    )
    loops = sorted(
        (
            loop.loop_tag,
            _handle(g, loop.sensing_target),
            _handle(g, loop.actuated_target),
            tuple((role, _handle(g, t)) for role, t in loop.associations),
            tuple((_handle(g, a), _handle(g, b)) for a, b in loop.information_flows),
        )
        for loop in g.loops.values()
    )
    return (elements, connections, loops)
