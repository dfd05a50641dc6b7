"""Plant-model XML: a deterministic Proteus-style document format.

The document is a ``PlantModel`` tree.  Conceptual content (equipment,
piping network systems, actuating systems) is emitted from a
:class:`~pidcopilot.model.PidGraph`; a "full" document additionally carries
Position/Scale per element, CenterLine per segment, a Drawing node and a
ShapeCatalogue.  Serialization is byte-deterministic; parsing is
best-effort and preserves unknown node kinds so third-party files can be
inspected and graded.

Shipped node kinds and their attribute order:

  PlantModel        SchemaVersion, OriginatingSystem
  Equipment         ID, ComponentClass, ComponentClassURI, ComponentName[, ComponentType]
  PipingComponent   (same as Equipment)
  Nozzle            ID            children: Node*
  Node              ID
  GenericAttributes -             children: GenericAttribute*
  GenericAttribute  Name, Value[, Units]
  Position          -             child: Location (X, Y)
  Scale             X, Y
  PipingNetworkSystem   ID[, LineNumber]   child: PipingNetworkSegment
  PipingNetworkSegment  ID    children: GenericAttributes?, CenterLine?, Connection
  CenterLine        -             children: Coordinate (X, Y)*
  Connection        FromID, FromNode, ToID, ToNode
  ActuatingSystem   ID, ComponentName
      children: InstrumentationLoopFunction, ProcessInstrumentationFunction
                (with ActuatingFunction), InformationFlow*, Association*
  InformationFlow   ID, FromID, ToID
  Association       Type, ItemID
  Drawing           Name, Title   children: Extent, Border (each Min/Max with X, Y)
  ShapeCatalogue    -             children: Shape (ComponentClass) of Line/Arc
"""

from __future__ import annotations

import copy
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .layout import LayoutResult
from .model import (
    ActuationLoop,
    Attribute,
    ComponentClass,
    ConnectionEnd,
    Diagnostic,
    KIND_ACTUATING,
    KIND_EQUIPMENT,
    KIND_INSTRUMENT,
    Node,
    Nozzle,
    PidConnection,
    PidElement,
    PidGraph,
    Severity,
    has_errors,
    validate_graph,
)
from .shapes import Arc, Line, build_shape_catalogue
from .util import fmt_num as f
from .util import xml_escape

SCHEMA_VERSION = "4.1"
ORIGINATING_SYSTEM = "pidcopilot"
FILE_EXTENSION = ".dexpi.xml"

ELEMENT_TAGS = ("Equipment", "PipingComponent")
_KNOWN_TAGS = frozenset({
    "PlantModel", "Equipment", "PipingComponent", "Nozzle", "Node",
    "GenericAttributes", "GenericAttribute", "Position", "Location", "Scale",
    "PipingNetworkSystem", "PipingNetworkSegment", "CenterLine", "Coordinate",
    "Connection", "ActuatingSystem", "InstrumentationLoopFunction",
    "ProcessInstrumentationFunction", "ActuatingFunction", "InformationFlow",
    "Association", "Drawing", "Extent", "Border", "Min", "Max",
    "ShapeCatalogue", "Shape", "Line", "Arc",
})
_IDENTIFIED_TAGS = frozenset({
    "Equipment", "PipingComponent", "PipingNetworkSystem", "ActuatingSystem",
})

_DEFAULT_KIND = {"Equipment": KIND_EQUIPMENT, "PipingComponent": KIND_INSTRUMENT}


@dataclass
class XmlNode:
    """One document node: tag, ordered attributes, children, optional text."""

    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["XmlNode"] = field(default_factory=list)
    text: str | None = None

    def find(self, tag: str) -> "XmlNode | None":
        for child in self.children:
            if child.tag == tag:
                return child
        return None

    def find_all(self, tag: str) -> list["XmlNode"]:
        return [c for c in self.children if c.tag == tag]

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class DexpiDocument:
    """A plant-model document; ``root`` is always the PlantModel node."""

    root: XmlNode

    @property
    def conceptual_items(self) -> list[XmlNode]:
        return [c for c in self.root.children
                if c.tag not in ("Drawing", "ShapeCatalogue")]

    @property
    def drawing(self) -> XmlNode | None:
        return self.root.find("Drawing")

    @property
    def shape_catalogue(self) -> XmlNode | None:
        return self.root.find("ShapeCatalogue")

    @property
    def is_full(self) -> bool:
        return self.drawing is not None or self.shape_catalogue is not None

    def walk(self):
        return self.root.walk()


def empty_plant_model() -> DexpiDocument:
    return DexpiDocument(XmlNode("PlantModel", {
        "SchemaVersion": SCHEMA_VERSION,
        "OriginatingSystem": ORIGINATING_SYSTEM,
    }))


# ── Emission: graph -> conceptual document ───────────────────────────────────


def _nozzle_xml_id(el: PidElement, nozzle: Nozzle) -> str:
    return f"{el.id}.{nozzle.id}"


def _attrs_node(attributes: list[Attribute]) -> XmlNode:
    children = []
    for a in attributes:
        attrs = {"Name": a.name, "Value": a.value}
        if a.unit is not None:
            attrs["Units"] = a.unit
        children.append(XmlNode("GenericAttribute", attrs))
    return XmlNode("GenericAttributes", {}, children)


def _element_node(el: PidElement) -> XmlNode:
    tag = "Equipment" if el.kind == KIND_EQUIPMENT else "PipingComponent"
    attrs = {
        "ID": el.id,
        "ComponentClass": el.component_class.name,
        "ComponentClassURI": el.component_class.uri,
        "ComponentName": el.component_name,
    }
    if el.kind != _DEFAULT_KIND[tag]:
        attrs["ComponentType"] = el.kind
    children: list[XmlNode] = []
    if el.attributes:
        children.append(_attrs_node(el.attributes))
    for noz in el.nozzles:
        noz_id = _nozzle_xml_id(el, noz)
        nodes = [XmlNode("Node", {"ID": f"{noz_id}.{node.id}"}) for node in noz.nodes]
        children.append(XmlNode("Nozzle", {"ID": noz_id}, nodes))
    return XmlNode(tag, attrs, children)


def _connection_node(graph: PidGraph, conn: PidConnection) -> XmlNode:
    attrs = {"ID": conn.id}
    if conn.line_number is not None:
        attrs["LineNumber"] = conn.line_number
    seg_children: list[XmlNode] = []
    if conn.attributes:
        seg_children.append(_attrs_node(conn.attributes))
    src_el = graph.elements[conn.source.element_id]
    dst_el = graph.elements[conn.target.element_id]
    seg_children.append(XmlNode("Connection", {
        "FromID": conn.source.element_id,
        "FromNode": f"{src_el.id}.{conn.source.nozzle_id}",
        "ToID": conn.target.element_id,
        "ToNode": f"{dst_el.id}.{conn.target.nozzle_id}",
    }))
    segment = XmlNode("PipingNetworkSegment", {"ID": f"{conn.id}.SEG"}, seg_children)
    return XmlNode("PipingNetworkSystem", attrs, [segment])


def _loop_node(loop: ActuationLoop) -> XmlNode:
    children = [
        XmlNode("InstrumentationLoopFunction", {"ID": f"{loop.id}.ILF"}),
        XmlNode("ProcessInstrumentationFunction", {"ID": f"{loop.id}.PIF"},
                [XmlNode("ActuatingFunction", {"ID": f"{loop.id}.AF"})]),
    ]
    for i, (src, dst) in enumerate(loop.information_flows, start=1):
        children.append(XmlNode("InformationFlow", {
            "ID": f"{loop.id}.IF{i}", "FromID": src, "ToID": dst,
        }))
    for role, target in loop.associations:
        children.append(XmlNode("Association", {"Type": role, "ItemID": target}))
    return XmlNode("ActuatingSystem",
                   {"ID": loop.id, "ComponentName": loop.loop_tag}, children)


def emit_conceptual(graph: PidGraph) -> DexpiDocument:
    """Translate a valid graph into a conceptual-only document.

    Ordering is stable: elements by id, then connections, then loops.
    Layout fields on the graph are intentionally not emitted here; use
    merge_layout for the drawing parts.
    """
    diags = validate_graph(graph)
    if has_errors(diags):
        raise ValueError("cannot emit an invalid graph: "
                         + "; ".join(str(d) for d in diags))
    doc = empty_plant_model()
    for el_id in sorted(graph.elements):
        doc.root.children.append(_element_node(graph.elements[el_id]))
    for conn_id in sorted(graph.connections):
        doc.root.children.append(_connection_node(graph, graph.connections[conn_id]))
    for loop_id in sorted(graph.loops):
        doc.root.children.append(_loop_node(graph.loops[loop_id]))
    return doc


# ── Layout merge: conceptual -> full document ────────────────────────────────


def _position_nodes(position: tuple[float, float],
                    scale: tuple[float, float]) -> list[XmlNode]:
    return [
        XmlNode("Position", {}, [XmlNode("Location",
                                         {"X": f(position[0]), "Y": f(position[1])})]),
        XmlNode("Scale", {"X": f(scale[0]), "Y": f(scale[1])}),
    ]


def _centerline_node(points: list[tuple[float, float]]) -> XmlNode:
    coords = [XmlNode("Coordinate", {"X": f(x), "Y": f(y)}) for x, y in points]
    return XmlNode("CenterLine", {}, coords)


def _shape_node(class_name: str, primitives) -> XmlNode:
    children = []
    for prim in primitives:
        if isinstance(prim, Line):
            children.append(XmlNode("Line", {
                "X1": f(prim.x1), "Y1": f(prim.y1), "X2": f(prim.x2), "Y2": f(prim.y2)}))
        elif isinstance(prim, Arc):
            children.append(XmlNode("Arc", {
                "CX": f(prim.cx), "CY": f(prim.cy), "RX": f(prim.rx), "RY": f(prim.ry),
                "StartAngle": f(prim.start_deg), "EndAngle": f(prim.end_deg)}))
    return XmlNode("Shape", {"ComponentClass": class_name}, children)


def _rect_node(tag: str, min_x: float, min_y: float,
               max_x: float, max_y: float) -> XmlNode:
    return XmlNode(tag, {}, [
        XmlNode("Min", {"X": f(min_x), "Y": f(min_y)}),
        XmlNode("Max", {"X": f(max_x), "Y": f(max_y)}),
    ])


def merge_layout(doc: DexpiDocument, layout: LayoutResult,
                 margin: float = 10.0) -> DexpiDocument:
    """Produce the full document: element positions, segment centerlines,
    a Drawing node and the ShapeCatalogue.  The input must be
    conceptual-only and fully covered by the layout."""
    if doc.is_full:
        raise ValueError("document is already full (layout merged twice?)")

    out = DexpiDocument(copy.deepcopy(doc.root))
    classes: set[str] = set()
    for node in out.root.children:
        if node.tag in ELEMENT_TAGS:
            el_id = node.attrs.get("ID", "")
            placement = layout.element_placements.get(el_id)
            if placement is None:
                raise ValueError(f"layout has no placement for element {el_id!r}")
            node.children[0:0] = _position_nodes(placement.position, placement.scale)
            classes.add(node.attrs.get("ComponentClass", ""))
        elif node.tag == "PipingNetworkSystem":
            conn_id = node.attrs.get("ID", "")
            route = layout.routes.get(conn_id)
            if route is None:
                raise ValueError(f"layout has no route for connection {conn_id!r}")
            segment = node.find("PipingNetworkSegment")
            if segment is not None:
                idx = len(segment.children)
                for i, child in enumerate(segment.children):
                    if child.tag == "Connection":
                        idx = i
                        break
                segment.children.insert(idx, _centerline_node(route))

    ext = layout.extent.expanded(margin)
    drawing = XmlNode("Drawing", {"Name": "PID-0001", "Title": "Generated P&ID"}, [
        _rect_node("Extent", ext.min_x, ext.min_y, ext.max_x, ext.max_y),
        _rect_node("Border", ext.min_x, ext.min_y, ext.max_x, ext.max_y),
    ])
    catalogue = XmlNode("ShapeCatalogue", {}, [
        _shape_node(name, prims)
        for name, prims in build_shape_catalogue(classes).items()
    ])
    out.root.children.append(drawing)
    out.root.children.append(catalogue)
    return out


# ── Serialization ────────────────────────────────────────────────────────────


def _write_node(node: XmlNode, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    attrs = "".join(f' {k}="{xml_escape(v, quote=True)}"' for k, v in node.attrs.items())
    if not node.children and node.text is None:
        out.append(f"{pad}<{node.tag}{attrs}/>")
        return
    if not node.children:
        out.append(f"{pad}<{node.tag}{attrs}>{xml_escape(node.text)}</{node.tag}>")
        return
    out.append(f"{pad}<{node.tag}{attrs}>")
    for child in node.children:
        _write_node(child, depth + 1, out)
    out.append(f"{pad}</{node.tag}>")


def serialize_xml(doc: DexpiDocument) -> str:
    """Well-formed UTF-8 XML text; byte-identical for equal documents."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    _write_node(doc.root, 0, out)
    return "\n".join(out) + "\n"


# ── Parsing ──────────────────────────────────────────────────────────────────


def _byte_offset(text: str, line: int, column: int) -> int:
    lines = text.split("\n")
    before = "\n".join(lines[: line - 1])
    offset = len(before.encode("utf-8"))
    if line > 1:
        offset += 1
    offset += len(lines[line - 1][:column].encode("utf-8")) if line <= len(lines) else 0
    return offset


def _from_et(et_node: ET.Element, diags: list[Diagnostic]) -> XmlNode:
    tag = et_node.tag
    if isinstance(tag, str) and tag.startswith("{"):
        local = tag.split("}", 1)[1]
        diags.append(Diagnostic(Severity.WARNING, local,
                                f"namespace stripped from element {tag!r}"))
        tag = local
    node = XmlNode(tag, dict(et_node.attrib))
    text = (et_node.text or "").strip()
    node.children = [_from_et(child, diags) for child in et_node]
    if text:
        if node.children:
            diags.append(Diagnostic(Severity.WARNING, tag,
                                    "mixed text content dropped"))
        else:
            node.text = text
    return node


def parse_xml(text: str) -> tuple[DexpiDocument, list[Diagnostic]]:
    """Best-effort structural parse.

    Unknown node kinds are preserved opaquely with a Warning; a missing ID
    on an identified conceptual item is a Warning; malformed XML yields a
    single Error diagnostic carrying the line, column and byte offset.
    """
    diags: list[Diagnostic] = []
    try:
        et_root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(text, line, column)
        diags.append(Diagnostic(
            Severity.ERROR, None,
            f"malformed XML: {exc.msg.split(':')[0]} at line {line}, "
            f"column {column} (byte {offset})"))
        return empty_plant_model(), diags

    root = _from_et(et_root, diags)
    if root.tag != "PlantModel":
        diags.append(Diagnostic(Severity.WARNING, root.tag,
                                f"root element is {root.tag!r}, expected PlantModel"))

    seen_ids: set[str] = set()
    for node in root.walk():
        if node.tag not in _KNOWN_TAGS:
            diags.append(Diagnostic(Severity.WARNING, node.attrs.get("ID") or node.tag,
                                    f"unknown node kind {node.tag!r} preserved"))
        if node.tag in _IDENTIFIED_TAGS:
            node_id = node.attrs.get("ID")
            if not node_id:
                diags.append(Diagnostic(Severity.WARNING, node.tag,
                                        f"{node.tag} node has no ID attribute"))
            elif node_id in seen_ids:
                diags.append(Diagnostic(Severity.WARNING, node_id,
                                        f"duplicate ID {node_id!r}"))
            else:
                seen_ids.add(node_id)
    return DexpiDocument(root), diags


# ── Extraction: document -> graph ────────────────────────────────────────────


def _parse_float_pair(node: XmlNode, x_key: str = "X",
                      y_key: str = "Y") -> tuple[float, float] | None:
    try:
        return (float(node.attrs[x_key]), float(node.attrs[y_key]))
    except (KeyError, ValueError):
        return None


def _attributes_of(node: XmlNode) -> list[Attribute]:
    out: list[Attribute] = []
    holder = node.find("GenericAttributes")
    if holder is None:
        return out
    for entry in holder.find_all("GenericAttribute"):
        name = entry.attrs.get("Name")
        if not name:
            continue
        out.append(Attribute(name, entry.attrs.get("Value", ""),
                             entry.attrs.get("Units")))
    return out


def _strip_prefix(value: str, prefix: str) -> str:
    return value[len(prefix):] if value.startswith(prefix) else value


def _element_from_node(node: XmlNode, diags: list[Diagnostic]) -> PidElement | None:
    el_id = node.attrs.get("ID")
    if not el_id:
        diags.append(Diagnostic(Severity.ERROR, node.tag,
                                f"{node.tag} without ID skipped"))
        return None
    kind = node.attrs.get("ComponentType") or _DEFAULT_KIND[node.tag]
    cc = ComponentClass(node.attrs.get("ComponentClass", ""),
                        node.attrs.get("ComponentClassURI", ""))
    nozzles: list[Nozzle] = []
    for noz_node in node.find_all("Nozzle"):
        noz_id = _strip_prefix(noz_node.attrs.get("ID", ""), f"{el_id}.")
        nodes = [Node(_strip_prefix(n.attrs.get("ID", ""), f"{el_id}.{noz_id}."))
                 for n in noz_node.find_all("Node")]
        nozzles.append(Nozzle(noz_id or f"N{len(nozzles) + 1}", nodes or [Node("1")]))
    position = scale = None
    pos_node = node.find("Position")
    if pos_node is not None and pos_node.find("Location") is not None:
        position = _parse_float_pair(pos_node.find("Location"))
    scale_node = node.find("Scale")
    if scale_node is not None:
        scale = _parse_float_pair(scale_node)
    return PidElement(
        id=el_id, kind=kind, component_class=cc,
        component_name=node.attrs.get("ComponentName", ""),
        nozzles=nozzles, attributes=_attributes_of(node),
        position=position, scale=scale,
    )


def _connection_from_node(node: XmlNode, graph: PidGraph,
                          diags: list[Diagnostic]) -> PidConnection | None:
    conn_id = node.attrs.get("ID") or f"PIPE-{len(graph.connections) + 1}"
    segment = node.find("PipingNetworkSegment")
    if segment is None:
        diags.append(Diagnostic(Severity.ERROR, conn_id,
                                "PipingNetworkSystem has no segment; dropped"))
        return None
    connection = segment.find("Connection")
    if connection is None:
        diags.append(Diagnostic(Severity.ERROR, conn_id,
                                "segment has no Connection child; dropped"))
        return None
    ends: list[ConnectionEnd] = []
    for id_key, node_key in (("FromID", "FromNode"), ("ToID", "ToNode")):
        el_id = connection.attrs.get(id_key, "")
        el = graph.elements.get(el_id)
        if el is None:
            diags.append(Diagnostic(Severity.ERROR, conn_id,
                                    f"{id_key} references unknown element {el_id!r}; "
                                    "connection dropped"))
            return None
        nozzle_id = _strip_prefix(connection.attrs.get(node_key, ""), f"{el_id}.")
        if not nozzle_id or el.nozzle(nozzle_id) is None:
            if not el.nozzles:
                diags.append(Diagnostic(Severity.ERROR, conn_id,
                                        f"element {el_id!r} has no nozzles; "
                                        "connection dropped"))
                return None
            if nozzle_id:
                diags.append(Diagnostic(Severity.WARNING, conn_id,
                                        f"unknown nozzle {nozzle_id!r} on {el_id!r}; "
                                        "using first nozzle"))
            nozzle_id = el.nozzles[0].id
        ends.append(ConnectionEnd(el_id, nozzle_id))

    centerline = None
    cl_node = segment.find("CenterLine")
    if cl_node is not None:
        pts = [p for c in cl_node.find_all("Coordinate")
               if (p := _parse_float_pair(c)) is not None]
        centerline = pts if len(pts) >= 2 else None
    return PidConnection(
        id=conn_id, source=ends[0], target=ends[1],
        line_number=node.attrs.get("LineNumber"),
        attributes=_attributes_of(segment), centerline=centerline,
    )


def _loop_from_node(node: XmlNode, graph: PidGraph,
                    diags: list[Diagnostic]) -> ActuationLoop | None:
    loop_id = node.attrs.get("ID") or f"LOOP-{len(graph.loops) + 1}"
    associations = [(a.attrs.get("Type", ""), a.attrs.get("ItemID", ""))
                    for a in node.find_all("Association")]
    flows = [(fl.attrs.get("FromID", ""), fl.attrs.get("ToID", ""))
             for fl in node.find_all("InformationFlow")]
    sensing = next((t for role, t in associations if role == "senses"), None)
    actuated = next((t for role, t in associations if role == "actuates"), None)
    if sensing is None or actuated is None:
        diags.append(Diagnostic(Severity.ERROR, loop_id,
                                "loop lacks senses/actuates associations; dropped"))
        return None
    return ActuationLoop(
        id=loop_id, loop_tag=node.attrs.get("ComponentName", ""),
        sensing_target=sensing, actuated_target=actuated,
        associations=associations, information_flows=flows,
    )


def graph_from_document(doc: DexpiDocument) -> tuple[PidGraph, list[Diagnostic]]:
    """Inverse of emit_conceptual on the conceptual content.

    Layout parts (Position/Scale, CenterLine), when present, populate the
    optional fields.  Content violating graph invariants is reported and
    dropped, never repaired silently.
    """
    graph = PidGraph()
    diags: list[Diagnostic] = []
    for node in doc.conceptual_items:
        if node.tag in ELEMENT_TAGS:
            el = _element_from_node(node, diags)
            if el is not None:
                graph.elements[el.id] = el
    for node in doc.conceptual_items:
        if node.tag == "PipingNetworkSystem":
            conn = _connection_from_node(node, graph, diags)
            if conn is not None:
                graph.connections[conn.id] = conn
    for node in doc.conceptual_items:
        if node.tag == "ActuatingSystem":
            loop = _loop_from_node(node, graph, diags)
            if loop is not None:
                graph.loops[loop.id] = loop

    for diag in validate_graph(graph):
        diags.append(diag)
    return graph, diags
