"""Domain model for the P&ID conceptual content.

A :class:`PidGraph` holds the engineering content of a diagram — equipment
and instruments with their nozzles, piping connections, and control
(actuation) loops — independent of any drawing geometry.  All other
modules build on these types.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

# ── Component taxonomy ───────────────────────────────────────────────────────

DEFAULT_CATALOGUE_BASE = "http://sandbox.dexpi.org/rdl"

KIND_EQUIPMENT = "Equipment"
KIND_INSTRUMENT = "Instrument"
KIND_ACTUATING = "ActuatingComponent"

KINDS = frozenset({KIND_EQUIPMENT, KIND_INSTRUMENT, KIND_ACTUATING})

# Closed shipped taxonomy: class name -> (id abbreviation, default kind).
# Extensible at runtime via a config file, see Taxonomy.from_file.
_SHIPPED_CLASSES: dict[str, tuple[str, str]] = {
    "Tank": ("TK", KIND_EQUIPMENT),
    "Pump": ("PP", KIND_EQUIPMENT),
    "HeatExchanger": ("HX", KIND_EQUIPMENT),
    "GlobeValve": ("GV", KIND_INSTRUMENT),
    "BallValve": ("BV", KIND_INSTRUMENT),
    "ButterflyValve": ("BFV", KIND_INSTRUMENT),
    "SwingCheckValve": ("SCV", KIND_INSTRUMENT),
    "SpringLoadedGlobeSafetyValve": ("SV", KIND_INSTRUMENT),
    "PipeReducer": ("RD", KIND_INSTRUMENT),
    "PipeOffPageConnector": ("OPC", KIND_INSTRUMENT),
    "Equipment": ("EQ", KIND_EQUIPMENT),
    "PipingComponent": ("PC", KIND_INSTRUMENT),
}

FALLBACK_CLASS = "Equipment"


@dataclass(frozen=True)
class ComponentClass:
    """A canonical component class plus its reference-data locator."""

    name: str
    uri: str


class Taxonomy:
    """The set of component classes known to the toolkit.

    The shipped inventory covers tanks, pumps, heat exchangers, the common
    valve families, pipe reducers and off-page connectors, with the generic
    fallbacks ``Equipment`` and ``PipingComponent``.  A config file (one
    ``Name=URI-suffix`` line per class) extends it.
    """

    def __init__(self, extra: dict[str, str] | None = None,
                 base: str = DEFAULT_CATALOGUE_BASE):
        self.base = base.rstrip("/")
        self._suffixes: dict[str, str] = {name: name for name in _SHIPPED_CLASSES}
        self._kinds: dict[str, str] = {n: k for n, (_, k) in _SHIPPED_CLASSES.items()}
        self._abbrevs: dict[str, str] = {n: a for n, (a, _) in _SHIPPED_CLASSES.items()}
        for name, suffix in (extra or {}).items():
            self.add(name, suffix)

    @classmethod
    def from_file(cls, path: str | Path, base: str = DEFAULT_CATALOGUE_BASE) -> "Taxonomy":
        """Load extra classes from a `Name=URI-suffix` plain-text file."""
        extra: dict[str, str] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad taxonomy line (expected Name=URI-suffix): {line!r}")
            name, suffix = line.split("=", 1)
            extra[name.strip()] = suffix.strip()
        return cls(extra, base=base)

    def add(self, name: str, suffix: str | None = None,
            kind: str = KIND_EQUIPMENT) -> None:
        if not name:
            raise ValueError("class name must be non-empty")
        self._suffixes[name] = suffix or name
        self._kinds.setdefault(name, kind)
        abbrev = "".join(c for c in name.upper() if c.isalpha())[:3] or "XX"
        self._abbrevs.setdefault(name, abbrev)

    def __contains__(self, name: str) -> bool:
        return name in self._suffixes

    @property
    def names(self) -> list[str]:
        return sorted(self._suffixes)

    def component_class(self, name: str) -> ComponentClass:
        """Canonical ComponentClass for a known name (KeyError otherwise)."""
        suffix = self._suffixes[name]
        return ComponentClass(name, f"{self.base}/{suffix}")

    def resolve(self, name: str) -> ComponentClass:
        """Like component_class, but unknown names map to the generic fallback."""
        if name in self._suffixes:
            return self.component_class(name)
        return self.component_class(FALLBACK_CLASS)

    def kind_for(self, name: str) -> str:
        return self._kinds.get(name, KIND_EQUIPMENT)

    def abbrev_for(self, name: str) -> str:
        return self._abbrevs.get(name, "EQ")


DEFAULT_TAXONOMY = Taxonomy()

# ── Graph node types ─────────────────────────────────────────────────────────


@dataclass
class Node:
    """A connection attachment point inside a nozzle."""

    id: str


@dataclass
class Nozzle:
    """A connection port on an element; carries one or more nodes."""

    id: str
    nodes: list[Node] = field(default_factory=list)


@dataclass
class Attribute:
    name: str
    value: str
    unit: str | None = None


@dataclass
class PidElement:
    """One equipment, instrument or actuating component.

    ``component_name`` is the user-facing tag (e.g. ``T-01``) and must be
    unique across the graph; ``id`` is the internal, emitter-assigned handle.
    ``position``/``scale`` are drawing data (mm) and are applied atomically.
    """

    id: str
    kind: str
    component_class: ComponentClass
    component_name: str
    nozzles: list[Nozzle] = field(default_factory=list)
    attributes: list[Attribute] = field(default_factory=list)
    position: tuple[float, float] | None = None
    scale: tuple[float, float] | None = None

    def nozzle(self, nozzle_id: str) -> Nozzle | None:
        for n in self.nozzles:
            if n.id == nozzle_id:
                return n
        return None


@dataclass(frozen=True)
class ConnectionEnd:
    """(element id, nozzle id) endpoint of a piping connection."""

    element_id: str
    nozzle_id: str


@dataclass
class PidConnection:
    """A directed piping connection between two element nozzles."""

    id: str
    source: ConnectionEnd
    target: ConnectionEnd
    line_number: str | None = None
    attributes: list[Attribute] = field(default_factory=list)
    centerline: list[tuple[float, float]] | None = None


@dataclass
class ActuationLoop:
    """A control loop: a sensed target driving an actuated element."""

    id: str
    loop_tag: str
    sensing_target: str
    actuated_target: str
    associations: list[tuple[str, str]] = field(default_factory=list)
    information_flows: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class PidGraph:
    """The in-memory conceptual model: elements, connections, loops."""

    elements: dict[str, PidElement] = field(default_factory=dict)
    connections: dict[str, PidConnection] = field(default_factory=dict)
    loops: dict[str, ActuationLoop] = field(default_factory=dict)

    def element_by_tag(self, tag: str) -> PidElement | None:
        for el in self.elements.values():
            if el.component_name == tag:
                return el
        return None

    def connection_by_line(self, line_number: str) -> PidConnection | None:
        for conn in self.connections.values():
            if conn.line_number == line_number:
                return conn
        return None

    @property
    def is_empty(self) -> bool:
        return not (self.elements or self.connections or self.loops)


# ── Diagnostics ──────────────────────────────────────────────────────────────


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    PRUNED = "pruned"


@dataclass
class Diagnostic:
    """One validation finding: severity, the offending id (if any), message."""

    severity: Severity
    target_id: str | None
    message: str

    def __str__(self) -> str:
        where = f" [{self.target_id}]" if self.target_id else ""
        return f"{self.severity.value}{where}: {self.message}"


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)


# ── Validation ───────────────────────────────────────────────────────────────


def validate_graph(graph: PidGraph,
                   taxonomy: Taxonomy | None = None) -> list[Diagnostic]:
    """Check every graph invariant; returns diagnostics, empty iff valid.

    Pure and deterministic: the result is sorted by offending id then message.
    """
    tax = taxonomy or DEFAULT_TAXONOMY
    diags: list[Diagnostic] = []

    def err(target_id: str | None, message: str) -> None:
        diags.append(Diagnostic(Severity.ERROR, target_id, message))

    all_ids: dict[str, str] = {}
    for category, ids in (("element", graph.elements),
                          ("connection", graph.connections),
                          ("loop", graph.loops)):
        for item_id, item in ids.items():
            if item.id != item_id:
                err(item_id, f"{category} keyed as {item_id!r} but carries id {item.id!r}")
            if item_id in all_ids:
                err(item_id, f"id also used by a {all_ids[item_id]}")
            all_ids[item_id] = category

    seen_tags: dict[str, str] = {}
    for el_id in sorted(graph.elements):
        el = graph.elements[el_id]
        if el.kind not in KINDS:
            err(el_id, f"unknown element kind {el.kind!r}")
        if el.component_class.name not in tax:
            err(el_id, f"component class {el.component_class.name!r} not in taxonomy")
        if not el.component_class.uri:
            err(el_id, "component class uri is empty")
        if not el.component_name:
            err(el_id, "component name (tag) is empty")
        elif el.component_name in seen_tags:
            err(el_id, f"duplicate component name {el.component_name!r} "
                       f"(also on {seen_tags[el.component_name]})")
        else:
            seen_tags[el.component_name] = el_id
        if not el.nozzles:
            err(el_id, "element has no nozzles")
        noz_ids: set[str] = set()
        for noz in el.nozzles:
            if noz.id in noz_ids:
                err(el_id, f"duplicate nozzle id {noz.id!r}")
            noz_ids.add(noz.id)
            if not noz.nodes:
                err(el_id, f"nozzle {noz.id!r} has no nodes")
            node_ids = [n.id for n in noz.nodes]
            if len(node_ids) != len(set(node_ids)):
                err(el_id, f"nozzle {noz.id!r} has duplicate node ids")
        if (el.position is None) != (el.scale is None):
            err(el_id, "position and scale must be set together")
        if el.scale is not None and (el.scale[0] <= 0 or el.scale[1] <= 0):
            err(el_id, f"scale must be positive, got {el.scale}")

    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        for label, end in (("source", conn.source), ("target", conn.target)):
            el = graph.elements.get(end.element_id)
            if el is None:
                err(conn_id, f"{label} references missing element {end.element_id!r}")
            elif el.nozzle(end.nozzle_id) is None:
                err(conn_id, f"{label} references missing nozzle {end.nozzle_id!r} "
                             f"on {end.element_id}")
        if conn.source == conn.target:
            err(conn_id, "connection loops back to its own nozzle")
        if conn.centerline is not None and len(conn.centerline) < 2:
            err(conn_id, "centerline needs at least 2 points")

    referable = set(graph.elements) | set(graph.connections)
    for loop_id in sorted(graph.loops):
        loop = graph.loops[loop_id]
        if not loop.loop_tag:
            err(loop_id, "loop tag is empty")
        if loop.sensing_target not in referable:
            err(loop_id, f"sensing target {loop.sensing_target!r} does not exist")
        if loop.actuated_target not in graph.elements:
            err(loop_id, f"actuated target {loop.actuated_target!r} is not an element")
        for role, target in loop.associations:
            if target not in referable:
                err(loop_id, f"association {role!r} references missing id {target!r}")
        for src, dst in loop.information_flows:
            if src not in referable or dst not in referable:
                err(loop_id, f"information flow {src!r}->{dst!r} references missing ids")
        if not _flows_form_path(loop):
            err(loop_id, "information flows do not form a path from sensing "
                         "target to actuated target")

    diags.sort(key=lambda d: (d.target_id or "", d.message))
    return diags


def _flows_form_path(loop: ActuationLoop) -> bool:
    # Follow flows from the sensing target; each hop must be unambiguous and
    # every flow must be used exactly once to reach the actuated target.
    succ: dict[str, list[str]] = {}
    for src, dst in loop.information_flows:
        succ.setdefault(src, []).append(dst)
    if any(len(v) > 1 for v in succ.values()):
        return False
    here = loop.sensing_target
    hops = 0
    total = len(loop.information_flows)
    while here != loop.actuated_target and hops <= total:
        nxt = succ.get(here)
        if not nxt:
            return False
        here = nxt[0]
        hops += 1
    return here == loop.actuated_target and hops == total
