"""The build-step DSL: the intermediate representation between agent output
and the plant-model XML.

A document is a small state machine of build actions (AddElement,
AddConnection, AddActuation, SetAttribute) linked by ``next`` transitions.
Documents are serialized as JSON text (``.pid.dsl.json``), validated and
pruned of floating steps, and lowered deterministically to a
:class:`~pidcopilot.model.PidGraph`.  Steps reference elements by their
user-facing tags; internal ids are minted during lowering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .model import (
    ActuationLoop,
    Attribute,
    ConnectionEnd,
    DEFAULT_TAXONOMY,
    Diagnostic,
    Node,
    Nozzle,
    PidConnection,
    PidElement,
    PidGraph,
    Severity,
    Taxonomy,
    has_errors,
    validate_graph,
)

DSL_VERSION = "1"

ACTION_ADD_ELEMENT = "AddElement"
ACTION_ADD_CONNECTION = "AddConnection"
ACTION_ADD_ACTUATION = "AddActuation"
ACTION_SET_ATTRIBUTE = "SetAttribute"

ACTIONS = (ACTION_ADD_ELEMENT, ACTION_ADD_CONNECTION,
           ACTION_ADD_ACTUATION, ACTION_SET_ATTRIBUTE)

# Documented payload key order per action; optional keys are omitted when
# absent so serialization stays bit-exact.
_PAYLOAD_KEYS: dict[str, tuple[tuple[str, bool], ...]] = {
    ACTION_ADD_ELEMENT: (
        ("component_class", True),
        ("tag", True),
        ("kind", False),
        ("nozzle_count", False),
        ("nozzle_ids", False),
        ("attributes", False),
    ),
    ACTION_ADD_CONNECTION: (
        ("from", True),
        ("to", True),
        ("line_number", False),
        ("attributes", False),
    ),
    ACTION_ADD_ACTUATION: (
        ("loop_tag", True),
        ("sensing_target", True),
        ("actuated_target", True),
    ),
    ACTION_SET_ATTRIBUTE: (
        ("target", True),
        ("name", True),
        ("value", True),
        ("unit", False),
    ),
}


class DslError(Exception):
    """Base class for DSL parse failures."""


class DslSyntaxError(DslError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class DslSchemaError(DslError):
    pass


@dataclass
class DslStep:
    """One build action plus its FSM transitions.

    ``payload`` carries the action-specific fields; ``provenance`` is the
    (start, end) character span of the originating prompt utterance.
    """

    id: str
    action: str
    payload: dict[str, Any] = field(default_factory=dict)
    next: list[str] = field(default_factory=list)
    provenance: tuple[int, int] | None = None


@dataclass
class DslDocument:
    version: str = DSL_VERSION
    steps: list[DslStep] = field(default_factory=list)
    entry: str | None = None

    def step(self, step_id: str) -> DslStep | None:
        for s in self.steps:
            if s.id == step_id:
                return s
        return None


def empty_document() -> DslDocument:
    return DslDocument(version=DSL_VERSION, steps=[], entry=None)


# ── Parse / serialize ────────────────────────────────────────────────────────


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise DslSchemaError(f"unknown key(s) {sorted(unknown)} in {where}")


def _parse_endpoint(value: Any, where: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise DslSchemaError(f"{where} must be an object with a tag")
    _check_keys(value, {"tag", "nozzle"}, where)
    tag = value.get("tag")
    if not isinstance(tag, str) or not tag:
        raise DslSchemaError(f"{where} is missing a non-empty tag")
    nozzle = value.get("nozzle")
    if nozzle is not None and (not isinstance(nozzle, str) or not nozzle):
        raise DslSchemaError(f"{where} nozzle must be a non-empty string")
    out: dict[str, Any] = {"tag": tag}
    if nozzle is not None:
        out["nozzle"] = nozzle
    return out


def _parse_attributes(value: Any, where: str) -> list[dict[str, Any]]:
    if not isinstance(value, list):
        raise DslSchemaError(f"{where} attributes must be a list")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, dict):
            raise DslSchemaError(f"{where} attributes[{i}] must be an object")
        _check_keys(item, {"name", "value", "unit"}, f"{where} attributes[{i}]")
        name = item.get("name")
        val = item.get("value")
        if not isinstance(name, str) or not name or not isinstance(val, str):
            raise DslSchemaError(f"{where} attributes[{i}] needs string name and value")
        unit = item.get("unit")
        if unit is not None and not isinstance(unit, str):
            raise DslSchemaError(f"{where} attributes[{i}] unit must be a string")
        entry: dict[str, Any] = {"name": name, "value": val}
        if unit is not None:
            entry["unit"] = unit
        out.append(entry)
    return out


def _validate_payload(action: str, payload: Any, step_id: str) -> dict[str, Any]:
    where = f"step {step_id!r}"
    if not isinstance(payload, dict):
        raise DslSchemaError(f"{where} payload must be an object")
    keys = _PAYLOAD_KEYS[action]
    _check_keys(payload, {k for k, _ in keys}, f"{where} payload")
    for key, required in keys:
        if required and (key not in payload or payload[key] in ("", None)):
            raise DslSchemaError(f"{where} ({action}) is missing payload field {key!r}")

    out: dict[str, Any] = {}
    for key, _ in keys:
        if key not in payload or payload[key] is None:
            continue
        value = payload[key]
        if key in ("from", "to"):
            value = _parse_endpoint(value, f"{where} {key}")
        elif key == "attributes":
            value = _parse_attributes(value, where)
        elif key == "nozzle_count":
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise DslSchemaError(f"{where} nozzle_count must be a positive integer")
        elif key == "nozzle_ids":
            if (not isinstance(value, list) or not value
                    or any(not isinstance(v, str) or not v for v in value)):
                raise DslSchemaError(f"{where} nozzle_ids must be non-empty strings")
            if len(set(value)) != len(value):
                raise DslSchemaError(f"{where} nozzle_ids contains duplicates")
        elif not isinstance(value, str) or not value:
            raise DslSchemaError(f"{where} payload field {key!r} must be a non-empty string")
        out[key] = value
    return out


def parse_step(obj: Any, index: int, require_id: bool = True) -> DslStep:
    """Parse one step object; used by documents and by agent fragments."""
    where = f"steps[{index}]"
    if not isinstance(obj, dict):
        raise DslSchemaError(f"{where} must be an object")
    _check_keys(obj, {"id", "action", "payload", "next", "provenance"}, where)

    step_id = obj.get("id")
    if step_id is None and not require_id:
        step_id = ""
    if not isinstance(step_id, str) or (require_id and not step_id):
        raise DslSchemaError(f"{where} is missing a non-empty id")

    action = obj.get("action")
    if action not in ACTIONS:
        raise DslSchemaError(f"{where} has unknown action {action!r}")

    payload = _validate_payload(action, obj.get("payload", {}), step_id or f"#{index}")

    nxt = obj.get("next", [])
    if not isinstance(nxt, list) or any(not isinstance(n, str) or not n for n in nxt):
        raise DslSchemaError(f"{where} next must be a list of step ids")

    provenance = obj.get("provenance")
    if provenance is not None:
        ok = (isinstance(provenance, (list, tuple)) and len(provenance) == 2
              and all(isinstance(v, int) and not isinstance(v, bool) for v in provenance)
              and 0 <= provenance[0] <= provenance[1])
        if not ok:
            raise DslSchemaError(f"{where} provenance must be [start, end] offsets")
        provenance = (provenance[0], provenance[1])

    return DslStep(id=step_id, action=action, payload=payload,
                   next=list(nxt), provenance=provenance)


def parse_dsl(text: str) -> DslDocument:
    """Parse the JSON serialization into a document.

    Raises DslSyntaxError for malformed JSON (with line/column) and
    DslSchemaError for unknown actions, missing payload fields, duplicate
    step ids, or dangling transitions.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DslSyntaxError(exc.msg, exc.lineno, exc.colno) from exc

    if not isinstance(data, dict):
        raise DslSchemaError("top level must be an object")
    _check_keys(data, {"version", "entry", "steps"}, "document")

    version = data.get("version")
    if version != DSL_VERSION:
        raise DslSchemaError(f"unsupported version {version!r} (expected {DSL_VERSION!r})")

    raw_steps = data.get("steps")
    if not isinstance(raw_steps, list):
        raise DslSchemaError("steps must be a list")

    steps: list[DslStep] = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_steps):
        step = parse_step(raw, i)
        if step.id in seen:
            raise DslSchemaError(f"duplicate step id {step.id!r}")
        seen.add(step.id)
        steps.append(step)

    for step in steps:
        for ref in step.next:
            if ref not in seen:
                raise DslSchemaError(f"step {step.id!r} transitions to unknown step {ref!r}")

    entry = data.get("entry")
    if steps:
        if not isinstance(entry, str) or entry not in seen:
            raise DslSchemaError(f"entry {entry!r} is not a step id")
    elif entry is not None:
        raise DslSchemaError("entry must be null when there are no steps")

    return DslDocument(version=version, steps=steps, entry=entry)


def step_to_obj(step: DslStep) -> dict[str, Any]:
    payload: dict[str, Any] = {}
    for key, _ in _PAYLOAD_KEYS[step.action]:
        if key in step.payload and step.payload[key] is not None:
            payload[key] = step.payload[key]
    obj: dict[str, Any] = {"id": step.id, "action": step.action,
                           "payload": payload, "next": list(step.next)}
    if step.provenance is not None:
        obj["provenance"] = list(step.provenance)
    return obj


def serialize_dsl(doc: DslDocument) -> str:
    """Bit-exact serialization: fixed key order, 2-space indent, trailing LF."""
    data = {
        "version": doc.version,
        "entry": doc.entry,
        "steps": [step_to_obj(s) for s in doc.steps],
    }
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


# ── Validation and pruning ───────────────────────────────────────────────────


def _reachable_ids(doc: DslDocument) -> list[str]:
    by_id = {s.id: s for s in doc.steps}
    seen: list[str] = []
    seen_set: set[str] = set()
    stack = [doc.entry] if doc.entry in by_id else []
    while stack:
        cur = stack.pop()
        if cur in seen_set or cur not in by_id:
            continue
        seen_set.add(cur)
        seen.append(cur)
        stack.extend(reversed(by_id[cur].next))
    return seen


def _referenced_handles(step: DslStep) -> list[str]:
    """Tags / line handles a step depends on (must be introduced upstream)."""
    p = step.payload
    if step.action == ACTION_ADD_CONNECTION:
        return [p["from"]["tag"], p["to"]["tag"]]
    if step.action == ACTION_SET_ATTRIBUTE:
        return [p["target"]]
    if step.action == ACTION_ADD_ACTUATION:
        return [p["sensing_target"], p["actuated_target"]]
    return []


def _cycle_members(steps: dict[str, DslStep]) -> list[str]:
    """Step ids on some transition cycle, via iterative DFS coloring."""
    color: dict[str, int] = {}
    on_cycle: set[str] = set()
    for root in steps:
        if color.get(root):
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        path: list[str] = []
        while stack:
            node, idx = stack.pop()
            if idx == 0:
                color[node] = 1
                path.append(node)
            succs = [n for n in steps[node].next if n in steps]
            if idx < len(succs):
                stack.append((node, idx + 1))
                nxt = succs[idx]
                if color.get(nxt) == 1:
                    on_cycle.update(path[path.index(nxt):])
                elif not color.get(nxt):
                    stack.append((nxt, 0))
            else:
                color[node] = 2
                path.pop()
    return sorted(on_cycle)


def validate_and_prune(doc: DslDocument) -> tuple[DslDocument, list[Diagnostic]]:
    """Drop floating steps and report flow problems.

    Floating = unreachable from the entry, or referencing tags never
    introduced by a reachable AddElement (respectively line numbers never
    introduced by a kept AddConnection).  Pruned steps are spliced out so
    their successors stay reachable; a pruned forking entry can orphan a
    branch, so the pass runs to a fixpoint.  Cycles among kept steps,
    dangling transitions and execution-order contradictions are Errors and
    block lowering.  Idempotent.
    """
    diags: list[Diagnostic] = []
    current = doc
    while True:
        pruned, pass_diags = _prune_pass(current)
        diags.extend(d for d in pass_diags if d.severity is Severity.PRUNED)
        if len(pruned.steps) == len(current.steps):
            current = pruned
            break
        current = pruned

    by_id = {s.id: s for s in current.steps}
    for step in current.steps:
        for ref in step.next:
            if ref not in by_id:
                diags.append(Diagnostic(Severity.ERROR, step.id,
                                        f"transition to unknown step {ref!r}"))

    cyclic = _cycle_members(by_id)
    if cyclic:
        diags.append(Diagnostic(Severity.ERROR, cyclic[0],
                                f"transition cycle among steps: {', '.join(cyclic)}"))
    else:
        diags.extend(_execution_order_errors(current))
    return current, diags


def _prune_pass(doc: DslDocument) -> tuple[DslDocument, list[Diagnostic]]:
    diags: list[Diagnostic] = []
    by_id = {s.id: s for s in doc.steps}

    reachable = _reachable_ids(doc)
    reachable_set = set(reachable)
    for step in doc.steps:
        if step.id not in reachable_set:
            diags.append(Diagnostic(Severity.PRUNED, step.id,
                                    "unreachable from entry"))

    # Grounding runs to a fixpoint: pruning an AddConnection can unground an
    # actuation that senses its line number.
    kept = dict.fromkeys(reachable)
    while True:
        element_tags = {s.payload["tag"] for sid in kept
                        if (s := by_id[sid]).action == ACTION_ADD_ELEMENT}
        line_numbers = {s.payload["line_number"] for sid in kept
                        if (s := by_id[sid]).action == ACTION_ADD_CONNECTION
                        and s.payload.get("line_number")}
        handles = element_tags | line_numbers
        dropped = []
        for sid in kept:
            step = by_id[sid]
            missing = [h for h in _referenced_handles(step) if h not in handles]
            if step.action == ACTION_ADD_ACTUATION:
                # actuated target must be an element, not a line
                tgt = step.payload["actuated_target"]
                if tgt not in element_tags and tgt not in missing:
                    missing.append(tgt)
            if missing:
                dropped.append((sid, missing))
        if not dropped:
            break
        for sid, missing in dropped:
            del kept[sid]
            diags.append(Diagnostic(
                Severity.PRUNED, sid,
                f"references tag(s) never introduced: {', '.join(sorted(set(missing)))}"))

    # Splice removed steps out of the transition chain.
    removed = {s.id for s in doc.steps if s.id not in kept}

    def splice(targets: list[str]) -> list[str]:
        out: list[str] = []
        visiting: set[str] = set()

        def expand(ref: str) -> None:
            if ref in out or ref in visiting:
                return
            if ref in removed and ref in by_id:
                visiting.add(ref)
                for nxt in by_id[ref].next:
                    expand(nxt)
                visiting.discard(ref)
            else:
                out.append(ref)

        for t in targets:
            expand(t)
        return out

    new_steps = []
    for step in doc.steps:
        if step.id not in kept:
            continue
        new_steps.append(DslStep(
            id=step.id, action=step.action, payload=step.payload,
            next=splice(step.next), provenance=step.provenance,
        ))

    entry = doc.entry
    if entry in removed:
        spliced_entry = splice([entry])
        entry = spliced_entry[0] if spliced_entry else None
    if not new_steps:
        entry = None

    return DslDocument(version=doc.version, steps=new_steps, entry=entry), diags


def _execution_order_errors(doc: DslDocument) -> list[Diagnostic]:
    """Semantic flow checks along the execution order.

    Lowering executes steps topologically, so a handle must be introduced
    before any step that uses it, an element tag may be introduced once,
    and an actuation may not sense and drive the same target.
    """
    diags: list[Diagnostic] = []
    introduced: set[str] = set()
    for step in _topological_order(doc):
        p = step.payload
        for handle in _referenced_handles(step):
            if handle not in introduced:
                diags.append(Diagnostic(
                    Severity.ERROR, step.id,
                    f"uses {handle!r} before any step introduces it"))
        if step.action == ACTION_ADD_ELEMENT:
            tag = p["tag"]
            if tag in introduced:
                diags.append(Diagnostic(Severity.ERROR, step.id,
                                        f"tag {tag!r} introduced more than once"))
            introduced.add(tag)
        elif step.action == ACTION_ADD_CONNECTION:
            if p["from"]["tag"] == p["to"]["tag"] and \
                    p["from"].get("nozzle") is not None and \
                    p["from"].get("nozzle") == p["to"].get("nozzle"):
                diags.append(Diagnostic(Severity.ERROR, step.id,
                                        "connection loops back to its own nozzle"))
            line = p.get("line_number")
            if line:
                if line in introduced:
                    diags.append(Diagnostic(Severity.ERROR, step.id,
                                            f"line number {line!r} introduced more than once"))
                introduced.add(line)
        elif step.action == ACTION_ADD_ACTUATION:
            if p["sensing_target"] == p["actuated_target"]:
                diags.append(Diagnostic(Severity.ERROR, step.id,
                                        "actuation senses and drives the same target"))
    return diags


# ── Lowering: DSL -> graph ───────────────────────────────────────────────────


def _topological_order(doc: DslDocument) -> list[DslStep]:
    # Kahn's algorithm; ready steps picked in document order.
    order_index = {s.id: i for i, s in enumerate(doc.steps)}
    by_id = {s.id: s for s in doc.steps}
    indeg = dict.fromkeys(by_id, 0)
    for step in doc.steps:
        for ref in step.next:
            if ref in indeg:
                indeg[ref] += 1
    ready = sorted((sid for sid, d in indeg.items() if d == 0),
                   key=order_index.__getitem__)
    out: list[DslStep] = []
    while ready:
        sid = ready.pop(0)
        out.append(by_id[sid])
        changed = False
        for ref in by_id[sid].next:
            if ref in indeg:
                indeg[ref] -= 1
                if indeg[ref] == 0:
                    ready.append(ref)
                    changed = True
        if changed:
            ready.sort(key=order_index.__getitem__)
    if len(out) != len(doc.steps):
        raise ValueError("document has transition cycles; run validate_and_prune first")
    return out


class _IdMint:
    def __init__(self) -> None:
        self.counters: dict[str, int] = {}

    def next(self, prefix: str) -> str:
        n = self.counters.get(prefix, 0) + 1
        self.counters[prefix] = n
        return f"{prefix}-{n}"


def _free_nozzle(graph: PidGraph, element: PidElement,
                 exclude: frozenset[str] = frozenset()) -> str:
    """Lowest-index nozzle not used by any connection; creates one if none free."""
    used = set(exclude)
    for conn in graph.connections.values():
        for end in (conn.source, conn.target):
            if end.element_id == element.id:
                used.add(end.nozzle_id)
    for noz in element.nozzles:
        if noz.id not in used:
            return noz.id
    k = len(element.nozzles) + 1
    while element.nozzle(f"N{k}") is not None:
        k += 1
    new_id = f"N{k}"
    element.nozzles.append(Nozzle(new_id, [Node(f"{new_id}-1")]))
    return new_id


def _to_attributes(raw: list[dict[str, Any]] | None) -> list[Attribute]:
    return [Attribute(a["name"], a["value"], a.get("unit")) for a in raw or []]


def dsl_to_graph(doc: DslDocument, taxonomy: Taxonomy | None = None) -> PidGraph:
    """Execute the document's steps into a fresh graph.

    Precondition: validate_and_prune reported no Error diagnostics.  The
    execution order is topological with document-order tie-breaking, ids are
    minted deterministically, and the result always passes validate_graph.
    """
    _, diags = validate_and_prune(doc)
    if has_errors(diags):
        messages = "; ".join(str(d) for d in diags if d.severity is Severity.ERROR)
        raise ValueError(f"document failed flow validation: {messages}")

    tax = taxonomy or DEFAULT_TAXONOMY
    graph = PidGraph()
    mint = _IdMint()

    for step in _topological_order(doc):
        p = step.payload
        if step.action == ACTION_ADD_ELEMENT:
            cc = tax.resolve(p["component_class"])
            kind = p.get("kind") or tax.kind_for(cc.name)
            el_id = mint.next(tax.abbrev_for(cc.name))
            if p.get("nozzle_ids"):
                nozzles = [Nozzle(nid, [Node(f"{nid}-1")]) for nid in p["nozzle_ids"]]
            else:
                count = p.get("nozzle_count", 2)
                nozzles = [Nozzle(f"N{i + 1}", [Node(f"N{i + 1}-1")])
                           for i in range(count)]
            graph.elements[el_id] = PidElement(
                id=el_id, kind=kind, component_class=cc,
                component_name=p["tag"], nozzles=nozzles,
                attributes=_to_attributes(p.get("attributes")),
            )
        elif step.action == ACTION_ADD_CONNECTION:
            src_el = graph.element_by_tag(p["from"]["tag"])
            dst_el = graph.element_by_tag(p["to"]["tag"])
            if src_el is None or dst_el is None:
                raise ValueError(f"step {step.id!r} references unknown tags "
                                 "(document was not pruned)")
            src_noz = p["from"].get("nozzle") or _free_nozzle(graph, src_el)
            dst_exclude = frozenset({src_noz}) if dst_el is src_el else frozenset()
            dst_noz = p["to"].get("nozzle") or _free_nozzle(graph, dst_el, dst_exclude)
            for el, noz in ((src_el, src_noz), (dst_el, dst_noz)):
                if el.nozzle(noz) is None:
                    el.nozzles.append(Nozzle(noz, [Node(f"{noz}-1")]))
            conn_id = mint.next("PIPE")
            graph.connections[conn_id] = PidConnection(
                id=conn_id,
                source=ConnectionEnd(src_el.id, src_noz),
                target=ConnectionEnd(dst_el.id, dst_noz),
                line_number=p.get("line_number"),
                attributes=_to_attributes(p.get("attributes")),
            )
        elif step.action == ACTION_ADD_ACTUATION:
            sensing = _resolve_handle(graph, p["sensing_target"])
            actuated_el = graph.element_by_tag(p["actuated_target"])
            if sensing is None or actuated_el is None:
                raise ValueError(f"step {step.id!r} references unknown targets "
                                 "(document was not pruned)")
            loop_id = mint.next("LOOP")
            graph.loops[loop_id] = ActuationLoop(
                id=loop_id, loop_tag=p["loop_tag"],
                sensing_target=sensing, actuated_target=actuated_el.id,
                associations=[("actuates", actuated_el.id), ("senses", sensing)],
                information_flows=[(sensing, actuated_el.id)],
            )
        elif step.action == ACTION_SET_ATTRIBUTE:
            target = p["target"]
            el = graph.element_by_tag(target)
            attr = Attribute(p["name"], p["value"], p.get("unit"))
            if el is not None:
                el.attributes.append(attr)
            else:
                conn = graph.connection_by_line(target)
                if conn is None:
                    raise ValueError(f"step {step.id!r} targets unknown handle "
                                     f"{target!r} (document was not pruned)")
                conn.attributes.append(attr)
    return graph


def _resolve_handle(graph: PidGraph, handle: str) -> str | None:
    """Tag or line number -> internal id."""
    el = graph.element_by_tag(handle)
    if el is not None:
        return el.id
    conn = graph.connection_by_line(handle)
    if conn is not None:
        return conn.id
    return None


# ── Lifting: graph -> DSL ────────────────────────────────────────────────────


def _handle_for(graph: PidGraph, item_id: str) -> str:
    if item_id in graph.elements:
        return graph.elements[item_id].component_name
    conn = graph.connections.get(item_id)
    if conn is not None:
        return conn.line_number or conn.id
    return item_id


def graph_to_dsl(graph: PidGraph) -> DslDocument:
    """Rebuild a linear-chain document that lowers back to this graph.

    Element and connection attributes ride along in the AddElement and
    AddConnection payloads.  Layout fields are not representable in the DSL
    and are dropped.
    """
    diags = [d for d in validate_graph(graph) if d.severity is Severity.ERROR]
    if diags:
        raise ValueError("graph is invalid: " + "; ".join(str(d) for d in diags))

    steps: list[DslStep] = []

    def attr_objs(attrs: list[Attribute]) -> list[dict[str, Any]]:
        out = []
        for a in attrs:
            obj: dict[str, Any] = {"name": a.name, "value": a.value}
            if a.unit is not None:
                obj["unit"] = a.unit
            out.append(obj)
        return out

    for el_id in sorted(graph.elements):
        el = graph.elements[el_id]
        payload: dict[str, Any] = {
            "component_class": el.component_class.name,
            "tag": el.component_name,
            "kind": el.kind,
            "nozzle_ids": [n.id for n in el.nozzles],
        }
        if el.attributes:
            payload["attributes"] = attr_objs(el.attributes)
        steps.append(DslStep(id="", action=ACTION_ADD_ELEMENT, payload=payload))

    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        payload = {
            "from": {"tag": _handle_for(graph, conn.source.element_id),
                     "nozzle": conn.source.nozzle_id},
            "to": {"tag": _handle_for(graph, conn.target.element_id),
                   "nozzle": conn.target.nozzle_id},
        }
        if conn.line_number is not None:
            payload["line_number"] = conn.line_number
        if conn.attributes:
            payload["attributes"] = attr_objs(conn.attributes)
        steps.append(DslStep(id="", action=ACTION_ADD_CONNECTION, payload=payload))

    for loop_id in sorted(graph.loops):
        loop = graph.loops[loop_id]
        sensed_conn = graph.connections.get(loop.sensing_target)
        if sensed_conn is not None and sensed_conn.line_number is None:
            raise ValueError(
                f"loop {loop.loop_tag!r} senses connection {sensed_conn.id!r} "
                "which has no line number; the DSL can only reference "
                "connections by line number")
        steps.append(DslStep(id="", action=ACTION_ADD_ACTUATION, payload={
            "loop_tag": loop.loop_tag,
            "sensing_target": _handle_for(graph, loop.sensing_target),
            "actuated_target": _handle_for(graph, loop.actuated_target),
        }))

    for i, step in enumerate(steps):
        step.id = f"s{i + 1}"
        step.next = [f"s{i + 2}"] if i + 1 < len(steps) else []

    return DslDocument(version=DSL_VERSION, steps=steps,
                       entry=steps[0].id if steps else None)
