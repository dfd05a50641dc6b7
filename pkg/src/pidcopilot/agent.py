"""Plan-and-execute orchestration plus the multi-turn session model.

A turn takes the user prompt, plans a list of build actions, executes each
planned step through the completion backend with the accumulated DSL as
context, prunes and lowers the resulting document, and refreshes every
derived artifact (XML, description).  Failed turns leave the session
untouched.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field

from .backends import BackendError, CompletionBackend
from .describe import describe
from .dexpi import emit_conceptual, graph_from_document, merge_layout, parse_xml, serialize_xml
from .dsl import (
    ACTIONS,
    DslDocument,
    DslError,
    DslStep,
    dsl_to_graph,
    empty_document,
    graph_to_dsl,
    parse_step,
    step_to_obj,
    validate_and_prune,
)
from .layout import auto_layout
from .model import Diagnostic, PidGraph, Severity, has_errors

PLANNER_SYSTEM = """You plan edits to a piping and instrumentation diagram.
Break the user's request into an ordered list of build actions, one entry
per element, connection, actuation loop or attribute. The available actions
are: AddElement, AddConnection, AddActuation, SetAttribute.

Reply with a single fenced code block containing a JSON array; each entry
is {"description": "...", "utterance": "..."} where utterance is the exact
substring of the user's request that the step covers."""

EXECUTOR_SYSTEM = """You translate one planned diagram edit into DSL build
steps. A step is a JSON object {"action": ..., "payload": {...}}:

  AddElement    payload: component_class, tag, optional kind, nozzle_count,
                nozzle_ids, attributes [{name, value, unit?}]
  AddConnection payload: from {tag, nozzle?}, to {tag, nozzle?},
                optional line_number, attributes
  AddActuation  payload: loop_tag, sensing_target, actuated_target
  SetAttribute  payload: target, name, value, optional unit

Reply with a single fenced code block containing a JSON array of step
objects for this step only; never repeat existing steps."""

_RETRY_SUFFIX = ("\n\nYour previous reply could not be parsed. Reply again "
                 "with exactly one fenced code block containing a JSON array.")

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


class PlanParseError(Exception):
    """The backend did not produce a parseable plan; carries the raw text."""

    def __init__(self, message: str, raw_output: str):
        super().__init__(message)
        self.raw_output = raw_output


@dataclass
class PlanStep:
    index: int
    description: str
    utterance: str
    span: tuple[int, int] | None = None


@dataclass
class ExecutionRecord:
    step: PlanStep
    raw_output: str
    fragment: list[DslStep] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


@dataclass
class TurnRecord:
    prompt: str
    plan: list[PlanStep] = field(default_factory=list)
    records: list[ExecutionRecord] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)


@dataclass
class SessionState:
    """Current DSL plus every artifact derived from it, and turn history."""

    id: str
    dsl: DslDocument
    graph: PidGraph
    xml: str
    description: str
    turns: list[TurnRecord] = field(default_factory=list)


@dataclass
class TurnResult:
    ok: bool
    state: SessionState
    diagnostics: list[Diagnostic] = field(default_factory=list)
    plan: list[PlanStep] = field(default_factory=list)
    records: list[ExecutionRecord] = field(default_factory=list)
    error: str | None = None


def derive_artifacts(graph: PidGraph) -> tuple[str, str]:
    """(full XML, description) for a graph via the deterministic pipeline."""
    doc = merge_layout(emit_conceptual(graph), auto_layout(graph))
    return serialize_xml(doc), describe(graph)


def new_session(session_id: str | None = None) -> SessionState:
    graph = PidGraph()
    xml, description = derive_artifacts(graph)
    return SessionState(
        id=session_id or uuid.uuid4().hex,
        dsl=empty_document(), graph=graph, xml=xml, description=description,
    )


def extract_fenced_block(text: str) -> str | None:
    m = _FENCE_RE.search(text)
    return m.group(1) if m else None


def _parse_json_block(text: str) -> list | None:
    block = extract_fenced_block(text)
    if block is None:
        return None
    try:
        data = json.loads(block)
    except json.JSONDecodeError:
        return None
    return data if isinstance(data, list) else None


# ── Planning ─────────────────────────────────────────────────────────────────


def make_plan(prompt: str, context_description: str,
              backend: CompletionBackend, temperature: float = 0.0) -> list[PlanStep]:
    """One planning call (plus one corrective retry) -> ordered PlanSteps."""
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    user_text = (f"Current P&ID description:\n{context_description}\n\n"
                 f"User request:\n{prompt}")
    raw = backend.complete(PLANNER_SYSTEM, user_text, temperature)
    entries = _parse_json_block(raw)
    if entries is None:
        raw = backend.complete(PLANNER_SYSTEM, user_text + _RETRY_SUFFIX, temperature)
        entries = _parse_json_block(raw)
    if entries is None:
        raise PlanParseError("backend did not produce a parseable plan", raw)

    plan: list[PlanStep] = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or not str(entry.get("description", "")).strip():
            raise PlanParseError(f"plan entry {i} lacks a description", raw)
        description = str(entry["description"])
        utterance = str(entry.get("utterance", "")) or prompt
        start = prompt.find(utterance)
        if start < 0:
            # keep the invariant: the utterance is always a prompt substring
            utterance, start = prompt, 0
        plan.append(PlanStep(index=i, description=description,
                             utterance=utterance,
                             span=(start, start + len(utterance))))
    if not plan:
        raise PlanParseError("backend produced an empty plan", raw)
    return plan


# ── Execution ────────────────────────────────────────────────────────────────


def _steps_context(prior: DslDocument, fragments: list[list[DslStep]]) -> str:
    objs = [step_to_obj(s) for s in prior.steps]
    for fragment in fragments:
        objs.extend(step_to_obj(s) for s in fragment)
    return json.dumps(objs, indent=2, ensure_ascii=False)


def _parse_fragment(raw: str, plan_step: PlanStep) -> tuple[list[DslStep], str | None]:
    entries = _parse_json_block(raw)
    if entries is None:
        return [], "no parseable fenced JSON array in backend output"
    steps: list[DslStep] = []
    for i, entry in enumerate(entries):
        if isinstance(entry, dict):
            entry = {k: v for k, v in entry.items() if k not in ("id", "next")}
        try:
            step = parse_step(entry, i, require_id=False)
        except DslError as exc:
            return [], f"fragment step {i}: {exc}"
        step.provenance = plan_step.span
        steps.append(step)
    if not steps:
        return [], "backend produced an empty fragment"
    return steps, None


def execute_plan(plan: list[PlanStep], prior: DslDocument,
                 backend: CompletionBackend, temperature: float = 0.0,
                 ) -> tuple[DslDocument, list[ExecutionRecord], list[Diagnostic]]:
    """Run every planned step, append the parsed fragments onto the prior
    document, and prune the merged result.

    Each completion call carries the plan step plus the serialized steps of
    the prior document and of all fragments executed earlier this turn.
    A step whose output stays unparseable after one retry is skipped and
    recorded with an Error diagnostic; transport errors abort the turn.
    """
    if not plan:
        raise ValueError("plan must be non-empty")
    records: list[ExecutionRecord] = []
    fragments: list[list[DslStep]] = []
    for plan_step in plan:
        user_text = (
            f"Planned step {plan_step.index + 1}: {plan_step.description}\n"
            f"Covers this part of the request: {plan_step.utterance!r}\n\n"
            f"Existing build steps:\n```\n"
            f"{_steps_context(prior, fragments)}\n```")
        raw = backend.complete(EXECUTOR_SYSTEM, user_text, temperature)
        fragment, problem = _parse_fragment(raw, plan_step)
        if problem is not None:
            raw = backend.complete(EXECUTOR_SYSTEM, user_text + _RETRY_SUFFIX,
                                   temperature)
            fragment, problem = _parse_fragment(raw, plan_step)
        record = ExecutionRecord(step=plan_step, raw_output=raw, fragment=fragment)
        if problem is not None:
            record.diagnostics.append(Diagnostic(Severity.ERROR, None, problem))
        records.append(record)
        if fragment:
            fragments.append(fragment)

    merged = _append_fragments(prior, fragments)
    pruned, diagnostics = validate_and_prune(merged)
    return pruned, records, diagnostics


def _append_fragments(prior: DslDocument,
                      fragments: list[list[DslStep]]) -> DslDocument:
    """New steps are chained onto the prior document's tail in order."""
    steps = [DslStep(id=s.id, action=s.action, payload=s.payload,
                     next=list(s.next), provenance=s.provenance)
             for s in prior.steps]
    used = {s.id for s in steps}
    counter = len(steps)
    new_steps: list[DslStep] = []
    for fragment in fragments:
        for s in fragment:
            counter += 1
            while f"s{counter}" in used:
                counter += 1
            sid = f"s{counter}"
            used.add(sid)
            new_steps.append(DslStep(id=sid, action=s.action, payload=s.payload,
                                     next=[], provenance=s.provenance))
    if not new_steps:
        return DslDocument(version=prior.version, steps=steps, entry=prior.entry)

    for a, b in zip(new_steps, new_steps[1:]):
        a.next = [b.id]
    if steps:
        tail = steps[-1]
        tail.next = tail.next + [new_steps[0].id]
        entry = prior.entry
    else:
        entry = new_steps[0].id
    return DslDocument(version=prior.version, steps=steps + new_steps, entry=entry)


# ── Turns ────────────────────────────────────────────────────────────────────


def run_turn(state: SessionState, prompt: str, backend: CompletionBackend,
             executor_backend: CompletionBackend | None = None,
             temperature: float = 0.0) -> TurnResult:
    """One full copilot turn; atomic — failure returns the state unchanged."""
    executor = executor_backend or backend
    try:
        plan = make_plan(prompt, state.description, backend, temperature)
        doc, records, diagnostics = execute_plan(plan, state.dsl, executor,
                                                 temperature)
        if has_errors(diagnostics):
            return TurnResult(ok=False, state=state, diagnostics=diagnostics,
                              plan=plan, records=records,
                              error="document failed flow validation")
        graph = dsl_to_graph(doc)
        xml, description = derive_artifacts(graph)
    except PlanParseError as exc:
        diag = Diagnostic(Severity.ERROR, None, f"plan parse failure: {exc}")
        return TurnResult(ok=False, state=state, diagnostics=[diag], error=str(exc))
    except BackendError as exc:
        diag = Diagnostic(Severity.ERROR, None, f"backend failure: {exc}")
        return TurnResult(ok=False, state=state, diagnostics=[diag], error=str(exc))
    except (DslError, ValueError) as exc:
        diag = Diagnostic(Severity.ERROR, None, str(exc))
        return TurnResult(ok=False, state=state, diagnostics=[diag], error=str(exc))

    turn = TurnRecord(prompt=prompt, plan=plan, records=records,
                      diagnostics=diagnostics)
    new_state = SessionState(
        id=state.id, dsl=doc, graph=graph, xml=xml, description=description,
        turns=state.turns + [turn],
    )
    return TurnResult(ok=True, state=new_state, diagnostics=diagnostics,
                      plan=plan, records=records)


def load_session_from_xml(text: str, session_id: str | None = None) -> SessionState:
    """Start a session from an existing plant-model XML file."""
    doc, diags = parse_xml(text)
    if has_errors(diags):
        raise ValueError("cannot load session: "
                         + "; ".join(str(d) for d in diags
                                     if d.severity is Severity.ERROR))
    graph, gdiags = graph_from_document(doc)
    if has_errors(gdiags):
        raise ValueError("cannot load session: "
                         + "; ".join(str(d) for d in gdiags
                                     if d.severity is Severity.ERROR))
    for el in graph.elements.values():
        el.position = el.scale = None
    for conn in graph.connections.values():
        conn.centerline = None
    dsl_doc = graph_to_dsl(graph)
    graph = dsl_to_graph(dsl_doc)
    xml, description = derive_artifacts(graph)
    return SessionState(id=session_id or uuid.uuid4().hex, dsl=dsl_doc,
                        graph=graph, xml=xml, description=description)
