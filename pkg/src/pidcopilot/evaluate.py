"""Soundness and completeness grading plus the test-bench runner.

Soundness: the fraction of gold artifacts (elements, connections,
attributes, control loops mentioned by the prompt) that appear in the
generated XML in structured form.  Completeness: the fraction of XML
sections (element, piping-network, actuating-system nodes) that carry
every field required for drawing and interoperability.  Both are graded
purely on the XML text, so any backend or third-party file can be scored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

from .agent import new_session, run_turn
from .backends import BackendError, CompletionBackend, ScriptedBackend
from .describe import MentionSet
from .dexpi import DexpiDocument, XmlNode, parse_xml
from .model import Diagnostic, Severity, has_errors

CASE_SUFFIX = ".case.txt"

_NAME_ATTRS = ("ComponentName", "Name", "TagName")
ELEMENT_SECTION_TAGS = ("Equipment", "PipingComponent")


# ── Report types ─────────────────────────────────────────────────────────────


@dataclass
class SoundnessRow:
    case_id: str
    found: int
    expected: int
    missing: list[str] = field(default_factory=list)


@dataclass
class SoundnessReport:
    per_case: list[SoundnessRow] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def found(self) -> int:
        return sum(r.found for r in self.per_case)

    @property
    def expected(self) -> int:
        return sum(r.expected for r in self.per_case)

    @property
    def aggregate(self) -> float:
        if self.expected == 0:
            return 100.0
        return 100.0 * self.found / self.expected


@dataclass
class SectionRow:
    section_id: str
    kind: str
    passed: int
    total: int
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.total


@dataclass
class CompletenessReport:
    per_section: list[SectionRow] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def sections_passing(self) -> int:
        return sum(1 for r in self.per_section if r.ok)

    @property
    def sections_total(self) -> int:
        return len(self.per_section)

    @property
    def aggregate(self) -> float:
        if not self.per_section:
            return 100.0
        return 100.0 * self.sections_passing / len(self.per_section)


# ── Soundness ────────────────────────────────────────────────────────────────


def _name_of(node: XmlNode) -> str | None:
    for attr in _NAME_ATTRS:
        value = node.attrs.get(attr)
        if value:
            return value
    return None


def _nodes_named(doc: DexpiDocument, name: str) -> list[XmlNode]:
    return [n for n in doc.walk() if _name_of(n) == name]


def _element_found(doc: DexpiDocument, class_name: str, tag: str) -> bool:
    want = class_name.lower()
    for node in _nodes_named(doc, tag):
        node_class = node.attrs.get("ComponentClass", "")
        if node_class.lower() == want or node.tag.lower() == want:
            return True
    return False


def _ids_for_tag(doc: DexpiDocument, tag: str) -> set[str]:
    ids = {tag}
    for node in _nodes_named(doc, tag):
        node_id = node.attrs.get("ID")
        if node_id:
            ids.add(node_id)
    return ids


def _connection_found(doc: DexpiDocument, from_tag: str, to_tag: str) -> bool:
    from_ids = _ids_for_tag(doc, from_tag)
    to_ids = _ids_for_tag(doc, to_tag)
    for node in doc.walk():
        if node.tag != "Connection":
            continue
        if node.attrs.get("FromID") in from_ids and node.attrs.get("ToID") in to_ids:
            return True
    return False


def _attribute_found(doc: DexpiDocument, handle: str, name: str) -> bool:
    for node in doc.walk():
        matches = (_name_of(node) == handle
                   or node.attrs.get("LineNumber") == handle
                   or node.attrs.get("ID") == handle)
        if not matches:
            continue
        for sub in node.walk():
            if sub.tag == "GenericAttribute" and sub.attrs.get("Name") == name:
                return True
    return False


def _loop_found(doc: DexpiDocument, loop_tag: str) -> bool:
    return bool(_nodes_named(doc, loop_tag))


def check_soundness(gold: MentionSet, xml: str,
                    case_id: str = "case") -> SoundnessReport:
    """Grade one XML text against a gold mention set.

    Unparseable XML scores zero found; "appears in structured form" means
    the artifact is present as nodes/attributes of well-formed XML, not as
    free text.
    """
    report = SoundnessReport()
    doc, diags = parse_xml(xml)
    if has_errors(diags):
        report.diagnostics.extend(d for d in diags if d.severity is Severity.ERROR)
        missing = [f"{kind} {'/'.join(str(v) for v in item)}"
                   for kind, item in gold.items()]
        report.per_case.append(SoundnessRow(case_id, 0, gold.artifact_count, missing))
        return report

    missing: list[str] = []
    found = 0
    for class_name, tag in sorted(gold.elements):
        if _element_found(doc, class_name, tag):
            found += 1
        else:
            missing.append(f"element {class_name}/{tag}")
    for from_tag, to_tag in sorted(gold.connections):
        if _connection_found(doc, from_tag, to_tag):
            found += 1
        else:
            missing.append(f"connection {from_tag}->{to_tag}")
    for handle, name in sorted(gold.attributes):
        if _attribute_found(doc, handle, name):
            found += 1
        else:
            missing.append(f"attribute {handle}.{name}")
    for loop_tag in sorted(gold.loops):
        if _loop_found(doc, loop_tag):
            found += 1
        else:
            missing.append(f"loop {loop_tag}")
    report.per_case.append(SoundnessRow(case_id, found, gold.artifact_count, missing))
    return report


# ── Completeness ─────────────────────────────────────────────────────────────


def _well_formed_uri(uri: str) -> bool:
    parsed = urlparse(uri)
    return bool(parsed.scheme and parsed.netloc and parsed.path.strip("/"))


def _check_element_section(node: XmlNode) -> list[tuple[str, bool]]:
    nozzles = node.find_all("Nozzle")
    return [
        ("node kind", node.tag in ELEMENT_SECTION_TAGS),
        ("ID", bool(node.attrs.get("ID"))),
        ("ComponentName", bool(node.attrs.get("ComponentName"))),
        ("ComponentClass with URI", bool(node.attrs.get("ComponentClass"))
         and _well_formed_uri(node.attrs.get("ComponentClassURI", ""))),
        ("Nozzles with Nodes", bool(nozzles)
         and all(noz.find_all("Node") for noz in nozzles)),
        ("Position and Scale", node.find("Position") is not None
         and node.find("Scale") is not None),
    ]


def _check_connection_section(node: XmlNode) -> list[tuple[str, bool]]:
    segment = node.find("PipingNetworkSegment")
    connection = segment.find("Connection") if segment is not None else None
    centerline = segment.find("CenterLine") if segment is not None else None
    return [
        ("PipingNetworkSegment", segment is not None),
        ("Connection with source and destination",
         connection is not None and bool(connection.attrs.get("FromID"))
         and bool(connection.attrs.get("ToID"))),
        ("CenterLine", centerline is not None
         and len(centerline.find_all("Coordinate")) >= 2),
    ]


def _check_actuation_section(node: XmlNode, doc_ids: set[str]) -> list[tuple[str, bool]]:
    pif = node.find("ProcessInstrumentationFunction")
    associations = node.find_all("Association")
    return [
        ("InstrumentationLoopFunction",
         node.find("InstrumentationLoopFunction") is not None),
        ("ProcessInstrumentationFunction with ActuatingFunction",
         pif is not None and pif.find("ActuatingFunction") is not None),
        ("InformationFlows", bool(node.find_all("InformationFlow"))),
        ("Associations referent-valid", bool(associations)
         and all(a.attrs.get("ItemID") in doc_ids for a in associations)),
    ]


def check_completeness(xml: str, case_id: str | None = None) -> CompletenessReport:
    """Grade every section of an XML text; pass is all-or-nothing per section."""
    report = CompletenessReport()
    prefix = f"{case_id}:" if case_id else ""
    doc, diags = parse_xml(xml)
    if has_errors(diags):
        report.diagnostics.extend(d for d in diags if d.severity is Severity.ERROR)
        report.per_section.append(SectionRow(
            f"{prefix}document", "Document", 0, 1, ["well-formed XML"]))
        return report

    doc_ids: set[str] = set()
    for node in doc.walk():
        node_id = node.attrs.get("ID")
        if node_id:
            doc_ids.add(node_id)

    counter = 0
    for node in _section_candidates(doc.root):
        counter += 1
        if node.tag in ELEMENT_SECTION_TAGS or "ComponentClass" in node.attrs:
            checks = _check_element_section(node)
            kind = "EquipmentOrInstrument"
        elif node.tag == "PipingNetworkSystem":
            checks = _check_connection_section(node)
            kind = "Connection"
        elif node.tag == "ActuatingSystem":
            checks = _check_actuation_section(node, doc_ids)
            kind = "Actuation"
        else:
            continue
        section_id = node.attrs.get("ID") or f"{node.tag}#{counter}"
        failures = [label for label, ok in checks if not ok]
        report.per_section.append(SectionRow(
            f"{prefix}{section_id}", kind,
            len(checks) - len(failures), len(checks), failures))
    return report


def _section_candidates(root: XmlNode) -> list[XmlNode]:
    """Every node outside Drawing/ShapeCatalogue subtrees, the root included
    (adapter output does not always nest things under a PlantModel)."""
    out: list[XmlNode] = []

    def visit(node: XmlNode) -> None:
        if node.tag in ("Drawing", "ShapeCatalogue"):
            return
        out.append(node)
        for child in node.children:
            visit(child)

    visit(root)
    return out


# ── Zero/few-shot adapters ───────────────────────────────────────────────────

ZERO_SHOT_SYSTEM = (
    "You write DEXPI Proteus XML. Reply with a single fenced code block "
    "containing one complete PlantModel XML document for the request.")


def _xml_from_reply(raw: str) -> str:
    from .agent import extract_fenced_block

    block = extract_fenced_block(raw)
    return block if block is not None else raw


def generate_zero_shot(prompt: str, backend: CompletionBackend,
                       temperature: float = 0.0) -> str:
    """Ask the backend for raw plant-model XML with no examples."""
    return _xml_from_reply(backend.complete(ZERO_SHOT_SYSTEM, prompt, temperature))


def few_shot_examples() -> list[str]:
    """Two small reference documents produced by the deterministic pipeline."""
    from .agent import derive_artifacts
    from .dsl import DslDocument, DslStep, dsl_to_graph

    tank = DslDocument(steps=[DslStep("s1", "AddElement", {
        "component_class": "Tank", "tag": "T-90"})], entry="s1")
    pair = DslDocument(steps=[
        DslStep("s1", "AddElement", {"component_class": "Pump", "tag": "P-90"},
                next=["s2"]),
        DslStep("s2", "AddElement", {"component_class": "GlobeValve", "tag": "V-90"},
                next=["s3"]),
        DslStep("s3", "AddConnection", {"from": {"tag": "P-90"},
                                        "to": {"tag": "V-90"},
                                        "line_number": "L-90"}),
    ], entry="s1")
    return [derive_artifacts(dsl_to_graph(d))[0] for d in (tank, pair)]


def generate_few_shot(prompt: str, backend: CompletionBackend,
                      examples: list[str] | None = None,
                      temperature: float = 0.0) -> str:
    """Like zero-shot, but the prompt embeds reference XML documents."""
    snippets = examples if examples is not None else few_shot_examples()
    shots = "\n\n".join(f"Example {i + 1}:\n```\n{x}```"
                        for i, x in enumerate(snippets))
    user_text = f"{shots}\n\nRequest:\n{prompt}"
    return _xml_from_reply(backend.complete(ZERO_SHOT_SYSTEM, user_text, temperature))


# ── Bench cases ──────────────────────────────────────────────────────────────


@dataclass
class EvalCase:
    id: str
    prompts: list[str]
    gold: MentionSet
    fixture: Path | None = None
    expected_xml: Path | None = None


def parse_case_file(path: str | Path) -> EvalCase:
    """Read one structured-text case file (see the bench README for syntax)."""
    path = Path(path)
    case_id = path.name.removesuffix(CASE_SUFFIX)
    prompts: list[str] = []
    gold = MentionSet()
    fixture: Path | None = None
    expected_xml: Path | None = None

    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not value:
            raise ValueError(f"{path}:{lineno}: empty value for {key!r}")
        if key == "id":
            case_id = value
        elif key == "prompt":
            prompts.append(value)
        elif key == "fixture":
            fixture = path.parent / value
        elif key == "expected_xml":
            expected_xml = path.parent / value
        elif key == "element":
            parts = value.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: element wants 'Class TAG'")
            gold.elements.add((parts[0], parts[1]))
        elif key == "connection":
            ends = [p.strip() for p in value.split("->")]
            if len(ends) != 2 or not all(ends):
                raise ValueError(f"{path}:{lineno}: connection wants 'A -> B'")
            gold.connections.add((ends[0], ends[1]))
        elif key == "attribute":
            parts = value.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: attribute wants 'HANDLE Name'")
            gold.attributes.add((parts[0], parts[1]))
        elif key == "loop":
            gold.loops.add(value)
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")

    if not prompts:
        raise ValueError(f"{path}: case has no prompts")
    if gold.artifact_count == 0:
        raise ValueError(f"{path}: case has no gold mentions")
    return EvalCase(id=case_id, prompts=prompts, gold=gold,
                    fixture=fixture, expected_xml=expected_xml)


def load_bench(bench_dir: str | Path) -> list[EvalCase]:
    bench_dir = Path(bench_dir)
    files = sorted(bench_dir.glob(f"*{CASE_SUFFIX}"))
    if not files:
        raise ValueError(f"no cases found in {bench_dir}")
    return [parse_case_file(f) for f in files]


# ── Bench runner ─────────────────────────────────────────────────────────────


@dataclass
class BenchmarkResult:
    soundness: SoundnessReport
    completeness: CompletenessReport
    table: str
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.notes


def _run_case_pipeline(case: EvalCase, backend: CompletionBackend,
                       temperature: float) -> tuple[str, list[str]]:
    state = new_session(case.id)
    notes: list[str] = []
    for i, prompt in enumerate(case.prompts):
        result = run_turn(state, prompt, backend, temperature=temperature)
        if not result.ok:
            notes.append(f"{case.id}: turn {i + 1} failed: {result.error}")
            return "", notes
        state = result.state
    return state.xml, notes


def _run_case_adapter(case: EvalCase, backend: CompletionBackend, mode: str,
                      temperature: float) -> tuple[str, list[str]]:
    prompt = "\n".join(case.prompts)
    try:
        if mode == "zeroshot":
            return generate_zero_shot(prompt, backend, temperature), []
        return generate_few_shot(prompt, backend, temperature=temperature), []
    except BackendError as exc:
        return "", [f"{case.id}: backend failure: {exc}"]


def run_benchmark(bench_dir: str | Path, backend: CompletionBackend | None = None,
                  mode: str = "pipeline",
                  temperature: float = 0.0) -> BenchmarkResult:
    """Run every case in a bench directory and grade the produced XML.

    ``mode`` selects the generation route: the full copilot pipeline, or
    the zero-shot / few-shot comparison adapters that ask the backend for
    raw XML.  Cases carrying a ``fixture`` reference replay their own
    scripted backend; per-case failures score zero and never abort the run.
    """
    if mode not in ("pipeline", "zeroshot", "fewshot"):
        raise ValueError(f"unknown mode {mode!r}")
    cases = load_bench(bench_dir)
    soundness = SoundnessReport()
    completeness = CompletenessReport()
    notes: list[str] = []

    for case in cases:
        case_backend: CompletionBackend | None = backend
        if case.fixture is not None:
            case_backend = ScriptedBackend.from_file(case.fixture)
        if case_backend is None:
            notes.append(f"{case.id}: no backend (case has no fixture and no "
                         "--backend was given)")
            xml = ""
        elif mode == "pipeline":
            try:
                xml, case_notes = _run_case_pipeline(case, case_backend, temperature)
            except BackendError as exc:
                xml, case_notes = "", [f"{case.id}: backend failure: {exc}"]
            notes.extend(case_notes)
        else:
            xml, case_notes = _run_case_adapter(case, case_backend, mode, temperature)
            notes.extend(case_notes)

        case_soundness = check_soundness(case.gold, xml, case.id)
        soundness.per_case.extend(case_soundness.per_case)
        soundness.diagnostics.extend(case_soundness.diagnostics)
        case_completeness = check_completeness(xml, case.id)
        completeness.per_section.extend(case_completeness.per_section)
        completeness.diagnostics.extend(case_completeness.diagnostics)

        if case.expected_xml is not None and xml:
            golden = case.expected_xml.read_text(encoding="utf-8")
            if golden != xml:
                notes.append(f"{case.id}: output differs from golden file "
                             f"{case.expected_xml.name}")

    table = render_table(soundness, completeness, notes)
    return BenchmarkResult(soundness, completeness, table, notes)


def render_table(soundness: SoundnessReport, completeness: CompletenessReport,
                 notes: list[str] | None = None) -> str:
    """Aligned plain-text table, one row per case plus the aggregate row."""
    sections_by_case: dict[str, list[SectionRow]] = {}
    for row in completeness.per_section:
        case_id = row.section_id.split(":", 1)[0] if ":" in row.section_id else "-"
        sections_by_case.setdefault(case_id, []).append(row)

    lines = [f"{'case':<28} {'soundness':>18} {'completeness':>18}"]
    lines.append("-" * len(lines[0]))
    for row in soundness.per_case:
        secs = sections_by_case.get(row.case_id, [])
        s_pct = 100.0 * row.found / row.expected if row.expected else 100.0
        c_pass = sum(1 for s in secs if s.ok)
        c_pct = 100.0 * c_pass / len(secs) if secs else 100.0
        lines.append(f"{row.case_id:<28} {row.found:>4}/{row.expected:<4} "
                     f"{s_pct:7.2f}% {c_pass:>4}/{len(secs):<4} {c_pct:7.2f}%")
    lines.append("-" * len(lines[0]))
    lines.append(f"{'TOTAL':<28} {soundness.found:>4}/{soundness.expected:<4} "
                 f"{soundness.aggregate:7.2f}% "
                 f"{completeness.sections_passing:>4}/{completeness.sections_total:<4} "
                 f"{completeness.aggregate:7.2f}%")
    for note in notes or []:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def report_payload(result: BenchmarkResult) -> dict:
    """Machine-readable structure for the JSON report file."""
    return {
        "soundness": {
            "aggregate": result.soundness.aggregate,
            "found": result.soundness.found,
            "expected": result.soundness.expected,
            "per_case": [
                {"case": r.case_id, "found": r.found, "expected": r.expected,
                 "missing": r.missing}
                for r in result.soundness.per_case
            ],
        },
        "completeness": {
            "aggregate": result.completeness.aggregate,
            "passing": result.completeness.sections_passing,
            "total": result.completeness.sections_total,
            "per_section": [
                {"section": r.section_id, "kind": r.kind, "passed": r.passed,
                 "total": r.total, "failures": r.failures}
                for r in result.completeness.per_section
            ],
        },
        "notes": result.notes,
    }
