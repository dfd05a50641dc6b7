"""Deterministic prose description of a diagram, and the inverse mention
extraction used by the soundness checker and multi-turn context.

The describe templates and the extraction rules form a closed loop:
``extract_mentions(describe(g)) == mention_set_of_graph(g)`` for every
valid graph whose tags and line handles match the ``AB-12`` tag pattern
and whose attribute text does not itself mimic the sentence templates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .model import DEFAULT_TAXONOMY, PidGraph, Taxonomy, has_errors, validate_graph

TAG_RE = re.compile(r"\b[A-Za-z]+-\d+\b")

# shipped synonym table; a config file with `synonym=CanonicalClass` lines
# extends or overrides it
DEFAULT_SYNONYMS: dict[str, str] = {
    "vessel": "Tank",
    "drum": "Tank",
    "tank": "Tank",
    "pump": "Pump",
    "exchanger": "HeatExchanger",
    "heat exchanger": "HeatExchanger",
    "cooler": "HeatExchanger",
    "heater": "HeatExchanger",
    "ball valve": "BallValve",
    "globe valve": "GlobeValve",
    "butterfly valve": "ButterflyValve",
    "check valve": "SwingCheckValve",
    "swing check valve": "SwingCheckValve",
    "safety valve": "SpringLoadedGlobeSafetyValve",
    "relief valve": "SpringLoadedGlobeSafetyValve",
    "valve": "GlobeValve",
    "reducer": "PipeReducer",
    "off-page connector": "PipeOffPageConnector",
    "connector": "PipeOffPageConnector",
}


def load_synonyms(path: str | Path) -> dict[str, str]:
    """Merge `synonym=CanonicalClass` lines onto the shipped table."""
    table = dict(DEFAULT_SYNONYMS)
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad synonym line (expected synonym=Class): {line!r}")
        word, cls = line.split("=", 1)
        table[word.strip().lower()] = cls.strip()
    return table


@dataclass
class MentionSet:
    """What a text (or a graph) talks about, as comparable sets."""

    elements: set[tuple[str, str]] = field(default_factory=set)
    connections: set[tuple[str, str]] = field(default_factory=set)
    attributes: set[tuple[str, str]] = field(default_factory=set)
    loops: set[str] = field(default_factory=set)

    @property
    def artifact_count(self) -> int:
        return (len(self.elements) + len(self.connections)
                + len(self.attributes) + len(self.loops))

    def items(self) -> list[tuple[str, tuple]]:
        out: list[tuple[str, tuple]] = []
        out += [("element", e) for e in sorted(self.elements)]
        out += [("connection", c) for c in sorted(self.connections)]
        out += [("attribute", a) for a in sorted(self.attributes)]
        out += [("loop", (tag,)) for tag in sorted(self.loops)]
        return out


def _connection_handle(graph: PidGraph, conn_id: str) -> str:
    conn = graph.connections[conn_id]
    return conn.line_number or conn.id


def _target_handle(graph: PidGraph, item_id: str) -> str:
    if item_id in graph.elements:
        return graph.elements[item_id].component_name
    if item_id in graph.connections:
        return _connection_handle(graph, item_id)
    return item_id


def mention_set_of_graph(graph: PidGraph) -> MentionSet:
    """Exact projection of the graph content onto a MentionSet."""
    mentions = MentionSet()
    for el in graph.elements.values():
        mentions.elements.add((el.component_class.name, el.component_name))
        for attr in el.attributes:
            mentions.attributes.add((el.component_name, attr.name))
    for conn in graph.connections.values():
        src = graph.elements[conn.source.element_id].component_name
        dst = graph.elements[conn.target.element_id].component_name
        mentions.connections.add((src, dst))
        handle = conn.line_number or conn.id
        for attr in conn.attributes:
            mentions.attributes.add((handle, attr.name))
    for loop in graph.loops.values():
        mentions.loops.add(loop.loop_tag)
    return mentions


# ── describe ─────────────────────────────────────────────────────────────────


def describe(graph: PidGraph) -> str:
    """Template prose, one sentence per fact, every tag verbatim."""
    if has_errors(validate_graph(graph)):
        raise ValueError("cannot describe an invalid graph")
    if graph.is_empty:
        return "The P&ID is empty.\n"

    sentences: list[str] = []
    for el_id in sorted(graph.elements):
        el = graph.elements[el_id]
        n = len(el.nozzles)
        plural = "nozzle" if n == 1 else "nozzles"
        sentences.append(f"A {el.component_class.name} tagged {el.component_name} "
                         f"with {n} {plural}.")
    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        src = graph.elements[conn.source.element_id].component_name
        dst = graph.elements[conn.target.element_id].component_name
        line = f" {conn.line_number}" if conn.line_number else ""
        sentences.append(f"A pipe{line} runs from {src} to {dst}.")
    for el_id in sorted(graph.elements):
        el = graph.elements[el_id]
        for attr in el.attributes:
            unit = f" {attr.unit}" if attr.unit else ""
            sentences.append(f"{el.component_name} has {attr.name} = {attr.value}{unit}.")
    for conn_id in sorted(graph.connections):
        conn = graph.connections[conn_id]
        handle = conn.line_number or conn.id
        for attr in conn.attributes:
            unit = f" {attr.unit}" if attr.unit else ""
            sentences.append(f"{handle} has {attr.name} = {attr.value}{unit}.")
    for loop_id in sorted(graph.loops):
        loop = graph.loops[loop_id]
        sensed = _target_handle(graph, loop.sensing_target)
        driven = _target_handle(graph, loop.actuated_target)
        sentences.append(f"Control loop {loop.loop_tag} senses {sensed} "
                         f"and actuates {driven}.")
    return "\n".join(sentences) + "\n"


# ── extract ──────────────────────────────────────────────────────────────────

_TAG = r"[A-Za-z]+-\d+"
_SENTENCE_SPLIT = re.compile(r"[.!?\n]+")
_CONNECT_PATTERNS = (
    re.compile(rf"\bfrom\s+({_TAG})\s+to\s+({_TAG})", re.IGNORECASE),
    re.compile(rf"\bconnect\w*\s+({_TAG})\s+(?:to|with|and)\s+({_TAG})", re.IGNORECASE),
    re.compile(rf"\b({_TAG})\b[^.\n]*?\bconnected\s+to\b[^.\n]*?\b({_TAG})\b",
               re.IGNORECASE),
)
_ATTRIBUTE_PATTERN = re.compile(rf"\b({_TAG})\s+has\s+([A-Za-z]\w*(?:\s\w+)*?)\s*=")
_LOOP_PATTERN = re.compile(rf"\bloop\s+({_TAG})", re.IGNORECASE)

# words allowed between a class mention and the tag it introduces
_FILLER_WORDS = frozenset({"a", "an", "the", "is", "tagged", "named", "called",
                           "labeled", "labelled"})


def _class_scanner(taxonomy: Taxonomy,
                   synonyms: dict[str, str]) -> tuple[re.Pattern, dict[str, str]]:
    phrases: dict[str, str] = {name.lower(): name for name in taxonomy.names}
    phrases.update({k.lower(): v for k, v in synonyms.items()})
    ordered = sorted(phrases, key=len, reverse=True)
    pattern = re.compile(r"\b(" + "|".join(re.escape(p) for p in ordered) + r")\b",
                         re.IGNORECASE)
    return pattern, phrases


def extract_mentions(text: str, taxonomy: Taxonomy | None = None,
                     synonyms: dict[str, str] | None = None) -> MentionSet:
    """Rule-based mention extraction.

    Tags match ``letters-digits``.  An element mention is a class word
    (taxonomy name or synonym) immediately followed by a tag, with at most
    filler words between ("a tank T-01", "Tank tagged T-01").  Connections
    match from/to, connect-X-to-Y and X-connected-to-Y phrasings.
    Best-effort by design: gold mention sets take precedence in the
    evaluation harness.
    """
    tax = taxonomy or DEFAULT_TAXONOMY
    scanner, phrase_map = _class_scanner(tax, synonyms or DEFAULT_SYNONYMS)
    mentions = MentionSet()

    for sentence in _SENTENCE_SPLIT.split(text):
        if not sentence.strip():
            continue
        class_hits = [(m.start(), m.end(), phrase_map[m.group(1).lower()])
                      for m in scanner.finditer(sentence)]
        loop_spans = set()
        for m in _LOOP_PATTERN.finditer(sentence):
            mentions.loops.add(m.group(1))
            loop_spans.add(m.span(1))
        for m in TAG_RE.finditer(sentence):
            if m.span() in loop_spans:
                continue
            before = [(start, end, cls) for start, end, cls in class_hits
                      if end <= m.start()]
            if not before:
                continue
            _, gap_from, cls = before[-1]
            gap_words = re.findall(r"[A-Za-z]+", sentence[gap_from:m.start()])
            if len(gap_words) <= 2 and all(w.lower() in _FILLER_WORDS
                                           for w in gap_words):
                mentions.elements.add((cls, m.group(0)))
        for pattern in _CONNECT_PATTERNS:
            for m in pattern.finditer(sentence):
                mentions.connections.add((m.group(1), m.group(2)))
        for m in _ATTRIBUTE_PATTERN.finditer(sentence):
            mentions.attributes.add((m.group(1), m.group(2).strip()))
    return mentions
