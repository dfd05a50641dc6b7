from __future__ import annotations

import copy
import json
import random

import pytest

from helpers import canonical_form, random_dsl_document, random_graph, tank_pump_graph
from pidcopilot.dsl import (
    DslDocument,
    DslSchemaError,
    DslStep,
    DslSyntaxError,
    dsl_to_graph,
    empty_document,
    graph_to_dsl,
    parse_dsl,
    serialize_dsl,
    validate_and_prune,
)
from pidcopilot.model import Severity, has_errors


def doc_text(steps, entry="s1"):
    return json.dumps({"version": "1", "entry": entry if steps else None,
                       "steps": steps}) + "\n"


def step_obj(sid, action, payload, nxt=()):
    return {"id": sid, "action": action, "payload": payload, "next": list(nxt)}


ADD_TANK = step_obj("s1", "AddElement", {"component_class": "Tank", "tag": "T-01"})


def chain(*objs):
    for a, b in zip(objs, objs[1:]):
        a["next"] = [b["id"]]
    return list(objs)


# ── parse / serialize ────────────────────────────────────────────────────────


def test_parse_single_step_document():
    doc = parse_dsl(doc_text([ADD_TANK]))
    assert len(doc.steps) == 1
    assert doc.entry == "s1"
    assert doc.steps[0].action == "AddElement"
    assert doc.steps[0].payload["tag"] == "T-01"


def test_parse_two_step_chain():
    objs = chain(copy.deepcopy(ADD_TANK),
                 step_obj("s2", "AddElement", {"component_class": "Pump", "tag": "P-01"}))
    doc = parse_dsl(doc_text(objs))
    assert doc.entry == "s1"
    assert doc.steps[0].next == ["s2"]


def test_dangling_transition_is_schema_error():
    bad = copy.deepcopy(ADD_TANK)
    bad["next"] = ["s9"]
    with pytest.raises(DslSchemaError, match="s9"):
        parse_dsl(doc_text([bad]))


def test_duplicate_step_id_rejected():
    with pytest.raises(DslSchemaError, match="duplicate step id"):
        parse_dsl(doc_text([ADD_TANK, ADD_TANK]))


def test_unknown_action_rejected():
    with pytest.raises(DslSchemaError, match="unknown action"):
        parse_dsl(doc_text([step_obj("s1", "Explode", {})]))


def test_missing_payload_field_rejected():
    with pytest.raises(DslSchemaError, match="tag"):
        parse_dsl(doc_text([step_obj("s1", "AddElement", {"component_class": "Tank"})]))


def test_unknown_keys_rejected():
    bad = copy.deepcopy(ADD_TANK)
    bad["surprise"] = 1
    with pytest.raises(DslSchemaError, match="surprise"):
        parse_dsl(doc_text([bad]))
    bad2 = copy.deepcopy(ADD_TANK)
    bad2["payload"]["color"] = "red"
    with pytest.raises(DslSchemaError, match="color"):
        parse_dsl(doc_text([bad2]))


def test_syntax_error_carries_position():
    with pytest.raises(DslSyntaxError) as exc:
        parse_dsl('{"version": "1", "entry": ')
    assert exc.value.line == 1
    assert exc.value.column is not None


def test_entry_must_reference_a_step():
    with pytest.raises(DslSchemaError, match="entry"):
        parse_dsl(doc_text([ADD_TANK], entry="nope"))


def test_serialize_is_stable_and_newline_terminated():
    doc = parse_dsl(doc_text([ADD_TANK]))
    text = serialize_dsl(doc)
    assert text.endswith("\n")
    assert serialize_dsl(doc) == text
    assert text.index('"version"') < text.index('"entry"') < text.index('"steps"')


def test_parse_serialize_round_trip_random_docs():
    rng = random.Random(11)
    for _ in range(200):
        doc = random_dsl_document(rng)
        assert parse_dsl(serialize_dsl(doc)) == doc


def test_empty_document_serializes_with_null_entry():
    text = serialize_dsl(empty_document())
    assert parse_dsl(text) == empty_document()
    assert json.loads(text)["entry"] is None


# ── validate_and_prune ───────────────────────────────────────────────────────


def test_unreachable_step_pruned():
    objs = [copy.deepcopy(ADD_TANK),
            step_obj("s3", "AddElement", {"component_class": "Pump", "tag": "P-09"})]
    doc = parse_dsl(doc_text(objs))
    pruned, diags = validate_and_prune(doc)
    assert [s.id for s in pruned.steps] == ["s1"]
    pruned_diags = [d for d in diags if d.severity is Severity.PRUNED]
    assert len(pruned_diags) == 1 and pruned_diags[0].target_id == "s3"


def test_ungrounded_connection_pruned_with_tag_named():
    objs = chain(
        copy.deepcopy(ADD_TANK),
        step_obj("s2", "AddConnection", {"from": {"tag": "T-01"}, "to": {"tag": "X-99"}}),
    )
    doc = parse_dsl(doc_text(objs))
    pruned, diags = validate_and_prune(doc)
    assert [s.id for s in pruned.steps] == ["s1"]
    assert any(d.severity is Severity.PRUNED and "X-99" in d.message for d in diags)


def test_fully_connected_document_unchanged_and_idempotent():
    objs = chain(
        copy.deepcopy(ADD_TANK),
        step_obj("s2", "AddElement", {"component_class": "Pump", "tag": "P-01"}),
        step_obj("s3", "AddConnection",
                 {"from": {"tag": "T-01"}, "to": {"tag": "P-01"}, "line_number": "L-100"}),
        step_obj("s4", "SetAttribute",
                 {"target": "T-01", "name": "Capacity", "value": "100", "unit": "m3"}),
    )
    doc = parse_dsl(doc_text(objs))
    once, diags = validate_and_prune(doc)
    assert diags == []
    assert once == doc
    twice, diags2 = validate_and_prune(once)
    assert twice == once
    assert diags2 == []


def test_prune_splices_chain_so_successors_stay_reachable():
    objs = chain(
        copy.deepcopy(ADD_TANK),
        step_obj("s2", "AddConnection", {"from": {"tag": "T-01"}, "to": {"tag": "Z-99"}}),
        step_obj("s3", "AddElement", {"component_class": "Pump", "tag": "P-01"}),
    )
    doc = parse_dsl(doc_text(objs))
    pruned, diags = validate_and_prune(doc)
    assert [s.id for s in pruned.steps] == ["s1", "s3"]
    assert pruned.step("s1").next == ["s3"]


def test_prune_of_entry_moves_entry():
    objs = chain(
        step_obj("s1", "AddConnection", {"from": {"tag": "A-01"}, "to": {"tag": "B-01"}}),
        copy.deepcopy(ADD_TANK) | {"id": "s2", "next": []},
    )
    objs[1]["id"] = "s2"
    doc = parse_dsl(doc_text(objs, entry="s1"))
    pruned, _ = validate_and_prune(doc)
    assert pruned.entry == "s2"
    assert [s.id for s in pruned.steps] == ["s2"]


def test_cycle_is_an_error():
    a = step_obj("s1", "AddElement", {"component_class": "Tank", "tag": "T-01"}, ["s2"])
    b = step_obj("s2", "AddElement", {"component_class": "Pump", "tag": "P-01"}, ["s1"])
    doc = parse_dsl(doc_text([a, b]))
    _, diags = validate_and_prune(doc)
    assert any(d.severity is Severity.ERROR and "cycle" in d.message for d in diags)


def test_grounding_cascades_through_pruned_connections():
    objs = chain(
        copy.deepcopy(ADD_TANK),
        step_obj("s2", "AddConnection", {"from": {"tag": "T-01"}, "to": {"tag": "Q-77"},
                                         "line_number": "L-5"}),
        step_obj("s3", "AddElement", {"component_class": "GlobeValve", "tag": "V-01"}),
        step_obj("s4", "AddActuation", {"loop_tag": "FIC-1", "sensing_target": "L-5",
                                        "actuated_target": "V-01"}),
    )
    doc = parse_dsl(doc_text(objs))
    pruned, diags = validate_and_prune(doc)
    assert [s.id for s in pruned.steps] == ["s1", "s3"]
    assert sum(1 for d in diags if d.severity is Severity.PRUNED) == 2


def test_duplicate_tag_is_an_error():
    objs = chain(copy.deepcopy(ADD_TANK),
                 step_obj("s2", "AddElement", {"component_class": "Pump", "tag": "T-01"}))
    _, diags = validate_and_prune(parse_dsl(doc_text(objs)))
    assert any("introduced more than once" in d.message for d in diags)


def test_use_before_introduction_is_an_error():
    objs = chain(
        step_obj("s1", "AddElement", {"component_class": "Pump", "tag": "P-01"}),
        step_obj("s2", "AddConnection", {"from": {"tag": "T-01"}, "to": {"tag": "P-01"}}),
        copy.deepcopy(ADD_TANK) | {"id": "s3"},
    )
    _, diags = validate_and_prune(parse_dsl(doc_text(objs)))
    assert any("before any step introduces it" in d.message for d in diags)


def test_prune_idempotent_on_random_documents():
    rng = random.Random(23)
    for _ in range(200):
        doc = random_dsl_document(rng)
        once, _ = validate_and_prune(doc)
        twice, _ = validate_and_prune(once)
        assert twice == once


# ── dsl_to_graph ─────────────────────────────────────────────────────────────


def test_lower_single_element():
    doc = parse_dsl(doc_text([step_obj(
        "s1", "AddElement",
        {"component_class": "Tank", "tag": "T-01", "nozzle_count": 2})]))
    g = dsl_to_graph(doc)
    assert len(g.elements) == 1
    assert len(g.connections) == 0
    el = next(iter(g.elements.values()))
    assert el.component_name == "T-01"
    assert [n.id for n in el.nozzles] == ["N1", "N2"]


def test_lower_connection_resolves_tags():
    objs = chain(
        copy.deepcopy(ADD_TANK),
        step_obj("s2", "AddElement", {"component_class": "Pump", "tag": "P-01"}),
        step_obj("s3", "AddConnection",
                 {"from": {"tag": "T-01"}, "to": {"tag": "P-01"}, "line_number": "L-100"}),
    )
    g = dsl_to_graph(parse_dsl(doc_text(objs)))
    assert len(g.elements) == 2
    assert len(g.connections) == 1
    conn = next(iter(g.connections.values()))
    tank = g.element_by_tag("T-01")
    pump = g.element_by_tag("P-01")
    assert conn.source.element_id == tank.id
    assert conn.target.element_id == pump.id
    assert conn.line_number == "L-100"


def test_lower_actuation_flow_hand_traced():
    # AddActuation(sensing=L-100, actuated=V-01) must yield a loop whose
    # single information flow goes from the pipe's id to the valve's id.
    objs = chain(
        copy.deepcopy(ADD_TANK),
        step_obj("s2", "AddElement", {"component_class": "GlobeValve", "tag": "V-01"}),
        step_obj("s3", "AddConnection",
                 {"from": {"tag": "T-01"}, "to": {"tag": "V-01"}, "line_number": "L-100"}),
        step_obj("s4", "AddActuation",
                 {"loop_tag": "FIC-101", "sensing_target": "L-100",
                  "actuated_target": "V-01"}),
    )
    g = dsl_to_graph(parse_dsl(doc_text(objs)))
    assert len(g.loops) == 1
    loop = next(iter(g.loops.values()))
    pipe = next(iter(g.connections.values()))
    valve = g.element_by_tag("V-01")
    assert loop.information_flows == [(pipe.id, valve.id)]
    assert ("actuates", valve.id) in loop.associations
    assert ("senses", pipe.id) in loop.associations


def test_lowering_is_deterministic_including_ids():
    rng = random.Random(31)
    for _ in range(20):
        doc = graph_to_dsl(random_graph(rng))
        g1 = dsl_to_graph(doc)
        g2 = dsl_to_graph(doc)
        assert g1 == g2


def test_nozzle_auto_allocation_prefers_free_then_creates():
    objs = chain(
        step_obj("s1", "AddElement",
                 {"component_class": "Tank", "tag": "T-01", "nozzle_count": 1}),
        step_obj("s2", "AddElement",
                 {"component_class": "Pump", "tag": "P-01", "nozzle_count": 1}),
        step_obj("s3", "AddConnection", {"from": {"tag": "T-01"}, "to": {"tag": "P-01"}}),
        step_obj("s4", "AddElement",
                 {"component_class": "Pump", "tag": "P-02", "nozzle_count": 1}),
        step_obj("s5", "AddConnection", {"from": {"tag": "T-01"}, "to": {"tag": "P-02"}}),
    )
    g = dsl_to_graph(parse_dsl(doc_text(objs)))
    tank = g.element_by_tag("T-01")
    assert [n.id for n in tank.nozzles] == ["N1", "N2"]
    conns = sorted(g.connections.values(), key=lambda c: c.id)
    assert conns[0].source.nozzle_id == "N1"
    assert conns[1].source.nozzle_id == "N2"


def test_lowered_graphs_always_validate():
    from pidcopilot.model import validate_graph

    rng = random.Random(37)
    for _ in range(30):
        doc = graph_to_dsl(random_graph(rng))
        assert validate_graph(dsl_to_graph(doc)) == []


def test_lowering_unvalidated_document_raises():
    a = step_obj("s1", "AddElement", {"component_class": "Tank", "tag": "T-01"}, ["s2"])
    b = step_obj("s2", "AddElement", {"component_class": "Pump", "tag": "P-01"}, ["s1"])
    with pytest.raises(ValueError, match="cycle"):
        dsl_to_graph(parse_dsl(doc_text([a, b])))


def test_unknown_class_falls_back_to_generic_equipment():
    doc = DslDocument(steps=[DslStep("s1", "AddElement",
                                     {"component_class": "FluxCapacitor", "tag": "F-01"})],
                      entry="s1")
    g = dsl_to_graph(doc)
    el = g.element_by_tag("F-01")
    assert el.component_class.name == "Equipment"


# ── graph_to_dsl ─────────────────────────────────────────────────────────────


def test_graph_to_dsl_empty():
    doc = graph_to_dsl(tank_pump_graph().__class__())
    assert doc.steps == []
    assert doc.entry is None


def test_graph_to_dsl_three_step_chain():
    doc = graph_to_dsl(tank_pump_graph())
    assert [s.action for s in doc.steps] == ["AddElement", "AddElement", "AddConnection"]
    assert doc.entry == doc.steps[0].id
    assert doc.steps[0].next == [doc.steps[1].id]
    assert doc.steps[1].next == [doc.steps[2].id]
    assert doc.steps[2].next == []


def test_round_trip_graph_dsl_graph():
    rng = random.Random(41)
    for _ in range(200):
        g = random_graph(rng, max_elements=10)
        g2 = dsl_to_graph(graph_to_dsl(g))
        assert canonical_form(g2) == canonical_form(g)


def test_round_trip_preserves_connection_attributes():
    from pidcopilot.model import Attribute

    g = tank_pump_graph()
    g.connections["PIPE-1"].attributes.append(Attribute("Insulation", "IS-2"))
    g2 = dsl_to_graph(graph_to_dsl(g))
    assert canonical_form(g2) == canonical_form(g)
