from __future__ import annotations

import random

import pytest

from helpers import make_element, random_graph, tank_pump_graph
from pidcopilot.describe import (
    MentionSet,
    describe,
    extract_mentions,
    load_synonyms,
    mention_set_of_graph,
)
from pidcopilot.model import ActuationLoop, Attribute, PidGraph


def loopy_graph():
    g = tank_pump_graph()
    g.elements["TK-1"].attributes.append(Attribute("Capacity", "100", "m3"))
    g.loops["LOOP-1"] = ActuationLoop(
        id="LOOP-1", loop_tag="FIC-101",
        sensing_target="PIPE-1", actuated_target="PP-1",
        associations=[("actuates", "PP-1"), ("senses", "PIPE-1")],
        information_flows=[("PIPE-1", "PP-1")],
    )
    return g


def test_empty_graph_text():
    assert describe(PidGraph()) == "The P&ID is empty.\n"


def test_element_sentence_contains_class_and_tag():
    g = PidGraph()
    el = make_element("TK-1", "T-01", "Tank")
    g.elements[el.id] = el
    text = describe(g)
    assert "Tank" in text
    assert "T-01" in text
    assert "2 nozzles" in text


def test_full_description_sentences():
    text = describe(loopy_graph())
    assert "A pipe L-100 runs from T-01 to P-01." in text
    assert "T-01 has Capacity = 100 m3." in text
    assert "Control loop FIC-101 senses L-100 and actuates P-01." in text


def test_describe_rejects_invalid_graph():
    g = tank_pump_graph()
    del g.elements["TK-1"]
    with pytest.raises(ValueError):
        describe(g)


def test_mention_set_projection():
    assert mention_set_of_graph(PidGraph()) == MentionSet()
    m = mention_set_of_graph(loopy_graph())
    assert m.elements == {("Tank", "T-01"), ("Pump", "P-01")}
    assert m.connections == {("T-01", "P-01")}
    assert m.attributes == {("T-01", "Capacity")}
    assert m.loops == {"FIC-101"}
    assert m.artifact_count == 5


def test_extract_from_ad_hoc_prompt():
    m = extract_mentions("Add a tank T-01 and a pump P-01, connect T-01 to P-01")
    assert m.elements == {("Tank", "T-01"), ("Pump", "P-01")}
    assert m.connections == {("T-01", "P-01")}
    assert m.attributes == set()
    assert m.loops == set()


def test_extract_empty_text():
    assert extract_mentions("") == MentionSet()


def test_extract_synonyms_and_multiword_classes():
    m = extract_mentions("Install a vessel V-02, a heat exchanger HX-07 and "
                         "a ball valve XV-03.")
    assert ("Tank", "V-02") in m.elements
    assert ("HeatExchanger", "HX-07") in m.elements
    assert ("BallValve", "XV-03") in m.elements


def test_extract_does_not_pair_distant_class_words():
    m = extract_mentions("The pump feed line runs across; later P-09 appears.")
    assert m.elements == set()


def test_extract_connected_to_phrasing():
    m = extract_mentions("T-01 is connected to the inlet of P-01")
    assert ("T-01", "P-01") in m.connections


def test_closed_loop_on_fixture():
    g = loopy_graph()
    assert extract_mentions(describe(g)) == mention_set_of_graph(g)


def test_closed_loop_property_random_graphs():
    rng = random.Random(71)
    for _ in range(200):
        g = random_graph(rng)
        assert extract_mentions(describe(g)) == mention_set_of_graph(g)


def test_describe_deterministic():
    g = loopy_graph()
    assert describe(g) == describe(g)


def test_synonym_config_file(tmp_path):
    cfg = tmp_path / "synonyms.txt"
    cfg.write_text("# extras\nkettle=Tank\n", encoding="utf-8")
    table = load_synonyms(cfg)
    assert table["kettle"] == "Tank"
    m = extract_mentions("Add a kettle K-01.", synonyms=table)
    assert ("Tank", "K-01") in m.elements
