from __future__ import annotations

import random

import pytest

from helpers import make_element, make_connection, random_graph, tank_pump_graph
from pidcopilot.model import (
    ActuationLoop,
    ConnectionEnd,
    DEFAULT_TAXONOMY,
    PidConnection,
    PidGraph,
    Severity,
    Taxonomy,
    validate_graph,
)


def errors(diags):
    return [d for d in diags if d.severity is Severity.ERROR]


def test_empty_graph_is_valid():
    assert validate_graph(PidGraph()) == []


def test_dangling_connection_endpoint_reported():
    g = PidGraph()
    tank = make_element("TK-1", "T-01")
    g.elements[tank.id] = tank
    g.connections["PIPE-1"] = PidConnection(
        id="PIPE-1",
        source=ConnectionEnd("TK-1", "N1"),
        target=ConnectionEnd("P-99", "N1"),
    )
    diags = errors(validate_graph(g))
    assert len(diags) == 1
    assert diags[0].target_id == "PIPE-1"
    assert "P-99" in diags[0].message


def test_duplicate_component_name_reported():
    g = PidGraph()
    for el_id in ("TK-1", "TK-2"):
        el = make_element(el_id, "T-01")
        g.elements[el.id] = el
    diags = errors(validate_graph(g))
    assert len(diags) == 1
    assert diags[0].target_id == "TK-2"
    assert "T-01" in diags[0].message


def test_valid_fixture_graph_passes():
    assert validate_graph(tank_pump_graph()) == []


def test_missing_nozzle_on_endpoint():
    g = tank_pump_graph()
    g.connections["PIPE-1"].source = ConnectionEnd("TK-1", "N9")
    diags = errors(validate_graph(g))
    assert any("N9" in d.message for d in diags)


def test_self_loop_on_same_nozzle_rejected():
    g = tank_pump_graph()
    g.connections["PIPE-1"].target = g.connections["PIPE-1"].source
    assert any("loops back" in d.message for d in errors(validate_graph(g)))


def test_element_without_nozzles_rejected():
    g = PidGraph()
    el = make_element("TK-1", "T-01", nozzle_count=0)
    g.elements[el.id] = el
    assert any("no nozzles" in d.message for d in errors(validate_graph(g)))


def test_position_scale_atomicity():
    g = tank_pump_graph()
    g.elements["TK-1"].position = (0.0, 0.0)
    diags = errors(validate_graph(g))
    assert any("position and scale" in d.message for d in diags)
    g.elements["TK-1"].scale = (1.0, 1.0)
    assert validate_graph(g) == []
    g.elements["TK-1"].scale = (0.0, 1.0)
    assert any("positive" in d.message for d in errors(validate_graph(g)))


def test_loop_reference_and_path_checks():
    g = tank_pump_graph()
    g.loops["LOOP-1"] = ActuationLoop(
        id="LOOP-1", loop_tag="FIC-101",
        sensing_target="PIPE-1", actuated_target="PP-1",
        associations=[("actuates", "PP-1"), ("senses", "PIPE-1")],
        information_flows=[("PIPE-1", "PP-1")],
    )
    assert validate_graph(g) == []

    g.loops["LOOP-1"].information_flows = []
    assert any("path" in d.message for d in errors(validate_graph(g)))

    g.loops["LOOP-1"].information_flows = [("PIPE-1", "PP-1")]
    g.loops["LOOP-1"].sensing_target = "NOPE-1"
    diags = errors(validate_graph(g))
    assert any("NOPE-1" in d.message for d in diags)


def test_unknown_kind_rejected():
    g = PidGraph()
    el = make_element("TK-1", "T-01")
    el.kind = "Gadget"
    g.elements[el.id] = el
    assert any("kind" in d.message for d in errors(validate_graph(g)))


def test_diagnostics_are_deterministic_and_sorted():
    g = PidGraph()
    a = make_element("B-1", "X-01", nozzle_count=0)
    b = make_element("A-1", "X-01")
    g.elements[a.id] = a
    g.elements[b.id] = b
    first = validate_graph(g)
    second = validate_graph(g)
    assert first == second
    keys = [(d.target_id or "", d.message) for d in first]
    assert keys == sorted(keys)


def test_random_graphs_validate_clean():
    rng = random.Random(7)
    for _ in range(50):
        assert validate_graph(random_graph(rng)) == []


def test_taxonomy_uri_is_base_plus_name():
    cc = DEFAULT_TAXONOMY.component_class("Tank")
    assert cc.uri == "http://sandbox.dexpi.org/rdl/Tank"


def test_taxonomy_resolve_falls_back():
    assert DEFAULT_TAXONOMY.resolve("FluxCapacitor").name == "Equipment"
    assert DEFAULT_TAXONOMY.resolve("BallValve").name == "BallValve"


def test_taxonomy_config_file(tmp_path):
    cfg = tmp_path / "classes.txt"
    cfg.write_text("# extras\nCentrifuge=Centrifuge\nReactor=rdl-reactor\n", encoding="utf-8")
    tax = Taxonomy.from_file(cfg)
    assert "Centrifuge" in tax
    assert tax.component_class("Reactor").uri.endswith("/rdl-reactor")
    assert "Tank" in tax

    bad = tmp_path / "bad.txt"
    bad.write_text("Nonsense line\n", encoding="utf-8")
    with pytest.raises(ValueError):
        Taxonomy.from_file(bad)
