from __future__ import annotations

import json
import random
import shutil
from pathlib import Path

import pytest

from helpers import random_graph, tank_pump_graph
from pidcopilot.backends import ScriptedBackend
from pidcopilot.describe import MentionSet, mention_set_of_graph
from pidcopilot.dexpi import emit_conceptual, merge_layout, parse_xml, serialize_xml
from pidcopilot.evaluate import (
    check_completeness,
    check_soundness,
    few_shot_examples,
    generate_few_shot,
    generate_zero_shot,
    load_bench,
    parse_case_file,
    render_table,
    report_payload,
    run_benchmark,
)
from pidcopilot.fixtures import (
    attribute_step,
    element_step,
    fragment_text,
    raw_xml_text,
    write_fixture,
)
from pidcopilot.layout import auto_layout

BENCH = Path(__file__).resolve().parent.parent / "bench"


def full_xml(g):
    return serialize_xml(merge_layout(emit_conceptual(g), auto_layout(g)))


def gold_tank_pump():
    return MentionSet(elements={("Tank", "T-01"), ("Pump", "P-01")},
                      connections={("T-01", "P-01")})


# ── soundness ────────────────────────────────────────────────────────────────


def test_soundness_two_of_three():
    g = tank_pump_graph()
    del g.connections["PIPE-1"]
    report = check_soundness(gold_tank_pump(), full_xml(g))
    row = report.per_case[0]
    assert (row.found, row.expected) == (2, 3)
    assert row.missing == ["connection T-01->P-01"]
    assert report.aggregate == pytest.approx(200 / 3)


def test_soundness_emitted_graph_scores_full():
    g = tank_pump_graph()
    report = check_soundness(gold_tank_pump(), serialize_xml(emit_conceptual(g)))
    assert report.aggregate == 100.0


def test_soundness_unparseable_scores_zero():
    report = check_soundness(gold_tank_pump(), "<PlantModel><oops")
    assert report.per_case[0].found == 0
    assert report.aggregate == 0.0
    assert report.diagnostics


def test_soundness_against_own_mentions_random_graphs():
    rng = random.Random(79)
    for _ in range(30):
        g = random_graph(rng)
        gold = mention_set_of_graph(g)
        report = check_soundness(gold, serialize_xml(emit_conceptual(g)))
        assert report.aggregate == 100.0, report.per_case[0].missing


def test_soundness_wrong_class_not_counted():
    g = tank_pump_graph()
    xml = full_xml(g)
    gold = MentionSet(elements={("Pump", "T-01")})
    assert check_soundness(gold, xml).aggregate == 0.0


# ── completeness ─────────────────────────────────────────────────────────────


def test_completeness_full_document_is_100():
    rng = random.Random(83)
    for _ in range(20):
        g = random_graph(rng)
        report = check_completeness(full_xml(g))
        assert report.aggregate == 100.0, [
            (r.section_id, r.failures) for r in report.per_section if not r.ok]


def test_completeness_single_mutation_drops_one_section():
    g = tank_pump_graph()
    doc, _ = parse_xml(full_xml(g))
    system = next(n for n in doc.root.children if n.tag == "PipingNetworkSystem")
    segment = system.find("PipingNetworkSegment")
    segment.children = [c for c in segment.children if c.tag != "CenterLine"]
    report = check_completeness(serialize_xml(doc))
    n = report.sections_total
    assert report.sections_passing == n - 1
    assert report.aggregate == pytest.approx(100.0 * (n - 1) / n)
    failing = [r for r in report.per_section if not r.ok]
    assert failing[0].failures == ["CenterLine"]


def test_completeness_conceptual_only_fails_position_scale():
    g = tank_pump_graph()
    report = check_completeness(serialize_xml(emit_conceptual(g)))
    element_rows = [r for r in report.per_section if r.kind == "EquipmentOrInstrument"]
    assert element_rows
    for row in element_rows:
        assert "Position and Scale" in row.failures


def test_completeness_malformed_xml_single_failing_row():
    report = check_completeness("not xml at all")
    assert report.sections_total == 1
    assert report.aggregate == 0.0


def test_completeness_counts_sections_under_foreign_roots():
    # adapter output often skips the PlantModel wrapper; sections must
    # still be discovered, not vacuously scored
    xml = ('<Diagram><Stuff><Equipment ID="E1" ComponentName="T-01" '
           'ComponentClass="Tank"/></Stuff></Diagram>')
    report = check_completeness(xml)
    assert report.sections_total == 1
    assert not report.per_section[0].ok


def test_completeness_wrong_node_kind_fails():
    xml = ('<PlantModel><Vessel ID="V1" ComponentName="T-01" '
           'ComponentClass="Tank" ComponentClassURI="http://x.example/rdl/Tank">'
           "<Nozzle ID=\"n\"><Node ID=\"nn\"/></Nozzle><Position/><Scale/>"
           "</Vessel></PlantModel>")
    report = check_completeness(xml)
    assert report.sections_total == 1
    assert not report.per_section[0].ok
    assert "node kind" in report.per_section[0].failures


# ── bench ────────────────────────────────────────────────────────────────────


def test_bundled_bench_scores_100_100():
    result = run_benchmark(BENCH)
    assert result.notes == []
    assert result.soundness.aggregate == 100.0
    assert result.completeness.aggregate == 100.0
    assert len(result.soundness.per_case) >= 30


def test_bench_soundness_calibration_single_missing_connection(tmp_path):
    bench = tmp_path / "bench"
    shutil.copytree(BENCH, bench)
    fixture_path = bench / "tank-pump-line.fixture.json"
    fixture = json.loads(fixture_path.read_text())
    swapped = False
    for entry in fixture["responses"]:
        if "AddConnection" in entry["text"]:
            entry["text"] = fragment_text([attribute_step("T-10", "Padding", "1")])
            swapped = True
    assert swapped
    fixture_path.write_text(json.dumps(fixture), encoding="utf-8")
    # the golden file no longer matches; that is reported, not fatal
    result = run_benchmark(bench)
    a = result.soundness.expected
    assert result.soundness.found == a - 1
    assert result.soundness.aggregate == pytest.approx(100.0 * (a - 1) / a)


def test_empty_bench_dir_is_an_error(tmp_path):
    with pytest.raises(ValueError, match="no cases"):
        run_benchmark(tmp_path)


def test_case_file_parsing_and_errors(tmp_path):
    good = tmp_path / "demo.case.txt"
    good.write_text("id: demo\nprompt: Add tank T-01.\nelement: Tank T-01\n",
                    encoding="utf-8")
    case = parse_case_file(good)
    assert case.id == "demo"
    assert case.gold.elements == {("Tank", "T-01")}

    bad = tmp_path / "bad.case.txt"
    bad.write_text("prompt: x\nwhatever: y\nelement: Tank T-01\n", encoding="utf-8")
    with pytest.raises(ValueError, match="whatever"):
        parse_case_file(bad)

    no_gold = tmp_path / "no-gold.case.txt"
    no_gold.write_text("prompt: x\n", encoding="utf-8")
    with pytest.raises(ValueError, match="gold"):
        parse_case_file(no_gold)


def test_aggregates_are_order_independent():
    result = run_benchmark(BENCH)
    rows = list(result.soundness.per_case)
    random.Random(5).shuffle(rows)
    shuffled_found = sum(r.found for r in rows)
    assert shuffled_found == result.soundness.found
    sections = list(result.completeness.per_section)
    random.Random(5).shuffle(sections)
    assert (sum(1 for s in sections if s.ok)
            == result.completeness.sections_passing)


def test_report_payload_and_table_render():
    result = run_benchmark(BENCH)
    payload = report_payload(result)
    assert payload["soundness"]["aggregate"] == 100.0
    assert payload["completeness"]["total"] == len(result.completeness.per_section)
    table = render_table(result.soundness, result.completeness, ["hello"])
    assert "TOTAL" in table
    assert "note: hello" in table


# ── zero/few-shot adapters ───────────────────────────────────────────────────

INCOMPLETE_XML = ('<PlantModel><Equipment ID="E-1" ComponentName="T-10" '
                  'ComponentClass="Tank"/></PlantModel>\n')


def test_zero_shot_adapter_extracts_xml():
    backend = ScriptedBackend.from_texts([raw_xml_text(INCOMPLETE_XML)])
    xml = generate_zero_shot("Add a tank T-10", backend)
    assert xml.startswith("<PlantModel>")


def test_few_shot_prompt_embeds_examples():
    backend = ScriptedBackend.from_texts([raw_xml_text(INCOMPLETE_XML)])
    generate_few_shot("Add a tank T-10", backend)
    user_text = backend.calls[0][1]
    assert user_text.count("<PlantModel") >= 2
    assert "Request:" in user_text


def test_few_shot_examples_are_complete_documents():
    for xml in few_shot_examples():
        assert check_completeness(xml).aggregate == 100.0


def test_adapter_completeness_strictly_below_pipeline(tmp_path):
    # same prompts/gold, two fixture sets: the pipeline one and a raw-XML
    # adapter one that omits drawing data
    pipeline_dir = tmp_path / "pipeline"
    adapter_dir = tmp_path / "adapter"
    pipeline_dir.mkdir()
    adapter_dir.mkdir()
    for case_id in ("single-tank", "tank-pump-line", "attr-capacity"):
        for target in (pipeline_dir, adapter_dir):
            shutil.copy(BENCH / f"{case_id}.case.txt", target)
        shutil.copy(BENCH / f"{case_id}.fixture.json", pipeline_dir)
        write_fixture(adapter_dir / f"{case_id}.fixture.json",
                      [[raw_xml_text(INCOMPLETE_XML)]], name=case_id)
    for case_id in ("tank-pump-line",):  # goldens referenced by the case files
        shutil.copy(BENCH / f"{case_id}.golden.dexpi.xml", pipeline_dir)
        shutil.copy(BENCH / f"{case_id}.golden.dexpi.xml", adapter_dir)

    pipeline = run_benchmark(pipeline_dir)
    zeroshot = run_benchmark(adapter_dir, mode="zeroshot")
    fewshot = run_benchmark(adapter_dir, mode="fewshot")
    assert pipeline.completeness.aggregate == 100.0
    assert zeroshot.completeness.aggregate < pipeline.completeness.aggregate
    assert fewshot.completeness.aggregate < pipeline.completeness.aggregate


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="mode"):
        run_benchmark(BENCH, mode="oneshot")
