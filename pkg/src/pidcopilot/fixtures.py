"""Helpers for authoring scripted-backend fixtures.

A fixture is the exact replay of one session: for every turn, one planner
response followed by one executor response per planned step, each wrapped
in the fenced block the agent expects.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any


def plan_text(entries: list[tuple[str, str]]) -> str:
    """Planner reply: [(description, utterance), ...] -> fenced JSON."""
    data = [{"description": d, "utterance": u} for d, u in entries]
    return "```\n" + json.dumps(data, indent=2, ensure_ascii=False) + "\n```\n"


def fragment_text(steps: list[dict[str, Any]]) -> str:
    """Executor reply: [{"action": ..., "payload": {...}}, ...] -> fenced JSON."""
    return "```\n" + json.dumps(steps, indent=2, ensure_ascii=False) + "\n```\n"


def raw_xml_text(xml: str) -> str:
    """Adapter reply for zero/few-shot modes: the raw XML in a fence."""
    return "```\n" + xml + "```\n" if xml.endswith("\n") else "```\n" + xml + "\n```\n"


def fixture_dict(turns: list[list[str]], name: str = "fixture") -> dict[str, Any]:
    """Assemble the fixture file structure from per-turn response lists.

    ``turns[i][0]`` answers turn i's planning call; the remaining entries
    answer its execution calls in order.
    """
    responses = []
    for turn_idx, texts in enumerate(turns):
        for slot, text in enumerate(texts):
            responses.append({
                "turn": turn_idx,
                "step": "plan" if slot == 0 else slot - 1,
                "text": text,
            })
    return {"version": "1", "name": name, "responses": responses}


def write_fixture(path: str | Path, turns: list[list[str]],
                  name: str = "fixture") -> Path:
    path = Path(path)
    path.write_text(json.dumps(fixture_dict(turns, name), indent=2,
                               ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def element_step(component_class: str, tag: str, *,
                 nozzle_count: int | None = None,
                 attributes: list[dict[str, str]] | None = None) -> dict[str, Any]:
    payload: dict[str, Any] = {"component_class": component_class, "tag": tag}
    if nozzle_count is not None:
        payload["nozzle_count"] = nozzle_count
    if attributes:
        payload["attributes"] = attributes
    return {"action": "AddElement", "payload": payload}


def connection_step(from_tag: str, to_tag: str, line_number: str | None = None,
                    ) -> dict[str, Any]:
    payload: dict[str, Any] = {"from": {"tag": from_tag}, "to": {"tag": to_tag}}
    if line_number is not None:
        payload["line_number"] = line_number
    return {"action": "AddConnection", "payload": payload}


def actuation_step(loop_tag: str, sensing_target: str,
                   actuated_target: str) -> dict[str, Any]:
    return {"action": "AddActuation", "payload": {
        "loop_tag": loop_tag, "sensing_target": sensing_target,
        "actuated_target": actuated_target}}


def attribute_step(target: str, name: str, value: str,
                   unit: str | None = None) -> dict[str, Any]:
    payload: dict[str, Any] = {"target": target, "name": name, "value": value}
    if unit is not None:
        payload["unit"] = unit
    return {"action": "SetAttribute", "payload": payload}
