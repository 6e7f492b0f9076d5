"""JSON feedback handed to the analyzer: training totals, recent decisions, test metrics."""

from __future__ import annotations

import json
from typing import Any, Sequence

import jsonschema

from ..rl.agent import Step
from ..sim.metrics import LineMetrics, MetricsReport

TRAJECTORY_LIMIT = 50

_LINE_KEYS = ["SD_time_headways", "avg_passenger_travel_time", "avg_passenger_waiting_time", "avg_holding_time"]
_SHARED_KEYS = _LINE_KEYS[:3]
_OVERALL_KEYS = ["avg_passenger_travel_time", "avg_passenger_waiting_time"]


def _metric_block(keys: list[str]) -> dict[str, Any]:
    return {
        "type": "object",
        "properties": {k: {"type": "number", "minimum": 0} for k in keys},
        "required": keys,
        "additionalProperties": False,
    }


_STATE_LIST = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 6, "maxItems": 6},
               "maxItems": TRAJECTORY_LIMIT}

FEEDBACK_SCHEMA: dict[str, Any] = {
    "type": "array",
    "minItems": 2,
    "maxItems": 2,
    "prefixItems": [
        {
            "type": "object",
            "properties": {
                "training_history": {
                    "type": "object",
                    "properties": {"total_rewards": {"type": "array", "items": {"type": "number"}}},
                    "required": ["total_rewards"],
                    "additionalProperties": False,
                }
            },
            "required": ["training_history"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "test_history": {
                    "type": "object",
                    "properties": {
                        "current_states": _STATE_LIST,
                        "actions": {"type": "array", "items": {"enum": [0, 1]}, "maxItems": TRAJECTORY_LIMIT},
                        "rewards": {"type": "array", "items": {"type": "number"}, "maxItems": TRAJECTORY_LIMIT},
                        "next_states": _STATE_LIST,
                    },
                    "required": ["current_states", "actions", "rewards", "next_states"],
                    "additionalProperties": False,
                },
                "test_results_shared_part": _metric_block(_SHARED_KEYS),
                "test_results_overall": _metric_block(_OVERALL_KEYS),
            },
            "patternProperties": {r"^test_results_line_[1-9][0-9]*$": _metric_block(_LINE_KEYS)},
            "required": ["test_history", "test_results_line_1", "test_results_overall"],
            "additionalProperties": False,
        },
    ],
    "items": False,
}


def truncate_trajectory(traj: Sequence[Step], limit: int = TRAJECTORY_LIMIT) -> list[Step]:
    """Keep the last ``limit`` decisions, in order."""
    if limit <= 0:
        return []
    return list(traj[-limit:])


def _line_block(m: LineMetrics) -> dict[str, float]:
    return {
        "SD_time_headways": m.sd_headway,
        "avg_passenger_travel_time": m.avg_travel_time,
        "avg_passenger_waiting_time": m.avg_waiting_time,
        "avg_holding_time": m.avg_holding_time,
    }


def feedback_document(evol: Sequence[float], traj: Sequence[Step], rslt: MetricsReport,
                      limit: int = TRAJECTORY_LIMIT) -> list[dict[str, Any]]:
    """Build the two-element feedback structure.

    Lines are numbered 1..k in scenario order. The shared block only appears
    when some stop is served by more than one line.
    """
    tail = truncate_trajectory(traj, limit)
    second: dict[str, Any] = {
        "test_history": {
            "current_states": [list(map(float, s.state)) for s in tail],
            "actions": [int(s.action) for s in tail],
            "rewards": [float(s.reward) for s in tail],
            "next_states": [list(map(float, s.next_state or s.state)) for s in tail],
        }
    }
    for i, m in enumerate(rslt.lines.values(), start=1):
        second[f"test_results_line_{i}"] = _line_block(m)
    if rslt.shared is not None:
        sh = _line_block(rslt.shared)
        second["test_results_shared_part"] = {k: sh[k] for k in _SHARED_KEYS}
    second["test_results_overall"] = {
        "avg_passenger_travel_time": rslt.overall.avg_travel_time,
        "avg_passenger_waiting_time": rslt.overall.avg_waiting_time,
    }
    return [{"training_history": {"total_rewards": [float(x) for x in evol]}}, second]


def encode_feedback_json(evol: Sequence[float], traj: Sequence[Step], rslt: MetricsReport,
                         limit: int = TRAJECTORY_LIMIT, indent: int | None = 2) -> str:
    # repr-based float output keeps full precision, so loads(dumps(x)) == x
    return json.dumps(feedback_document(evol, traj, rslt, limit), indent=indent)


def validate_feedback(doc: str | list) -> None:
    """Raise jsonschema.ValidationError if the document does not conform."""
    data = json.loads(doc) if isinstance(doc, str) else doc
    jsonschema.validate(data, FEEDBACK_SCHEMA, cls=jsonschema.Draft202012Validator)


def results_summary(rslt: MetricsReport) -> str:
    """Test metrics only (used for the refiner's failed-attempt section)."""
    doc = feedback_document([], [], rslt)[1]
    doc.pop("test_history")
    return json.dumps(doc, indent=2)
