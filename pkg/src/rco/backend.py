"""Pluggable reasoning backend: deterministic scripted tables for tests and a
chat-completions HTTP client for real models.

Every response goes through strict structured-output parsing: the first JSON
object embedded in the raw text is extracted and validated against the
purpose's schema. Unknown tokens are rejections, never coercions, so a caller
either sees a fully-parsed value or a SchemaViolation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Optional, Protocol, Union

from .domain import (
    Behavior,
    ConditionActionPair,
    EnvironmentSnapshot,
    ExecutionCondition,
    Hazard,
    HighLevelAction,
    MotionKind,
    Navigation,
    ObjectClass,
    OutOfRangeError,
    SafetyConstraints,
    SpeedControl,
    Strategy,
    Surrounding,
)

ENV_URL = "RCO_BACKEND_URL"
ENV_MODEL = "RCO_BACKEND_MODEL"
ENV_TOKEN = "RCO_BACKEND_TOKEN"


class BackendError(Exception):
    """Base for transport and parsing failures; callers map these to
    risk-averse fallbacks."""


class BackendTimeout(BackendError):
    pass


class TransportFailure(BackendError):
    pass


class SchemaViolation(BackendError):
    def __init__(self, message: str, field: Optional[str] = None, position: Optional[int] = None):
        detail = message
        if field is not None:
            detail += f" (field: {field})"
        if position is not None:
            detail += f" (position: {position})"
        super().__init__(detail)
        self.field = field
        self.position = position


class Purpose(str, Enum):
    HAZARD_AND_PLAN = "hazard_and_plan"
    SHORT_TERM_MOTION = "short_term_motion"
    SAFETY_CONSTRAINTS = "safety_constraints"


@dataclass(frozen=True)
class BackendRequest:
    purpose: Purpose
    prompt: str
    payload: str  # canonical JSON of the request inputs
    timeout_ms: int = 2000

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive, got {self.timeout_ms}")

    def scenario_key(self) -> str:
        try:
            return str(json.loads(self.payload).get("scenario_key", ""))
        except (json.JSONDecodeError, AttributeError):
            return ""


@dataclass(frozen=True)
class HazardAndPlan:
    hazards: tuple[Hazard, ...]
    strategy: Strategy


@dataclass(frozen=True)
class PlanSkeleton:
    """Wire-level plan before the planner applies caps and truncation."""

    strategy: Strategy
    pairs: tuple[ConditionActionPair, ...] = ()
    wait: Optional[int] = None
    trigger: Optional[ExecutionCondition] = None


Parsed = Union[HazardAndPlan, PlanSkeleton, SafetyConstraints]


@dataclass(frozen=True)
class BackendResponse:
    raw: str
    parsed: Optional[Parsed]
    latency_ms: float = 0.0


class Backend(Protocol):
    def call(self, req: BackendRequest) -> BackendResponse: ...


# ---------------------------------------------------------------------------
# Structured-output parsing
# ---------------------------------------------------------------------------

def extract_first_json_object(raw: str) -> tuple[dict[str, Any], int]:
    """Return the first balanced JSON object in ``raw`` and its start offset."""
    decoder = json.JSONDecoder()
    idx = raw.find("{")
    while idx != -1:
        try:
            obj, _end = decoder.raw_decode(raw, idx)
        except json.JSONDecodeError:
            idx = raw.find("{", idx + 1)
            continue
        if isinstance(obj, dict):
            return obj, idx
        idx = raw.find("{", idx + 1)
    raise SchemaViolation("no JSON object found in response", position=0)


def _enum_field(d: dict[str, Any], key: str, enum_cls: type, *, where: str) -> Any:
    if key not in d:
        raise SchemaViolation(f"missing field in {where}", field=key)
    try:
        return enum_cls(d[key])
    except ValueError:
        raise SchemaViolation(f"unknown {key} token: {d[key]!r}", field=key) from None


def _parse_hazard_and_plan(obj: dict[str, Any]) -> HazardAndPlan:
    hazards_raw = obj.get("hazards")
    if not isinstance(hazards_raw, list):
        raise SchemaViolation("hazards must be a list", field="hazards")
    hazards = []
    for h in hazards_raw:
        if not isinstance(h, dict):
            raise SchemaViolation("hazard entries must be objects", field="hazards")
        hazards.append(
            Hazard(
                _enum_field(h, "object", ObjectClass, where="hazard"),
                _enum_field(h, "motion", MotionKind, where="hazard"),
            )
        )
    strategy = _enum_field(obj, "strategy", Strategy, where="hazard_and_plan")
    return HazardAndPlan(tuple(hazards), strategy)


def _parse_plan(obj: dict[str, Any]) -> PlanSkeleton:
    strategy = _enum_field(obj, "strategy", Strategy, where="plan")
    if strategy is Strategy.MOVE:
        pairs_raw = obj.get("pairs")
        if not isinstance(pairs_raw, list):
            raise SchemaViolation("move plan requires a pairs list", field="pairs")
        pairs = []
        for p in pairs_raw:
            if not isinstance(p, dict):
                raise SchemaViolation("pair entries must be objects", field="pairs")
            pairs.append(
                ConditionActionPair(
                    _enum_field(p, "condition", ExecutionCondition, where="pair"),
                    HighLevelAction(
                        _enum_field(p, "behavior", Behavior, where="pair"),
                        _enum_field(p, "speed", SpeedControl, where="pair"),
                    ),
                )
            )
        return PlanSkeleton(strategy, pairs=tuple(pairs))
    wait = obj.get("wait")
    if not isinstance(wait, int) or isinstance(wait, bool) or wait < 0:
        raise SchemaViolation("wait must be a non-negative integer", field="wait")
    trigger = _enum_field(obj, "trigger", ExecutionCondition, where="plan")
    return PlanSkeleton(strategy, wait=wait, trigger=trigger)


def _parse_constraints(obj: dict[str, Any]) -> SafetyConstraints:
    fields = ("v_max", "d_min", "ac_max", "de_max", "psi_max", "d_brake")
    values = {}
    for f in fields:
        v = obj.get(f)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaViolation("constraint fields must be numbers", field=f)
        values[f] = float(v)
    try:
        return SafetyConstraints(**values)
    except OutOfRangeError as exc:
        raise SchemaViolation(f"constraint out of range: {exc}", field=exc.field_name) from None


def parse_structured(raw: str, purpose: Purpose) -> Parsed:
    """Extract and validate the first JSON object of ``raw`` per purpose."""
    obj, pos = extract_first_json_object(raw)
    try:
        if purpose is Purpose.HAZARD_AND_PLAN:
            return _parse_hazard_and_plan(obj)
        if purpose is Purpose.SHORT_TERM_MOTION:
            return _parse_plan(obj)
        return _parse_constraints(obj)
    except SchemaViolation as exc:
        if exc.position is None:
            exc.position = pos
        raise


# ---------------------------------------------------------------------------
# Request builders (shared by planner and safety)
# ---------------------------------------------------------------------------

def _render_prompt(name: str, **subs: str) -> str:
    text = resources.files("rco").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")
    for key, value in subs.items():
        text = text.replace("{" + key + "}", value)
    return text


def _history_text(history: list[EnvironmentSnapshot]) -> str:
    lines = []
    for snap in history:
        parts = []
        for view in snap.perception:
            objs = ", ".join(
                f"{o.cls.value}@{o.range_m:.0f}m" for o in view.visible_objects
            ) or "nothing"
            defs = f"{len(view.deficits)} deficit region(s)" if view.deficits else "no deficits"
            parts.append(f"{view.view.value}: {objs}; {defs}")
        lines.append(f"tick {snap.tick}: " + " | ".join(parts))
    return "\n".join(lines)


def hazard_request(
    history: list[EnvironmentSnapshot], scenario_key: str, timeout_ms: int = 2000
) -> BackendRequest:
    payload = json.dumps(
        {
            "scenario_key": scenario_key,
            "purpose": Purpose.HAZARD_AND_PLAN.value,
            "history": [s.to_json() for s in history],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    prompt = _render_prompt("hazard_inference", history=_history_text(history))
    return BackendRequest(Purpose.HAZARD_AND_PLAN, prompt, payload, timeout_ms)


def motion_request(
    hazards: tuple[Hazard, ...],
    strategy: Strategy,
    navi: Navigation,
    snapshot: EnvironmentSnapshot,
    scenario_key: str,
    timeout_ms: int = 2000,
) -> BackendRequest:
    payload = json.dumps(
        {
            "scenario_key": scenario_key,
            "purpose": Purpose.SHORT_TERM_MOTION.value,
            "hazards": [h.to_json() for h in hazards],
            "strategy": strategy.value,
            "navi": navi.to_json(),
            "snapshot": snapshot.to_json(),
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    prompt = _render_prompt(
        "short_term_motion",
        hazards=", ".join(f"{h.object.value} ({h.motion.value})" for h in hazards) or "none",
        strategy=strategy.value,
        geometry=navi.road_geometry.value,
    )
    return BackendRequest(Purpose.SHORT_TERM_MOTION, prompt, payload, timeout_ms)


def constraints_request(
    navi: Navigation,
    surrounding: Surrounding,
    nearest_obstacle_m: Optional[float],
    scenario_key: str,
    timeout_ms: int = 2000,
) -> BackendRequest:
    payload = json.dumps(
        {
            "scenario_key": scenario_key,
            "purpose": Purpose.SAFETY_CONSTRAINTS.value,
            "navi": navi.to_json(),
            "surrounding": surrounding.to_json(),
            "nearest_obstacle_m": nearest_obstacle_m,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    prompt = _render_prompt(
        "safety_constraints",
        weather=surrounding.weather.value,
        daylight=surrounding.daylight.value,
        traffic=surrounding.traffic_density.value,
        geometry=navi.road_geometry.value,
        obstacle="none" if nearest_obstacle_m is None else f"{nearest_obstacle_m:.1f} m",
    )
    return BackendRequest(Purpose.SAFETY_CONSTRAINTS, prompt, payload, timeout_ms)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

class ScriptedBackend:
    """Deterministic table lookup keyed by (purpose, scenario key).

    Table shape: ``{purpose_value: {scenario_key: response_object}}``. The
    response object is serialized and re-parsed through the same structured
    parser as real model output, so both paths share one schema.
    """

    def __init__(self, table: dict[str, dict[str, Any]]):
        self.table = table

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def bundled(cls) -> "ScriptedBackend":
        text = resources.files("rco").joinpath("data/scripted_responses.json").read_text(
            encoding="utf-8"
        )
        return cls(json.loads(text))

    def call(self, req: BackendRequest) -> BackendResponse:
        key = req.scenario_key()
        entry = self.table.get(req.purpose.value, {}).get(key)
        if entry is None:
            raise SchemaViolation(f"no scripted response for key {key!r}", field="scenario_key")
        raw = json.dumps(entry, sort_keys=True, separators=(",", ":"))
        parsed = parse_structured(raw, req.purpose)
        return BackendResponse(raw=raw, parsed=parsed, latency_ms=0.0)


_SYSTEM_PREAMBLES = {
    Purpose.HAZARD_AND_PLAN: (
        "You are a driving hazard analyst. Respond with a single JSON object: "
        '{"hazards": [{"object": ..., "motion": ...}], "strategy": "move"|"stop_observe_move"}.'
    ),
    Purpose.SHORT_TERM_MOTION: (
        "You are a short-term motion planner. Respond with a single JSON object, either "
        '{"strategy": "move", "pairs": [{"condition": ..., "behavior": ..., "speed": ...}]} or '
        '{"strategy": "stop_observe_move", "wait": <int>, "trigger": ...}.'
    ),
    Purpose.SAFETY_CONSTRAINTS: (
        "You set vehicle safety limits. Respond with a single JSON object with numeric fields "
        "v_max, d_min, ac_max, de_max, psi_max, d_brake (SI units)."
    ),
}


class HttpBackend:
    """Chat-completions client: POST {model, messages, temperature=0} with a
    bearer token, parse the first completion's content."""

    def __init__(self, url: str, model: str, token: str = ""):
        if not url:
            raise ValueError("backend url must be non-empty")
        self.url = url
        self.model = model
        self.token = token

    @classmethod
    def from_env(cls) -> "HttpBackend":
        return cls(
            url=os.environ.get(ENV_URL, ""),
            model=os.environ.get(ENV_MODEL, "default"),
            token=os.environ.get(ENV_TOKEN, ""),
        )

    def call(self, req: BackendRequest) -> BackendResponse:
        import requests

        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": _SYSTEM_PREAMBLES[req.purpose]},
                {"role": "user", "content": req.prompt},
            ],
            "temperature": 0,
        }
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        timeout_s = req.timeout_ms / 1000.0
        try:
            resp = requests.post(self.url, json=body, headers=headers, timeout=timeout_s)
        except requests.Timeout as exc:
            raise BackendTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from exc
        if resp.status_code != 200:
            raise TransportFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise SchemaViolation(f"malformed completion envelope: {exc}") from exc
        latency_ms = resp.elapsed.total_seconds() * 1000.0
        parsed = parse_structured(content, req.purpose)
        return BackendResponse(raw=content, parsed=parsed, latency_ms=latency_ms)
