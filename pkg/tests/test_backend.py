"""Structured-output parsing, scripted lookup, and the HTTP client."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings, strategies as st

from rco.backend import (
    BackendRequest,
    BackendTimeout,
    HazardAndPlan,
    HttpBackend,
    PlanSkeleton,
    Purpose,
    SchemaViolation,
    ScriptedBackend,
    TransportFailure,
    extract_first_json_object,
    parse_structured,
)
from rco.domain import (
    Behavior,
    ExecutionCondition,
    MotionKind,
    ObjectClass,
    SafetyConstraints,
    SpeedControl,
    Strategy,
)


def payload_for(key: str) -> str:
    return json.dumps({"scenario_key": key})


class TestParseStructured:
    def test_move_plan(self):
        raw = (
            '{"strategy":"move","pairs":[{"condition":"consistent_no_immediate_hazard",'
            '"behavior":"move_forward","speed":"constant_speed"}]}'
        )
        plan = parse_structured(raw, Purpose.SHORT_TERM_MOTION)
        assert isinstance(plan, PlanSkeleton)
        assert plan.strategy is Strategy.MOVE
        assert len(plan.pairs) == 1
        assert plan.pairs[0].condition is ExecutionCondition.CONSISTENT_NO_IMMEDIATE_HAZARD
        assert plan.pairs[0].action.behavior is Behavior.MOVE_FORWARD
        assert plan.pairs[0].action.speed is SpeedControl.CONSTANT_SPEED

    def test_wait_plan(self):
        raw = '{"strategy":"stop_observe_move","wait":3,"trigger":"consistent_no_immediate_hazard"}'
        plan = parse_structured(raw, Purpose.SHORT_TERM_MOTION)
        assert plan.strategy is Strategy.STOP_OBSERVE_MOVE
        assert plan.wait == 3
        assert plan.trigger is ExecutionCondition.CONSISTENT_NO_IMMEDIATE_HAZARD

    def test_hazards(self):
        raw = '{"hazards":[{"object":"pedestrian","motion":"crossing"}],"strategy":"stop_observe_move"}'
        parsed = parse_structured(raw, Purpose.HAZARD_AND_PLAN)
        assert isinstance(parsed, HazardAndPlan)
        assert parsed.hazards[0].object is ObjectClass.PEDESTRIAN
        assert parsed.hazards[0].motion is MotionKind.CROSSING
        assert parsed.strategy is Strategy.STOP_OBSERVE_MOVE

    def test_constraints(self):
        raw = '{"v_max":10,"d_min":5,"ac_max":3,"de_max":5,"psi_max":0.6,"d_brake":10}'
        parsed = parse_structured(raw, Purpose.SAFETY_CONSTRAINTS)
        assert parsed == SafetyConstraints(10.0, 5.0, 3.0, 5.0, 0.6, 10.0)

    def test_prose_with_no_json_rejected(self):
        with pytest.raises(SchemaViolation):
            parse_structured("the vehicle should proceed with caution", Purpose.SHORT_TERM_MOTION)

    def test_unknown_tokens_rejected_not_coerced(self):
        raw = '{"strategy":"move","pairs":[{"condition":"always","behavior":"fly","speed":"warp"}]}'
        with pytest.raises(SchemaViolation) as exc:
            parse_structured(raw, Purpose.SHORT_TERM_MOTION)
        assert exc.value.field == "condition"

    def test_negative_wait_rejected(self):
        raw = '{"strategy":"stop_observe_move","wait":-2,"trigger":"consistent_no_immediate_hazard"}'
        with pytest.raises(SchemaViolation):
            parse_structured(raw, Purpose.SHORT_TERM_MOTION)

    def test_nonpositive_constraint_rejected(self):
        raw = '{"v_max":0,"d_min":5,"ac_max":3,"de_max":5,"psi_max":0.6,"d_brake":10}'
        with pytest.raises(SchemaViolation) as exc:
            parse_structured(raw, Purpose.SAFETY_CONSTRAINTS)
        assert exc.value.field == "v_max"

    def test_first_json_object_extracted_from_prose(self):
        raw = 'Sure! Here is the plan:\n```json\n{"strategy":"stop_observe_move","wait":2,"trigger":"consistent_immediate_hazard"}\n```\nthanks'
        plan = parse_structured(raw, Purpose.SHORT_TERM_MOTION)
        assert plan.wait == 2

    def test_extract_reports_offset(self):
        obj, pos = extract_first_json_object('xx {"a": 1} tail')
        assert obj == {"a": 1}
        assert pos == 3

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=200), st.sampled_from(Purpose))
    def test_never_panics_on_arbitrary_text(self, raw, purpose):
        try:
            parse_structured(raw, purpose)
        except SchemaViolation:
            pass  # the only acceptable failure mode


class TestScriptedBackend:
    TABLE = {
        "hazard_and_plan": {
            "pedestrian_cross": {
                "hazards": [{"object": "pedestrian", "motion": "crossing"}],
                "strategy": "stop_observe_move",
            },
            "bicycle_oncoming": {
                "hazards": [{"object": "bicycle", "motion": "oncoming"}],
                "strategy": "move",
            },
        },
        "short_term_motion": {
            "pedestrian_cross": {
                "strategy": "stop_observe_move",
                "wait": 3,
                "trigger": "consistent_no_immediate_hazard",
            }
        },
    }

    def test_lookup_is_pure_and_deterministic(self):
        backend = ScriptedBackend(self.TABLE)
        req = BackendRequest(Purpose.HAZARD_AND_PLAN, "p", payload_for("pedestrian_cross"))
        r1, r2 = backend.call(req), backend.call(req)
        assert r1.raw == r2.raw
        assert r1.parsed == r2.parsed
        assert r1.parsed.hazards[0].object is ObjectClass.PEDESTRIAN
        assert r1.parsed.strategy is Strategy.STOP_OBSERVE_MOVE

    def test_move_key(self):
        backend = ScriptedBackend(self.TABLE)
        req = BackendRequest(Purpose.HAZARD_AND_PLAN, "p", payload_for("bicycle_oncoming"))
        parsed = backend.call(req).parsed
        assert parsed.hazards[0].object is ObjectClass.BICYCLE
        assert parsed.strategy is Strategy.MOVE

    def test_unknown_key_is_schema_violation(self):
        backend = ScriptedBackend(self.TABLE)
        req = BackendRequest(Purpose.HAZARD_AND_PLAN, "p", payload_for("nope"))
        with pytest.raises(SchemaViolation):
            backend.call(req)

    def test_bundled_table_loads(self):
        backend = ScriptedBackend.bundled()
        req = BackendRequest(Purpose.SHORT_TERM_MOTION, "p", payload_for("pedestrian_cross"))
        parsed = backend.call(req).parsed
        assert parsed.strategy is Strategy.STOP_OBSERVE_MOVE
        assert parsed.wait == 30

    def test_every_bundled_entry_parses(self):
        backend = ScriptedBackend.bundled()
        for purpose_value, entries in backend.table.items():
            purpose = Purpose(purpose_value)
            for key in entries:
                req = BackendRequest(purpose, "p", payload_for(key))
                assert backend.call(req).parsed is not None

    def test_zero_latency_for_reproducibility(self):
        backend = ScriptedBackend(self.TABLE)
        req = BackendRequest(Purpose.SHORT_TERM_MOTION, "p", payload_for("pedestrian_cross"))
        assert backend.call(req).latency_ms == 0.0


class _Handler(BaseHTTPRequestHandler):
    """Chat-completions stub; behavior keyed by the requested model name."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        model = body.get("model", "")
        if model == "malformed":
            out = {"nonsense": True}
        elif model == "prose":
            out = {"choices": [{"message": {"content": "no json here"}}]}
        elif model == "http500":
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        else:
            content = json.dumps(
                {"strategy": "stop_observe_move", "wait": 4, "trigger": "consistent_no_immediate_hazard"}
            )
            out = {"choices": [{"message": {"content": content}}]}
        data = json.dumps(out).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture(scope="module")
def chat_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


class TestHttpBackend:
    def request(self):
        return BackendRequest(Purpose.SHORT_TERM_MOTION, "plan please", payload_for("x"), 2000)

    def test_parses_first_completion(self, chat_server):
        backend = HttpBackend(chat_server, model="good", token="secret")
        resp = backend.call(self.request())
        assert resp.parsed.wait == 4
        assert resp.latency_ms >= 0.0

    def test_malformed_envelope_is_schema_violation(self, chat_server):
        backend = HttpBackend(chat_server, model="malformed")
        with pytest.raises(SchemaViolation):
            backend.call(self.request())

    def test_prose_content_is_schema_violation(self, chat_server):
        backend = HttpBackend(chat_server, model="prose")
        with pytest.raises(SchemaViolation):
            backend.call(self.request())

    def test_http_error_is_transport_failure(self, chat_server):
        backend = HttpBackend(chat_server, model="http500")
        with pytest.raises(TransportFailure):
            backend.call(self.request())

    def test_unreachable_endpoint_fails_within_timeout(self):
        # Connection refused on a closed local port maps to TransportFailure.
        backend = HttpBackend("http://127.0.0.1:9/v1/chat/completions", model="x")
        with pytest.raises((TransportFailure, BackendTimeout)):
            backend.call(BackendRequest(Purpose.SHORT_TERM_MOTION, "p", payload_for("x"), 1500))

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("RCO_BACKEND_URL", "http://example.invalid/api")
        monkeypatch.setenv("RCO_BACKEND_MODEL", "tiny")
        monkeypatch.setenv("RCO_BACKEND_TOKEN", "tok")
        backend = HttpBackend.from_env()
        assert backend.url == "http://example.invalid/api"
        assert backend.model == "tiny"
        assert backend.token == "tok"


class TestBackendRequest:
    def test_timeout_must_be_positive(self):
        with pytest.raises(ValueError):
            BackendRequest(Purpose.HAZARD_AND_PLAN, "p", "{}", 0)

    def test_scenario_key_from_payload(self):
        req = BackendRequest(Purpose.HAZARD_AND_PLAN, "p", payload_for("abc"))
        assert req.scenario_key() == "abc"
        assert BackendRequest(Purpose.HAZARD_AND_PLAN, "p", "not json").scenario_key() == ""
