"""Closed-loop episode execution for the three agent modes.

baseline: the scripted driver alone, blind to masked objects.
rco:      the override seizes actuation whenever a deficit is present.
always_stop: emergency-stop protocol — halts at the first deficit and never
resumes, the fully risk-avoidant comparison point.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from . import metrics, orchestrator, simenv
from .backend import Backend
from .domain import Action
from .orchestrator import OrchestratorConfig, OverrideState
from .planner import PlannerConfig
from .safety import SafetyGains
from .simenv import Scenario, VehicleParams, WorldState
from .verifier import VerifierConfig


class Mode(str, Enum):
    BASELINE = "baseline"
    RCO = "rco"
    ALWAYS_STOP = "always_stop"


STOP = Action(0.0, 0.8, 0.0)


@dataclass(frozen=True)
class Overrides:
    """Optional config knobs; None keeps each module's default."""

    n_max: Optional[int] = None
    history_len: Optional[int] = None
    wait_cap: Optional[int] = None
    replan_budget: Optional[int] = None
    shift_threshold: Optional[float] = None
    hazard_ratio_threshold: Optional[float] = None
    delta_throttle: Optional[float] = None
    delta_brake: Optional[float] = None
    penalties: Optional[dict[str, float]] = None

    def orchestrator_config(self, scenario_key: str, dt: float) -> OrchestratorConfig:
        planner_kwargs: dict[str, Any] = {}
        if self.n_max is not None:
            planner_kwargs["max_steps"] = self.n_max
        if self.history_len is not None:
            planner_kwargs["history_len"] = self.history_len
        if self.wait_cap is not None:
            planner_kwargs["wait_cap"] = self.wait_cap
        if self.replan_budget is not None:
            planner_kwargs["replan_budget"] = self.replan_budget
        verifier_kwargs: dict[str, Any] = {}
        if self.shift_threshold is not None:
            verifier_kwargs["shift_threshold"] = self.shift_threshold
        if self.hazard_ratio_threshold is not None:
            verifier_kwargs["hazard_ratio_threshold"] = self.hazard_ratio_threshold
        if self.history_len is not None:
            verifier_kwargs["history_len"] = max(2, self.history_len)
        gains_kwargs: dict[str, Any] = {}
        if self.delta_throttle is not None:
            gains_kwargs["delta_throttle"] = self.delta_throttle
        if self.delta_brake is not None:
            gains_kwargs["delta_brake"] = self.delta_brake
        return OrchestratorConfig(
            planner=PlannerConfig(**planner_kwargs),
            verifier=VerifierConfig(**verifier_kwargs),
            gains=SafetyGains(**gains_kwargs),
            dt=dt,
            scenario_key=scenario_key,
        )

    def penalty_table(self) -> dict[simenv.InfractionKind, float]:
        table = dict(metrics.DEFAULT_PENALTIES)
        for name, value in (self.penalties or {}).items():
            table[simenv.InfractionKind(name)] = float(value)
        return table


@dataclass(frozen=True)
class EpisodeOutcome:
    result: metrics.EpisodeResult
    records: tuple[dict[str, Any], ...]
    events: tuple[simenv.InfractionEvent, ...]
    ticks: int


def run_episode(
    scenario: Scenario,
    mode: Mode,
    backend: Backend,
    overrides: Overrides = Overrides(),
    params: VehicleParams = VehicleParams(),
) -> EpisodeOutcome:
    """Run one deterministic closed-loop episode and score it."""
    cfg = overrides.orchestrator_config(scenario.name, params.dt)
    w: WorldState = simenv.world_from_scenario(scenario, params)
    policy = scenario.deficit_policy
    state: OverrideState = orchestrator.initial_state()
    history: list = []
    history_cap = max(cfg.planner.history_len, cfg.verifier.history_len)
    trajectory: list[tuple[float, float]] = [(w.ego.x, w.ego.y)]
    events: list[simenv.InfractionEvent] = []
    records: list[dict[str, Any]] = []
    halted_forever = False

    while w.tick < scenario.time_limit_ticks and w.ego_progress < scenario.route.length:
        snap = simenv.perceive(w, policy)
        history.append(snap)
        if len(history) > history_cap:
            history.pop(0)
        hidden = simenv.masked_ids(w, policy)

        if mode is Mode.BASELINE:
            action = simenv.base_agent(w, hidden)
            records.append(orchestrator.base_record(w.tick, action))
        elif mode is Mode.ALWAYS_STOP:
            halted_forever = halted_forever or snap.has_deficit
            action = STOP if halted_forever else simenv.base_agent(w, hidden)
            records.append(orchestrator.base_record(w.tick, action))
        else:
            state = orchestrator.engage(snap.has_deficit, state)
            if state.active:
                step = orchestrator.step(
                    state, snap, history, simenv.measurements(w), w.ego.pose, backend, cfg
                )
                action, state = step.action, step.state
                records.append(step.record)
            else:
                action = simenv.base_agent(w, hidden)
                state = orchestrator.note_external_action(state, action)
                records.append(orchestrator.base_record(w.tick, action))

        w_next = simenv.tick(w, action)
        events.extend(simenv.detect_infractions(w, w_next))
        trajectory.append((w_next.ego.x, w_next.ego.y))
        w = w_next

    game_time_s = w.tick * params.dt
    rc = metrics.route_completion(scenario.route, trajectory)
    is_score = metrics.infraction_score(events, policy, overrides.penalty_table())
    as_speed = metrics.average_speed(scenario.route.length, game_time_s)
    result = metrics.EpisodeResult.build(
        scenario=scenario.name,
        mode=mode.value,
        rc=rc,
        is_score=is_score,
        as_speed=as_speed,
        infractions=tuple(events),
        game_time_s=game_time_s,
    )
    return EpisodeOutcome(result, tuple(records), tuple(events), w.tick)
