"""Context-dependent safety constraints and the trigger/transformation algebra.

The envelope has six limits; each triggered limit transforms one actuator
channel. Throttle terms are summed before a single final clamp, likewise
brake. The deceleration-limit transform reduces brake in proportion to the
excess deceleration (the excess ``-de_max - a_x`` is positive exactly when
the trigger fires).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, TYPE_CHECKING

from .controlmap import clamp
from .domain import (
    Action,
    Daylight,
    Navigation,
    RoadGeometry,
    SafetyConstraints,
    Surrounding,
    TrafficDensity,
    VehicleMeasurements,
    Weather,
)

if TYPE_CHECKING:  # pragma: no cover
    from .backend import Backend

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SafetyGains:
    """Transformation step sizes for throttle and brake, each in (0, 1]."""

    delta_throttle: float = 0.1
    delta_brake: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.delta_throttle <= 1.0:
            raise ValueError(f"delta_throttle out of (0,1]: {self.delta_throttle}")
        if not 0.0 < self.delta_brake <= 1.0:
            raise ValueError(f"delta_brake out of (0,1]: {self.delta_brake}")


BASE_CONSTRAINTS = SafetyConstraints(
    v_max=8.0, d_min=6.0, ac_max=2.5, de_max=6.0, psi_max=0.5, d_brake=8.0
)

# Per-factor (speed multiplier, distance multiplier). The most restrictive
# factor wins: combined v_max multiplier is the min, d_min multiplier the max.
_WEATHER_MULT = {
    Weather.CLEAR: (1.0, 1.0),
    Weather.RAIN: (0.8, 1.25),
    Weather.FOG: (0.7, 1.4),
    Weather.SNOW: (0.6, 1.5),
}
_DAYLIGHT_MULT = {
    Daylight.DAY: (1.0, 1.0),
    Daylight.DUSK: (0.9, 1.1),
    Daylight.NIGHT: (0.8, 1.25),
}
_TRAFFIC_MULT = {
    TrafficDensity.LOW: (1.0, 1.0),
    TrafficDensity.MEDIUM: (0.9, 1.1),
    TrafficDensity.HIGH: (0.8, 1.25),
}
_GEOMETRY_MULT = {
    RoadGeometry.STRAIGHT: (1.0, 1.0),
    RoadGeometry.LEFT_CURVE: (0.9, 1.1),
    RoadGeometry.RIGHT_CURVE: (0.9, 1.1),
    RoadGeometry.INTERSECTION: (0.6, 1.5),
}


def default_constraints(navi: Navigation, surrounding: Surrounding) -> SafetyConstraints:
    """Rule-based envelope: base limits with v_max/d_min scaled by the most
    restrictive context factor."""
    factors = (
        _WEATHER_MULT[surrounding.weather],
        _DAYLIGHT_MULT[surrounding.daylight],
        _TRAFFIC_MULT[surrounding.traffic_density],
        _GEOMETRY_MULT[navi.road_geometry],
    )
    v_mult = min(f[0] for f in factors)
    d_mult = max(f[1] for f in factors)
    return SafetyConstraints(
        v_max=BASE_CONSTRAINTS.v_max * v_mult,
        d_min=BASE_CONSTRAINTS.d_min * d_mult,
        ac_max=BASE_CONSTRAINTS.ac_max,
        de_max=BASE_CONSTRAINTS.de_max,
        psi_max=BASE_CONSTRAINTS.psi_max,
        d_brake=BASE_CONSTRAINTS.d_brake,
    )


def generate_constraints(
    navi: Navigation,
    surrounding: Surrounding,
    nearest_obstacle_m: Optional[float],
    backend: "Backend",
    scenario_key: str = "",
    timeout_ms: int = 2000,
) -> SafetyConstraints:
    """Ask the reasoning backend for an envelope; fall back to the rule-based
    default table on any backend failure or invalid record. Never raises."""
    from . import backend as backend_mod

    try:
        req = backend_mod.constraints_request(
            navi, surrounding, nearest_obstacle_m, scenario_key, timeout_ms
        )
        resp = backend.call(req)
        if isinstance(resp.parsed, SafetyConstraints):
            return resp.parsed
        log.info("constraints backend returned no usable record; using defaults")
    except backend_mod.BackendError as exc:
        log.info("constraints backend failed (%s); using defaults", exc)
    return default_constraints(navi, surrounding)


def apply_constraints(
    a: Action, m: VehicleMeasurements, sc: SafetyConstraints, g: SafetyGains
) -> Action:
    """Clamp an action into the safety envelope. Untriggered limits leave the
    corresponding channel untouched; the result is always a valid Action."""
    throttle = a.throttle
    if m.v >= sc.v_max:
        throttle -= g.delta_throttle
    if m.d_follow < sc.d_min:
        throttle -= g.delta_throttle
    if m.a_x > sc.ac_max:
        throttle -= g.delta_throttle * (m.a_x - sc.ac_max)

    brake = a.brake
    if m.v * m.v / (2.0 * sc.de_max) > sc.d_brake:
        brake += g.delta_brake
    if m.a_x < -sc.de_max:
        brake -= g.delta_brake * (-sc.de_max - m.a_x)

    steer = a.steer
    if abs(m.omega_z) > sc.psi_max:
        steer = steer * (sc.psi_max / abs(m.omega_z))

    return Action(clamp(throttle, 0.0, 1.0), clamp(brake, 0.0, 1.0), clamp(steer, -1.0, 1.0))


def triggered_constraints(m: VehicleMeasurements, sc: SafetyConstraints) -> tuple[str, ...]:
    """Names of the envelope limits whose triggers currently fire (for logging)."""
    names = []
    if m.v >= sc.v_max:
        names.append("max_speed")
    if m.d_follow < sc.d_min:
        names.append("min_following_distance")
    if m.a_x > sc.ac_max:
        names.append("max_acceleration")
    if m.a_x < -sc.de_max:
        names.append("max_deceleration")
    if abs(m.omega_z) > sc.psi_max:
        names.append("max_yaw_rate")
    if m.v * m.v / (2.0 * sc.de_max) > sc.d_brake:
        names.append("min_braking_distance")
    return tuple(names)
