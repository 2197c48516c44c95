"""Deterministic mapping from high-level actions to actuator commands.

Speed tokens translate to throttle/brake by a fixed table; steering comes from
a PID on the heading error toward the next navigation target point. Heading
error is ``wrap(heading - bearing)``: positive when the vehicle points left of
the target, so the corrective steer is positive (right), matching the
package-wide steer convention (negative = left).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .domain import (
    Action,
    Behavior,
    HighLevelAction,
    Navigation,
    RoadGeometry,
    SpeedControl,
)


class DegenerateTargetError(ValueError):
    """Steering target coincides with the ego position."""


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class SteerControllerState:
    """PID state for waypoint steering; integral is clamped for anti-windup."""

    kp: float = 0.9
    ki: float = 0.0
    kd: float = 0.1
    integral: float = 0.0
    prev_error: float = 0.0
    integral_bound: float = 1.0

    def __post_init__(self) -> None:
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("PID gains must be non-negative")
        if abs(self.integral) > self.integral_bound:
            object.__setattr__(
                self, "integral", clamp(self.integral, -self.integral_bound, self.integral_bound)
            )


def map_speed_control(speed: SpeedControl, prev_throttle: float) -> tuple[float, float]:
    """Translate a speed token to (throttle, brake), both clamped to [0, 1]."""
    if not 0.0 <= prev_throttle <= 1.0:
        raise ValueError(f"prev_throttle out of range: {prev_throttle}")
    if speed is SpeedControl.CONSTANT_SPEED:
        return 0.7, 0.0
    if speed is SpeedControl.DECELERATION:
        return max(0.0, prev_throttle - 0.2), 0.2
    if speed is SpeedControl.QUICK_DECELERATION:
        return max(0.0, prev_throttle - 0.4), 0.4
    if speed is SpeedControl.DECELERATION_TO_ZERO:
        return 0.0, 0.8
    if speed is SpeedControl.ACCELERATION:
        return min(1.0, prev_throttle + 0.2), 0.0
    if speed is SpeedControl.QUICK_ACCELERATION:
        return min(1.0, prev_throttle + 0.4), 0.0
    raise ValueError(f"unknown speed token: {speed}")


def compute_steer(
    ego_pose: tuple[float, float, float],
    target_point: tuple[float, float],
    ctrl: SteerControllerState,
    dt: float,
) -> tuple[float, SteerControllerState]:
    """One PID step toward ``target_point``; returns (steer, updated state)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x, y, heading = ego_pose
    dx = target_point[0] - x
    dy = target_point[1] - y
    if dx == 0.0 and dy == 0.0:
        raise DegenerateTargetError(f"target {target_point} coincides with ego position")
    bearing = math.atan2(dy, dx)
    error = wrap_angle(heading - bearing)
    integral = clamp(ctrl.integral + error * dt, -ctrl.integral_bound, ctrl.integral_bound)
    derivative = (error - ctrl.prev_error) / dt
    steer = clamp(ctrl.kp * error + ctrl.ki * integral + ctrl.kd * derivative, -1.0, 1.0)
    return steer, replace(ctrl, integral=integral, prev_error=error)


_DIRECTIONAL: dict[Behavior, tuple[RoadGeometry, ...]] = {
    Behavior.TURN_LEFT: (RoadGeometry.INTERSECTION, RoadGeometry.LEFT_CURVE),
    Behavior.TURN_RIGHT: (RoadGeometry.INTERSECTION, RoadGeometry.RIGHT_CURVE),
    Behavior.CHANGE_LANE_LEFT: (RoadGeometry.STRAIGHT,),
    Behavior.CHANGE_LANE_RIGHT: (RoadGeometry.STRAIGHT,),
}


def aligns_with_navigation(behavior: Behavior, geometry: RoadGeometry) -> bool:
    """Direction-change behaviors must match the road geometry; everything
    else is trivially aligned."""
    allowed = _DIRECTIONAL.get(behavior)
    return allowed is None or geometry in allowed


def resolve_action(
    hla: HighLevelAction,
    prev: Action,
    ego_pose: tuple[float, float, float],
    navi: Navigation,
    ctrl: SteerControllerState,
    dt: float,
) -> tuple[Action, SteerControllerState, bool]:
    """Resolve a high-level action to an actuator Action.

    Returns (action, updated controller state, direction_mismatch). A
    directional behavior that contradicts the navigation geometry is demoted
    to move-forward and flagged; the caller records the flag in the episode
    log rather than failing.
    """
    behavior = hla.behavior
    mismatch = not aligns_with_navigation(behavior, navi.road_geometry)
    if mismatch:
        behavior = Behavior.MOVE_FORWARD
    throttle, brake = map_speed_control(hla.speed, prev.throttle)
    if behavior is Behavior.STOP:
        return Action(throttle, brake, 0.0), ctrl, mismatch
    steer, ctrl2 = compute_steer(ego_pose, navi.target_point, ctrl, dt)
    return Action(throttle, brake, steer), ctrl2, mismatch
