"""Shared vocabulary types: actions, conditions, perception, hazards, constraints.

All types are immutable values with validating constructors and a canonical
JSON form (snake_case keys, enums as lowercase strings). Convention fixed
once, package-wide: steer is negative for left, positive for right; the world
frame is x-east / y-north with heading measured counter-clockwise from +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional


class OutOfRangeError(ValueError):
    """A numeric field fell outside its declared closed range."""

    def __init__(self, field_name: str, value: float) -> None:
        super().__init__(f"{field_name} out of range: {value!r}")
        self.field_name = field_name
        self.value = value


# ---------------------------------------------------------------------------
# Enums (serialized as their lowercase string values)
# ---------------------------------------------------------------------------

class Behavior(str, Enum):
    MOVE_FORWARD = "move_forward"
    STOP = "stop"
    CHANGE_LANE_LEFT = "change_lane_left"
    CHANGE_LANE_RIGHT = "change_lane_right"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"


class SpeedControl(str, Enum):
    CONSTANT_SPEED = "constant_speed"
    DECELERATION = "deceleration"
    QUICK_DECELERATION = "quick_deceleration"
    DECELERATION_TO_ZERO = "deceleration_to_zero"
    ACCELERATION = "acceleration"
    QUICK_ACCELERATION = "quick_acceleration"


class ExecutionCondition(str, Enum):
    """Guard attached to a planned action; inconsistent deficits are never a
    condition — they force replanning instead."""

    CONSISTENT_NO_IMMEDIATE_HAZARD = "consistent_no_immediate_hazard"
    CONSISTENT_IMMEDIATE_HAZARD = "consistent_immediate_hazard"


class ViewName(str, Enum):
    LEFT = "left"
    FRONT = "front"
    RIGHT = "right"


class ObjectClass(str, Enum):
    CAR = "car"
    TRUCK = "truck"
    BUS = "bus"
    BICYCLE = "bicycle"
    PEDESTRIAN = "pedestrian"
    MOTORCYCLE = "motorcycle"
    TRAFFIC_LIGHT = "traffic_light"
    STOP_SIGN = "stop_sign"
    UNKNOWN = "unknown"  # hazard inference only; never a visible object


class MotionKind(str, Enum):
    STATIONARY = "stationary"
    ONCOMING = "oncoming"
    CROSSING = "crossing"
    SAME_DIRECTION = "same_direction"
    UNKNOWN = "unknown"


class RoadGeometry(str, Enum):
    STRAIGHT = "straight"
    LEFT_CURVE = "left_curve"
    RIGHT_CURVE = "right_curve"
    INTERSECTION = "intersection"


class Weather(str, Enum):
    CLEAR = "clear"
    RAIN = "rain"
    FOG = "fog"
    SNOW = "snow"


class Daylight(str, Enum):
    DAY = "day"
    DUSK = "dusk"
    NIGHT = "night"


class TrafficDensity(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class Strategy(str, Enum):
    MOVE = "move"
    STOP_OBSERVE_MOVE = "stop_observe_move"


# ---------------------------------------------------------------------------
# Actuator action
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    """Actuator triple executed each tick: throttle, brake in [0,1], steer in [-1,1]."""

    throttle: float
    brake: float
    steer: float

    def __post_init__(self) -> None:
        validate_action(self)

    def to_json(self) -> dict[str, Any]:
        return {"throttle": self.throttle, "brake": self.brake, "steer": self.steer}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Action":
        return cls(float(d["throttle"]), float(d["brake"]), float(d["steer"]))


def validate_action(a: Action) -> Action:
    """Return ``a`` unchanged if every field is within its closed range."""
    if not (0.0 <= a.throttle <= 1.0) or math.isnan(a.throttle):
        raise OutOfRangeError("throttle", a.throttle)
    if not (0.0 <= a.brake <= 1.0) or math.isnan(a.brake):
        raise OutOfRangeError("brake", a.brake)
    if not (-1.0 <= a.steer <= 1.0) or math.isnan(a.steer):
        raise OutOfRangeError("steer", a.steer)
    return a


FAIL_SAFE_STOP = Action(0.0, 0.8, 0.0)


@dataclass(frozen=True)
class HighLevelAction:
    """Driving behavior plus speed-control token.

    Normalization rule: a stop behavior always carries deceleration-to-zero.
    """

    behavior: Behavior
    speed: SpeedControl

    def __post_init__(self) -> None:
        if self.behavior is Behavior.STOP and self.speed is not SpeedControl.DECELERATION_TO_ZERO:
            object.__setattr__(self, "speed", SpeedControl.DECELERATION_TO_ZERO)

    def to_json(self) -> dict[str, Any]:
        return {"behavior": self.behavior.value, "speed": self.speed.value}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "HighLevelAction":
        return cls(Behavior(d["behavior"]), SpeedControl(d["speed"]))


STOP_ACTION = HighLevelAction(Behavior.STOP, SpeedControl.DECELERATION_TO_ZERO)


@dataclass(frozen=True)
class ConditionActionPair:
    condition: ExecutionCondition
    action: HighLevelAction

    def to_json(self) -> dict[str, Any]:
        return {"condition": self.condition.value, "action": self.action.to_json()}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ConditionActionPair":
        return cls(ExecutionCondition(d["condition"]), HighLevelAction.from_json(d["action"]))


@dataclass(frozen=True)
class ActionSequence:
    """Plan-ahead queue of condition-action pairs, consumed strictly front-to-back."""

    pairs: tuple[ConditionActionPair, ...]
    created_tick: int

    @classmethod
    def capped(
        cls, pairs: tuple[ConditionActionPair, ...] | list, created_tick: int, max_len: int
    ) -> "ActionSequence":
        """Build a sequence truncated to at most ``max_len`` pairs (prefix kept)."""
        if max_len < 0:
            raise ValueError(f"max_len must be non-negative, got {max_len}")
        return cls(tuple(pairs)[:max_len], created_tick)

    def pop_front(self) -> tuple[ConditionActionPair, "ActionSequence"]:
        head = self.pairs[0]
        return head, ActionSequence(self.pairs[1:], self.created_tick)

    def __len__(self) -> int:
        return len(self.pairs)

    def to_json(self) -> dict[str, Any]:
        return {"pairs": [p.to_json() for p in self.pairs], "created_tick": self.created_tick}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ActionSequence":
        return cls(
            tuple(ConditionActionPair.from_json(p) for p in d["pairs"]),
            int(d["created_tick"]),
        )


# ---------------------------------------------------------------------------
# Perception
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in normalized image fractions, x right, y down."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x0 < self.x1 <= 1.0):
            raise OutOfRangeError("box.x", (self.x0, self.x1))
        if not (0.0 <= self.y0 < self.y1 <= 1.0):
            raise OutOfRangeError("box.y", (self.y0, self.y1))

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def centroid(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains(self, other: "Box") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )

    def to_json(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_json(cls, v: list) -> "Box":
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True)
class DeficitRegion:
    """Masked image region; the masked actor id is ground truth for scoring and
    is never surfaced to the planning prompts."""

    view: ViewName
    box: Box
    masked_object_id: Optional[int] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "view": self.view.value,
            "box": self.box.to_json(),
            "masked_object_id": self.masked_object_id,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "DeficitRegion":
        mid = d.get("masked_object_id")
        return cls(ViewName(d["view"]), Box.from_json(d["box"]), None if mid is None else int(mid))


@dataclass(frozen=True)
class VisibleObject:
    cls: ObjectClass
    box: Box
    range_m: float

    def __post_init__(self) -> None:
        if self.cls is ObjectClass.UNKNOWN:
            raise ValueError("visible objects must have a concrete class")
        if self.range_m < 0:
            raise OutOfRangeError("range_m", self.range_m)

    def to_json(self) -> dict[str, Any]:
        return {"class": self.cls.value, "box": self.box.to_json(), "range_m": self.range_m}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "VisibleObject":
        return cls(ObjectClass(d["class"]), Box.from_json(d["box"]), float(d["range_m"]))


@dataclass(frozen=True)
class CameraView:
    """One camera's symbolic frame: detections plus deficit regions.

    An object fully covered by a same-view deficit region cannot be visible.
    """

    view: ViewName
    visible_objects: tuple[VisibleObject, ...]
    deficits: tuple[DeficitRegion, ...]

    def __post_init__(self) -> None:
        for d in self.deficits:
            if d.view is not self.view:
                raise ValueError(f"deficit tagged {d.view.value} inside {self.view.value} view")
            for o in self.visible_objects:
                if d.box.contains(o.box):
                    raise ValueError(
                        f"visible {o.cls.value} box lies fully inside a deficit region"
                    )

    def to_json(self) -> dict[str, Any]:
        return {
            "view": self.view.value,
            "visible_objects": [o.to_json() for o in self.visible_objects],
            "deficits": [d.to_json() for d in self.deficits],
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "CameraView":
        return cls(
            ViewName(d["view"]),
            tuple(VisibleObject.from_json(o) for o in d["visible_objects"]),
            tuple(DeficitRegion.from_json(x) for x in d["deficits"]),
        )


@dataclass(frozen=True)
class Navigation:
    target_point: tuple[float, float]
    current_direction: float  # radians, CCW from +x
    road_geometry: RoadGeometry

    def to_json(self) -> dict[str, Any]:
        return {
            "target_point": [self.target_point[0], self.target_point[1]],
            "current_direction": self.current_direction,
            "road_geometry": self.road_geometry.value,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Navigation":
        tp = d["target_point"]
        return cls(
            (float(tp[0]), float(tp[1])),
            float(d["current_direction"]),
            RoadGeometry(d["road_geometry"]),
        )


@dataclass(frozen=True)
class Surrounding:
    weather: Weather
    daylight: Daylight
    traffic_density: TrafficDensity
    nearest_obstacle_m: Optional[float] = None

    def __post_init__(self) -> None:
        if self.nearest_obstacle_m is not None and self.nearest_obstacle_m < 0:
            raise OutOfRangeError("nearest_obstacle_m", self.nearest_obstacle_m)

    def to_json(self) -> dict[str, Any]:
        return {
            "weather": self.weather.value,
            "daylight": self.daylight.value,
            "traffic_density": self.traffic_density.value,
            "nearest_obstacle_m": self.nearest_obstacle_m,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Surrounding":
        nob = d.get("nearest_obstacle_m")
        return cls(
            Weather(d["weather"]),
            Daylight(d["daylight"]),
            TrafficDensity(d["traffic_density"]),
            None if nob is None else float(nob),
        )


@dataclass(frozen=True)
class EnvironmentSnapshot:
    """Per-tick symbolic perception: three camera views plus navigation and
    ambient context."""

    tick: int
    perception: tuple[CameraView, CameraView, CameraView]  # left, front, right
    navi: Navigation
    surrounding: Surrounding

    def __post_init__(self) -> None:
        expected = (ViewName.LEFT, ViewName.FRONT, ViewName.RIGHT)
        got = tuple(v.view for v in self.perception)
        if got != expected:
            raise ValueError(f"perception views must be ordered left/front/right, got {got}")

    def view(self, name: ViewName) -> CameraView:
        return self.perception[(ViewName.LEFT, ViewName.FRONT, ViewName.RIGHT).index(name)]

    @property
    def has_deficit(self) -> bool:
        return any(v.deficits for v in self.perception)

    def to_json(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "perception": [v.to_json() for v in self.perception],
            "navi": self.navi.to_json(),
            "surrounding": self.surrounding.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "EnvironmentSnapshot":
        views = tuple(CameraView.from_json(v) for v in d["perception"])
        return cls(
            int(d["tick"]),
            views,  # type: ignore[arg-type]
            Navigation.from_json(d["navi"]),
            Surrounding.from_json(d["surrounding"]),
        )


# ---------------------------------------------------------------------------
# Hazards and plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hazard:
    """Inferred object and its movement; either side may be unknown."""

    object: ObjectClass
    motion: MotionKind

    def to_json(self) -> dict[str, Any]:
        return {"object": self.object.value, "motion": self.motion.value}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Hazard":
        return cls(ObjectClass(d["object"]), MotionKind(d["motion"]))


@dataclass(frozen=True)
class MotionPlan:
    """Either a move sequence or a stop-observe-move wait; exactly the fields
    for the chosen strategy are present. The wait cap is enforced where the
    cap is configured (the planner), not here."""

    strategy: Strategy
    sequence: Optional[ActionSequence] = None
    wait_ticks: Optional[int] = None
    move_trigger: Optional[ExecutionCondition] = None

    def __post_init__(self) -> None:
        if self.strategy is Strategy.MOVE:
            if self.sequence is None or self.wait_ticks is not None or self.move_trigger is not None:
                raise ValueError("move plan carries a sequence and nothing else")
        else:
            if self.sequence is not None or self.wait_ticks is None or self.move_trigger is None:
                raise ValueError("stop-observe-move plan carries wait_ticks and move_trigger only")
            if self.wait_ticks < 0:
                raise OutOfRangeError("wait_ticks", self.wait_ticks)

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {"strategy": self.strategy.value}
        if self.strategy is Strategy.MOVE:
            d["sequence"] = self.sequence.to_json()  # type: ignore[union-attr]
        else:
            d["wait_ticks"] = self.wait_ticks
            d["move_trigger"] = self.move_trigger.value  # type: ignore[union-attr]
        return d

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "MotionPlan":
        strategy = Strategy(d["strategy"])
        if strategy is Strategy.MOVE:
            return cls(strategy, sequence=ActionSequence.from_json(d["sequence"]))
        return cls(
            strategy,
            wait_ticks=int(d["wait_ticks"]),
            move_trigger=ExecutionCondition(d["move_trigger"]),
        )


# ---------------------------------------------------------------------------
# Safety envelope and measurements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SafetyConstraints:
    """Six-limit control envelope, SI units, all strictly positive."""

    v_max: float
    d_min: float
    ac_max: float
    de_max: float
    psi_max: float
    d_brake: float

    def __post_init__(self) -> None:
        for name in ("v_max", "d_min", "ac_max", "de_max", "psi_max", "d_brake"):
            v = getattr(self, name)
            if not (v > 0) or math.isnan(v):
                raise OutOfRangeError(name, v)

    def to_json(self) -> dict[str, Any]:
        return {
            "v_max": self.v_max,
            "d_min": self.d_min,
            "ac_max": self.ac_max,
            "de_max": self.de_max,
            "psi_max": self.psi_max,
            "d_brake": self.d_brake,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "SafetyConstraints":
        return cls(
            float(d["v_max"]),
            float(d["d_min"]),
            float(d["ac_max"]),
            float(d["de_max"]),
            float(d["psi_max"]),
            float(d["d_brake"]),
        )


@dataclass(frozen=True)
class VehicleMeasurements:
    """IMU/speedometer readout; ``d_follow`` is +inf when there is no lead
    vehicle so the following-distance trigger is simply false."""

    v: float
    a_x: float
    omega_z: float
    d_follow: float = math.inf

    def __post_init__(self) -> None:
        if self.v < 0:
            raise OutOfRangeError("v", self.v)

    def to_json(self) -> dict[str, Any]:
        return {
            "v": self.v,
            "a_x": self.a_x,
            "omega_z": self.omega_z,
            "d_follow": None if math.isinf(self.d_follow) else self.d_follow,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "VehicleMeasurements":
        df = d.get("d_follow")
        return cls(
            float(d["v"]),
            float(d["a_x"]),
            float(d["omega_z"]),
            math.inf if df is None else float(df),
        )
