"""Deterministic 2D closed-loop driving world.

Ego follows a kinematic bicycle model; other actors replay timed waypoint
scripts, so the whole trajectory is a pure function of the scenario and the
action stream. Perception is symbolic: actors and signals inside a camera
sector project to normalized boxes sized by subtended angle, and the deficit
policy replaces masked detections with deficit regions without ever touching
the dynamics.

Units: world coordinates in meters (x east, y north), headings in radians
CCW from +x, actor scripts and light schedules keyed by seconds, deficit
windows by tick index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional

from .controlmap import clamp, compute_steer, wrap_angle, SteerControllerState
from .domain import (
    Box,
    CameraView,
    Daylight,
    DeficitRegion,
    EnvironmentSnapshot,
    Navigation,
    ObjectClass,
    RoadGeometry,
    Surrounding,
    TrafficDensity,
    VehicleMeasurements,
    ViewName,
    VisibleObject,
    Weather,
)
from .domain import Action

STOPPED_SPEED = 0.1  # below this the vehicle counts as stopped (stop-sign rule)
SIGN_ZONE_M = 5.0  # must have stopped within this distance before the line
BASE_AGENT_BRAKE_RANGE_M = 12.0
ROUTE_CORRIDOR_HALF_WIDTH_M = 3.0


@dataclass(frozen=True)
class VehicleParams:
    """Plant and sensor constants; defaults cruise near 8 m/s at 0.7 throttle."""

    k_throttle: float = 3.0  # m/s^2 per unit throttle
    k_brake: float = 8.0  # m/s^2 per unit brake
    drag: float = 0.25  # 1/s
    wheelbase: float = 2.5  # m
    max_wheel_angle: float = math.radians(35.0)
    dt: float = 0.1
    camera_range: float = 40.0
    fov_h: float = math.radians(60.0)
    fov_v: float = math.radians(40.0)
    ego_length: float = 4.5
    ego_width: float = 2.0


# (footprint length, footprint width, projected width, projected height)
_CLASS_DIMS: dict[ObjectClass, tuple[float, float, float, float]] = {
    ObjectClass.CAR: (4.5, 2.0, 2.0, 1.5),
    ObjectClass.TRUCK: (8.0, 2.5, 2.5, 3.0),
    ObjectClass.BUS: (10.0, 2.5, 2.5, 3.2),
    ObjectClass.BICYCLE: (1.8, 0.6, 0.6, 1.6),
    ObjectClass.PEDESTRIAN: (0.5, 0.5, 0.5, 1.8),
    ObjectClass.MOTORCYCLE: (2.2, 0.8, 0.8, 1.4),
    ObjectClass.TRAFFIC_LIGHT: (0.0, 0.0, 0.8, 0.8),
    ObjectClass.STOP_SIGN: (0.0, 0.0, 0.75, 0.75),
}

LEAD_VEHICLE_CLASSES = frozenset(
    {ObjectClass.CAR, ObjectClass.TRUCK, ObjectClass.BUS, ObjectClass.MOTORCYCLE, ObjectClass.BICYCLE}
)


class LightState(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"


class InfractionKind(str, Enum):
    COLLISION_PEDESTRIAN = "collision_pedestrian"
    COLLISION_VEHICLE = "collision_vehicle"
    COLLISION_STATIC = "collision_static"
    RED_LIGHT = "red_light"
    STOP_SIGN = "stop_sign"


@dataclass(frozen=True)
class InfractionEvent:
    tick: int
    kind: InfractionKind
    actor_id: Optional[int] = None

    def to_json(self) -> dict[str, Any]:
        return {"tick": self.tick, "kind": self.kind.value, "actor_id": self.actor_id}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "InfractionEvent":
        aid = d.get("actor_id")
        return cls(int(d["tick"]), InfractionKind(d["kind"]), None if aid is None else int(aid))


# ---------------------------------------------------------------------------
# Static scenario pieces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Actor:
    """Scripted actor: position replayed from timed waypoints (seconds)."""

    id: int
    cls: ObjectClass
    script: tuple[tuple[float, float, float], ...]  # (t_s, x, y), times monotone
    static: bool = False  # True => collisions score as layout/static

    def __post_init__(self) -> None:
        if not self.script:
            raise ValueError("actor script must contain at least one waypoint")
        times = [p[0] for p in self.script]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError(f"actor {self.id} script times must be monotone")

    def state_at(self, t_s: float) -> tuple[float, float, float, float, float]:
        """(x, y, heading, vx, vy) at time ``t_s`` by linear interpolation."""
        pts = self.script
        if t_s <= pts[0][0] or len(pts) == 1:
            x, y = pts[0][1], pts[0][2]
            return x, y, self._segment_heading(0), 0.0, 0.0
        if t_s >= pts[-1][0]:
            x, y = pts[-1][1], pts[-1][2]
            return x, y, self._segment_heading(len(pts) - 2), 0.0, 0.0
        for i in range(len(pts) - 1):
            t0, x0, y0 = pts[i]
            t1, x1, y1 = pts[i + 1]
            if t0 <= t_s <= t1:
                if t1 == t0:
                    continue
                a = (t_s - t0) / (t1 - t0)
                vx = (x1 - x0) / (t1 - t0)
                vy = (y1 - y0) / (t1 - t0)
                return x0 + a * (x1 - x0), y0 + a * (y1 - y0), self._segment_heading(i), vx, vy
        x, y = pts[-1][1], pts[-1][2]
        return x, y, self._segment_heading(len(pts) - 2), 0.0, 0.0

    def _segment_heading(self, i: int) -> float:
        pts = self.script
        i = max(0, min(i, len(pts) - 2)) if len(pts) > 1 else 0
        if len(pts) == 1:
            return 0.0
        dx = pts[i + 1][1] - pts[i][1]
        dy = pts[i + 1][2] - pts[i][2]
        if dx == 0.0 and dy == 0.0:
            return 0.0
        return math.atan2(dy, dx)


@dataclass(frozen=True)
class TrafficLight:
    id: int
    position: tuple[float, float]
    stop_line_s: float  # arc length along the route
    schedule: tuple[tuple[int, LightState], ...] = ((0, LightState.GREEN),)

    def state_at(self, tick: int) -> LightState:
        state = self.schedule[0][1]
        for start, s in self.schedule:
            if tick >= start:
                state = s
        return state


@dataclass(frozen=True)
class StopSign:
    id: int
    position: tuple[float, float]
    stop_line_s: float


@dataclass(frozen=True)
class Route:
    waypoints: tuple[tuple[float, float], ...]
    geometry: tuple[RoadGeometry, ...]  # one tag per segment

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("route needs at least two waypoints")
        if len(self.geometry) != len(self.waypoints) - 1:
            raise ValueError("route needs one geometry tag per segment")
        for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            if x0 == x1 and y0 == y1:
                raise ValueError("route waypoints must be strictly ordered")

    @property
    def length(self) -> float:
        return sum(self._segment_lengths())

    def _segment_lengths(self) -> list[float]:
        return [
            math.hypot(x1 - x0, y1 - y0)
            for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:])
        ]

    def progress_of(self, point: tuple[float, float]) -> float:
        """Arc length of the closest point on the polyline."""
        best_d2 = math.inf
        best_s = 0.0
        cum = 0.0
        px, py = point
        for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            dx, dy = x1 - x0, y1 - y0
            seg_len2 = dx * dx + dy * dy
            t = ((px - x0) * dx + (py - y0) * dy) / seg_len2
            t = clamp(t, 0.0, 1.0)
            cx, cy = x0 + t * dx, y0 + t * dy
            d2 = (px - cx) ** 2 + (py - cy) ** 2
            if d2 < best_d2:
                best_d2 = d2
                best_s = cum + t * math.sqrt(seg_len2)
            cum += math.sqrt(seg_len2)
        return best_s

    def lateral_offset_of(self, point: tuple[float, float]) -> float:
        """Distance from the polyline at the closest point."""
        s = self.progress_of(point)
        cx, cy = self.point_at(s)
        return math.hypot(point[0] - cx, point[1] - cy)

    def point_at(self, s: float) -> tuple[float, float]:
        s = clamp(s, 0.0, self.length)
        cum = 0.0
        for (x0, y0), (x1, y1), seg_len in zip(
            self.waypoints, self.waypoints[1:], self._segment_lengths()
        ):
            if s <= cum + seg_len or seg_len == 0.0:
                t = 0.0 if seg_len == 0.0 else (s - cum) / seg_len
                return x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            cum += seg_len
        return self.waypoints[-1]

    def target_point(self, progress: float, lookahead: float = 8.0) -> tuple[float, float]:
        return self.point_at(min(progress + lookahead, self.length))

    def geometry_at(self, progress: float) -> RoadGeometry:
        cum = 0.0
        for tag, seg_len in zip(self.geometry, self._segment_lengths()):
            cum += seg_len
            if progress <= cum:
                return tag
        return self.geometry[-1]

    def initial_heading(self) -> float:
        (x0, y0), (x1, y1) = self.waypoints[0], self.waypoints[1]
        return math.atan2(y1 - y0, x1 - x0)


@dataclass(frozen=True)
class DeficitPolicy:
    classes: frozenset[ObjectClass] = frozenset()
    window: tuple[int, int] = (0, 0)  # [start_tick, end_tick)

    _ALLOWED = frozenset(
        {
            ObjectClass.TRAFFIC_LIGHT,
            ObjectClass.STOP_SIGN,
            ObjectClass.PEDESTRIAN,
            ObjectClass.BICYCLE,
        }
    )

    def __post_init__(self) -> None:
        bad = self.classes - self._ALLOWED
        if bad:
            raise ValueError(f"deficit classes must be safety-critical categories, got {bad}")

    def active(self, tick: int) -> bool:
        return bool(self.classes) and self.window[0] <= tick < self.window[1]

    def masks(self, cls: ObjectClass, tick: int) -> bool:
        return self.active(tick) and cls in self.classes


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    route: Route
    actors: tuple[Actor, ...]
    lights: tuple[TrafficLight, ...] = ()
    signs: tuple[StopSign, ...] = ()
    deficit_policy: DeficitPolicy = field(default_factory=DeficitPolicy)
    weather: Weather = Weather.CLEAR
    daylight: Daylight = Daylight.DAY
    traffic_density: TrafficDensity = TrafficDensity.LOW
    time_limit_ticks: int = 600

    def __post_init__(self) -> None:
        ids = [a.id for a in self.actors] + [l.id for l in self.lights] + [s.id for s in self.signs]
        if len(ids) != len(set(ids)):
            raise ValueError(f"scenario {self.name}: actor/signal ids must be unique")

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "route": {
                "waypoints": [[x, y] for x, y in self.route.waypoints],
                "geometry": [g.value for g in self.route.geometry],
            },
            "actors": [
                {
                    "id": a.id,
                    "class": a.cls.value,
                    "script": [[t, x, y] for t, x, y in a.script],
                    "static": a.static,
                }
                for a in self.actors
            ],
            "traffic_lights": [
                {
                    "id": l.id,
                    "position": [l.position[0], l.position[1]],
                    "stop_line_s": l.stop_line_s,
                    "schedule": [[t, s.value] for t, s in l.schedule],
                }
                for l in self.lights
            ],
            "stop_signs": [
                {"id": s.id, "position": [s.position[0], s.position[1]], "stop_line_s": s.stop_line_s}
                for s in self.signs
            ],
            "deficit_policy": {
                "classes": sorted(c.value for c in self.deficit_policy.classes),
                "window": list(self.deficit_policy.window),
            },
            "weather": self.weather.value,
            "daylight": self.daylight.value,
            "traffic_density": self.traffic_density.value,
            "time_limit_ticks": self.time_limit_ticks,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "Scenario":
        return cls(
            name=str(d["name"]),
            seed=int(d.get("seed", 0)),
            route=Route(
                tuple((float(x), float(y)) for x, y in d["route"]["waypoints"]),
                tuple(RoadGeometry(g) for g in d["route"]["geometry"]),
            ),
            actors=tuple(
                Actor(
                    id=int(a["id"]),
                    cls=ObjectClass(a["class"]),
                    script=tuple((float(t), float(x), float(y)) for t, x, y in a["script"]),
                    static=bool(a.get("static", False)),
                )
                for a in d.get("actors", [])
            ),
            lights=tuple(
                TrafficLight(
                    id=int(l["id"]),
                    position=(float(l["position"][0]), float(l["position"][1])),
                    stop_line_s=float(l["stop_line_s"]),
                    schedule=tuple((int(t), LightState(s)) for t, s in l["schedule"]),
                )
                for l in d.get("traffic_lights", [])
            ),
            signs=tuple(
                StopSign(
                    id=int(s["id"]),
                    position=(float(s["position"][0]), float(s["position"][1])),
                    stop_line_s=float(s["stop_line_s"]),
                )
                for s in d.get("stop_signs", [])
            ),
            deficit_policy=DeficitPolicy(
                classes=frozenset(
                    ObjectClass(c) for c in d.get("deficit_policy", {}).get("classes", [])
                ),
                window=tuple(d.get("deficit_policy", {}).get("window", [0, 0])),  # type: ignore[arg-type]
            ),
            weather=Weather(d.get("weather", "clear")),
            daylight=Daylight(d.get("daylight", "day")),
            traffic_density=TrafficDensity(d.get("traffic_density", "low")),
            time_limit_ticks=int(d.get("time_limit_ticks", 600)),
        )

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# World state and dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    heading: float
    v: float = 0.0
    a_x: float = 0.0
    omega_z: float = 0.0

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)


@dataclass(frozen=True)
class WorldState:
    tick: int
    ego: EgoState
    scenario: Scenario
    params: VehicleParams = field(default_factory=VehicleParams)
    ego_progress: float = 0.0
    sign_satisfied: frozenset[int] = frozenset()

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def time_s(self) -> float:
        return self.tick * self.params.dt

    def actor_states(self) -> list[tuple[Actor, float, float, float, float, float]]:
        t = self.time_s
        return [(a, *a.state_at(t)) for a in self.scenario.actors]


def world_from_scenario(scenario: Scenario, params: VehicleParams = VehicleParams()) -> WorldState:
    x0, y0 = scenario.route.waypoints[0]
    ego = EgoState(x=x0, y=y0, heading=scenario.route.initial_heading())
    return WorldState(tick=0, ego=ego, scenario=scenario, params=params, ego_progress=0.0)


def tick(w: WorldState, a: Action) -> WorldState:
    """Advance one step under the kinematic bicycle model."""
    p = w.params
    ego = w.ego
    accel = p.k_throttle * a.throttle - p.k_brake * a.brake - p.drag * ego.v
    v_new = max(0.0, ego.v + accel * p.dt)
    # Positive steer turns right (clockwise), so heading decreases.
    heading_new = wrap_angle(
        ego.heading - (v_new / p.wheelbase) * math.tan(a.steer * p.max_wheel_angle) * p.dt
    )
    x_new = ego.x + v_new * math.cos(heading_new) * p.dt
    y_new = ego.y + v_new * math.sin(heading_new) * p.dt
    a_x = (v_new - ego.v) / p.dt
    omega_z = wrap_angle(heading_new - ego.heading) / p.dt
    ego_new = EgoState(x_new, y_new, heading_new, v_new, a_x, omega_z)
    progress = w.scenario.route.progress_of((x_new, y_new))

    satisfied = set(w.sign_satisfied)
    if v_new <= STOPPED_SPEED:
        for sign in w.scenario.signs:
            if sign.stop_line_s - SIGN_ZONE_M <= progress <= sign.stop_line_s:
                satisfied.add(sign.id)

    return replace(
        w,
        tick=w.tick + 1,
        ego=ego_new,
        ego_progress=progress,
        sign_satisfied=frozenset(satisfied),
    )


# ---------------------------------------------------------------------------
# Perception
# ---------------------------------------------------------------------------

_VIEW_SPANS = {
    ViewName.LEFT: (math.radians(30.0), math.radians(90.0)),
    ViewName.FRONT: (math.radians(-30.0), math.radians(30.0)),
    ViewName.RIGHT: (math.radians(-90.0), math.radians(-30.0)),
}


def _project(
    ego: EgoState, pos: tuple[float, float], width: float, height: float, p: VehicleParams
) -> Optional[tuple[ViewName, Box, float]]:
    """Project a world position to (view, normalized box, range); None if the
    object is outside every camera sector."""
    dx, dy = pos[0] - ego.x, pos[1] - ego.y
    rng = math.hypot(dx, dy)
    if rng < 1e-6 or rng > p.camera_range:
        return None
    rel = wrap_angle(math.atan2(dy, dx) - ego.heading)
    for view, (lo, hi) in _VIEW_SPANS.items():
        if lo <= rel <= hi:
            span = hi - lo
            u = (hi - rel) / span
            half_w = math.atan2(width / 2.0, rng) / span
            half_h = math.atan2(height / 2.0, rng) / p.fov_v
            x0, x1 = clamp(u - half_w, 0.0, 1.0), clamp(u + half_w, 0.0, 1.0)
            y0, y1 = clamp(0.5 - half_h, 0.0, 1.0), clamp(0.5 + half_h, 0.0, 1.0)
            if x1 - x0 < 1e-9 or y1 - y0 < 1e-9:
                return None
            return view, Box(x0, y0, x1, y1), rng
    return None


def masked_ids(w: WorldState, policy: DeficitPolicy) -> frozenset[int]:
    """Ids of actors and signals hidden by the policy at the current tick."""
    out = set()
    for a in w.scenario.actors:
        if policy.masks(a.cls, w.tick):
            out.add(a.id)
    if policy.masks(ObjectClass.TRAFFIC_LIGHT, w.tick):
        out.update(l.id for l in w.scenario.lights)
    if policy.masks(ObjectClass.STOP_SIGN, w.tick):
        out.update(s.id for s in w.scenario.signs)
    return frozenset(out)


def perceive(w: WorldState, policy: DeficitPolicy) -> EnvironmentSnapshot:
    """Project world contents into the three camera views, applying the
    deficit policy. Masking alters only the snapshot, never the world."""
    p = w.params
    hidden = masked_ids(w, policy)
    per_view: dict[ViewName, tuple[list[VisibleObject], list[DeficitRegion]]] = {
        v: ([], []) for v in ViewName
    }

    def add(obj_id: int, cls: ObjectClass, pos: tuple[float, float]) -> None:
        dims = _CLASS_DIMS[cls]
        projected = _project(w.ego, pos, dims[2], dims[3], p)
        if projected is None:
            return
        view, box, rng = projected
        visibles, deficits = per_view[view]
        if obj_id in hidden:
            deficits.append(DeficitRegion(view, box, masked_object_id=obj_id))
        else:
            visibles.append(VisibleObject(cls, box, rng))

    for actor, x, y, _h, _vx, _vy in w.actor_states():
        add(actor.id, actor.cls, (x, y))
    for light in w.scenario.lights:
        add(light.id, ObjectClass.TRAFFIC_LIGHT, light.position)
    for sign in w.scenario.signs:
        add(sign.id, ObjectClass.STOP_SIGN, sign.position)

    views = []
    for name in (ViewName.LEFT, ViewName.FRONT, ViewName.RIGHT):
        visibles, deficits = per_view[name]
        # Anything fully behind a mask cannot be detected.
        kept = tuple(
            o for o in visibles if not any(d.box.contains(o.box) for d in deficits)
        )
        views.append(CameraView(name, kept, tuple(deficits)))

    progress = w.ego_progress
    navi = Navigation(
        target_point=w.scenario.route.target_point(progress),
        current_direction=w.ego.heading,
        road_geometry=w.scenario.route.geometry_at(progress),
    )
    nearest = None
    for actor, x, y, _h, _vx, _vy in w.actor_states():
        proj = _project(w.ego, (x, y), 0.1, 0.1, p)
        if proj is not None and proj[0] is ViewName.FRONT:
            rng = proj[2]
            if nearest is None or rng < nearest:
                nearest = rng
    surrounding = Surrounding(
        weather=w.scenario.weather,
        daylight=w.scenario.daylight,
        traffic_density=w.scenario.traffic_density,
        nearest_obstacle_m=nearest,
    )
    return EnvironmentSnapshot(
        tick=w.tick,
        perception=tuple(views),  # type: ignore[arg-type]
        navi=navi,
        surrounding=surrounding,
    )


def measurements(w: WorldState) -> VehicleMeasurements:
    """IMU/speedometer readout plus lead-vehicle gap in the ego corridor."""
    d_follow = math.inf
    cos_h, sin_h = math.cos(w.ego.heading), math.sin(w.ego.heading)
    for actor, x, y, _h, _vx, _vy in w.actor_states():
        if actor.cls not in LEAD_VEHICLE_CLASSES:
            continue
        dx, dy = x - w.ego.x, y - w.ego.y
        lon = dx * cos_h + dy * sin_h
        lat = -dx * sin_h + dy * cos_h
        if 0.0 < lon <= 60.0 and abs(lat) <= 1.5:
            d_follow = min(d_follow, lon)
    return VehicleMeasurements(
        v=w.ego.v, a_x=w.ego.a_x, omega_z=w.ego.omega_z, d_follow=d_follow
    )


# ---------------------------------------------------------------------------
# Infractions
# ---------------------------------------------------------------------------

def _obb_corners(
    cx: float, cy: float, heading: float, length: float, width: float
) -> list[tuple[float, float]]:
    hl, hw = length / 2.0, width / 2.0
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    return [
        (cx + dx * cos_h - dy * sin_h, cy + dx * sin_h + dy * cos_h)
        for dx, dy in ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))
    ]


def _obb_overlap(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> bool:
    """Separating-axis test for two convex quads."""
    for quad in (a, b):
        for i in range(4):
            x0, y0 = quad[i]
            x1, y1 = quad[(i + 1) % 4]
            ax, ay = y1 - y0, x0 - x1  # edge normal
            proj_a = [ax * px + ay * py for px, py in a]
            proj_b = [ax * px + ay * py for px, py in b]
            if max(proj_a) < min(proj_b) or max(proj_b) < min(proj_a):
                return False
    return True


def _collisions(w: WorldState) -> set[int]:
    ego_quad = _obb_corners(
        w.ego.x, w.ego.y, w.ego.heading, w.params.ego_length, w.params.ego_width
    )
    hit = set()
    for actor, x, y, heading, _vx, _vy in w.actor_states():
        length, width, _pw, _ph = _CLASS_DIMS[actor.cls]
        if length == 0.0:
            continue
        if math.hypot(x - w.ego.x, y - w.ego.y) > (length + w.params.ego_length):
            continue
        if _obb_overlap(ego_quad, _obb_corners(x, y, heading, length, width)):
            hit.add(actor.id)
    return hit


def _collision_kind(actor: Actor) -> InfractionKind:
    if actor.cls is ObjectClass.PEDESTRIAN:
        return InfractionKind.COLLISION_PEDESTRIAN
    if actor.static:
        return InfractionKind.COLLISION_STATIC
    return InfractionKind.COLLISION_VEHICLE


def detect_infractions(w_prev: WorldState, w_next: WorldState) -> list[InfractionEvent]:
    """Infractions that started during the step from ``w_prev`` to ``w_next``.

    Collisions are reported once per contiguous overlap episode (at its first
    tick); line crossings are instantaneous and naturally deduplicated.
    """
    if w_next.tick != w_prev.tick + 1:
        raise ValueError("detect_infractions needs consecutive states")
    events: list[InfractionEvent] = []
    before = _collisions(w_prev)
    after = _collisions(w_next)
    actors_by_id = {a.id: a for a in w_next.scenario.actors}
    for actor_id in sorted(after - before):
        actor = actors_by_id[actor_id]
        events.append(InfractionEvent(w_next.tick, _collision_kind(actor), actor_id))

    p_prev, p_next = w_prev.ego_progress, w_next.ego_progress
    for light in w_next.scenario.lights:
        if p_prev < light.stop_line_s <= p_next and light.state_at(w_next.tick) is LightState.RED:
            events.append(InfractionEvent(w_next.tick, InfractionKind.RED_LIGHT, light.id))
    for sign in w_next.scenario.signs:
        if (
            p_prev < sign.stop_line_s <= p_next
            and w_next.ego.v > STOPPED_SPEED
            and sign.id not in w_next.sign_satisfied
        ):
            events.append(InfractionEvent(w_next.tick, InfractionKind.STOP_SIGN, sign.id))
    return events


# ---------------------------------------------------------------------------
# Base agent
# ---------------------------------------------------------------------------

_BASE_STEER = SteerControllerState(kp=0.9, ki=0.0, kd=0.0)


def base_agent(w: WorldState, hidden: frozenset[int] = frozenset()) -> Action:
    """Waypoint following with visible-hazard braking.

    Brakes for red lights, unsatisfied stop signs, and pedestrians in the
    route corridor within braking range; anything in ``hidden`` is invisible
    to it, which reproduces the unprotected failure under deficits.
    """
    progress = w.ego_progress
    route = w.scenario.route

    def ahead(line_s: float) -> bool:
        return 0.0 < line_s - progress <= BASE_AGENT_BRAKE_RANGE_M

    brake = False
    creep = False
    for light in w.scenario.lights:
        if light.id not in hidden and ahead(light.stop_line_s):
            if light.state_at(w.tick) is not LightState.GREEN:
                brake = True
    for sign in w.scenario.signs:
        if sign.id in hidden or sign.id in w.sign_satisfied or not ahead(sign.stop_line_s):
            continue
        # Brake inside the satisfaction zone; creep toward it when stopped
        # short of it, so the stop-and-go cycle always completes.
        if sign.stop_line_s - progress <= SIGN_ZONE_M:
            brake = True
        elif w.ego.v > 1.5:
            brake = True
        else:
            creep = True
    for actor, x, y, _h, _vx, _vy in w.actor_states():
        if actor.cls is not ObjectClass.PEDESTRIAN or actor.id in hidden:
            continue
        s = route.progress_of((x, y))
        if 0.0 < s - progress <= BASE_AGENT_BRAKE_RANGE_M:
            if route.lateral_offset_of((x, y)) <= ROUTE_CORRIDOR_HALF_WIDTH_M:
                brake = True
    if brake:
        return Action(0.0, 0.8, 0.0)

    target = route.target_point(progress)
    if (target[0], target[1]) == (w.ego.x, w.ego.y):
        return Action(0.0, 0.8, 0.0)  # at route end
    steer, _ = compute_steer(w.ego.pose, target, _BASE_STEER, w.params.dt)
    if creep:
        return Action(0.25, 0.0, steer)
    return Action(0.7, 0.0, steer)
