"""Shared builders for perception snapshots and backend stubs."""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

from rco.backend import BackendRequest, BackendResponse, BackendTimeout, TransportFailure
from rco.domain import (
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
    ViewName,
    VisibleObject,
    Weather,
)

DEFAULT_NAVI = Navigation((50.0, 0.0), 0.0, RoadGeometry.STRAIGHT)
DEFAULT_SURROUNDING = Surrounding(Weather.CLEAR, Daylight.DAY, TrafficDensity.LOW)


def view(
    name: ViewName,
    objects: Iterable[tuple[ObjectClass, Box]] = (),
    deficits: Iterable[Box] = (),
) -> CameraView:
    return CameraView(
        name,
        tuple(VisibleObject(cls, box, 10.0) for cls, box in objects),
        tuple(DeficitRegion(name, box) for box in deficits),
    )


def snapshot(
    tick: int = 0,
    front_deficits: Sequence[Box] = (),
    front_objects: Sequence[tuple[ObjectClass, Box]] = (),
    left_deficits: Sequence[Box] = (),
    right_deficits: Sequence[Box] = (),
    navi: Optional[Navigation] = None,
    surrounding: Optional[Surrounding] = None,
) -> EnvironmentSnapshot:
    return EnvironmentSnapshot(
        tick=tick,
        perception=(
            view(ViewName.LEFT, deficits=left_deficits),
            view(ViewName.FRONT, objects=front_objects, deficits=front_deficits),
            view(ViewName.RIGHT, deficits=right_deficits),
        ),
        navi=navi or DEFAULT_NAVI,
        surrounding=surrounding or DEFAULT_SURROUNDING,
    )


def history_of_counts(counts: Sequence[int], start_tick: int = 0) -> list[EnvironmentSnapshot]:
    """Snapshots whose front view carries the given deficit counts, with
    stable non-overlapping boxes so only quantity varies."""
    frames = []
    for i, n in enumerate(counts):
        boxes = [Box(0.1 + 0.11 * j, 0.4, 0.15 + 0.11 * j, 0.5) for j in range(n)]
        frames.append(snapshot(tick=start_tick + i, front_deficits=boxes))
    return frames


class StubBackend:
    """Returns a canned parsed response, or raises the given error."""

    def __init__(self, parsed=None, error: Optional[Exception] = None, raw: str = "{}"):
        self.parsed = parsed
        self.error = error
        self.raw = raw
        self.requests: list[BackendRequest] = []

    def call(self, req: BackendRequest) -> BackendResponse:
        self.requests.append(req)
        if self.error is not None:
            raise self.error
        return BackendResponse(raw=self.raw, parsed=self.parsed, latency_ms=0.0)


class TimeoutBackend(StubBackend):
    def __init__(self):
        super().__init__(error=BackendTimeout("simulated timeout"))


class UnreachableBackend(StubBackend):
    def __init__(self):
        super().__init__(error=TransportFailure("simulated transport failure"))
