"""Declarative road geometry and the planar queries built on it.

A map is a set of lanes (centerline polyline + width) and directed gate
segments (roundabout entries/exits). All scenario geometry — lane
membership, lateral offsets, progress along a path, gate crossings — is
answered here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

from .errors import DataError, FormatError
from .tracks import normalize_angle

CRTM_VERSION = "crtm 1"

Point = tuple[float, float]


class GateKind(Enum):
    ROUNDABOUT_ENTRY = "entry"
    ROUNDABOUT_EXIT = "exit"


@dataclass(frozen=True)
class LaneGeometry:
    lane_id: int
    centerline: tuple[Point, ...]
    width: float

    def __post_init__(self) -> None:
        if len(self.centerline) < 2:
            raise DataError(f"lane {self.lane_id}: needs at least 2 points")
        if self.width <= 0:
            raise DataError(f"lane {self.lane_id}: non-positive width")
        for a, b in zip(self.centerline, self.centerline[1:]):
            if a == b:
                raise DataError(f"lane {self.lane_id}: repeated centerline point {a}")

    @property
    def total_length(self) -> float:
        return polyline_length(self.centerline)


@dataclass(frozen=True)
class GateSegment:
    gate_id: int
    kind: GateKind
    endpoints: tuple[Point, Point]
    crossing_direction: tuple[float, float]  # unit vector

    def __post_init__(self) -> None:
        if self.endpoints[0] == self.endpoints[1]:
            raise DataError(f"gate {self.gate_id}: degenerate segment")
        n = math.hypot(*self.crossing_direction)
        if abs(n - 1.0) > 1e-6:
            raise DataError(f"gate {self.gate_id}: crossing_direction not unit-norm")

    @property
    def midpoint(self) -> Point:
        (x1, y1), (x2, y2) = self.endpoints
        return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)


@dataclass(frozen=True)
class RoadMap:
    map_id: str
    lanes: dict[int, LaneGeometry]
    gates: dict[int, GateSegment]

    def lane(self, lane_id: int) -> LaneGeometry:
        return self.lanes[lane_id]

    def gates_of(self, kind: GateKind) -> list[GateSegment]:
        return [g for g in sorted(self.gates.values(), key=lambda g: g.gate_id) if g.kind is kind]


# --------------------------------------------------------------------------
# polyline primitives


def polyline_length(points: Sequence[Point]) -> float:
    return sum(
        math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(points, points[1:])
    )


class Projection(NamedTuple):
    s: float  # arc length of the closest point, from the polyline start
    distance: float  # unsigned distance to the closest point
    signed: float  # perpendicular distance, left of travel positive
    heading: float  # direction of the nearest segment, radians
    segment: int  # index of the nearest segment


def project_to_polyline(point: Point, polyline: Sequence[Point]) -> Projection:
    """Closest-point projection. Nearest-segment ties break toward the
    lower segment index; sign comes from the side-of-line test on that
    segment."""
    if len(polyline) < 2:
        raise DataError("polyline needs at least 2 points")
    px, py = point
    best: Projection | None = None
    s_base = 0.0
    for i, (a, b) in enumerate(zip(polyline, polyline[1:])):
        ax, ay = a
        bx, by = b
        dx, dy = bx - ax, by - ay
        seg_len = math.hypot(dx, dy)
        t = ((px - ax) * dx + (py - ay) * dy) / (seg_len * seg_len)
        t = min(1.0, max(0.0, t))
        qx, qy = ax + t * dx, ay + t * dy
        dist = math.hypot(px - qx, py - qy)
        if best is None or dist < best.distance - 1e-12:
            cross = dx * (py - ay) - dy * (px - ax)
            side = 0.0 if cross == 0.0 else math.copysign(1.0, cross)
            best = Projection(
                s=s_base + t * seg_len,
                distance=dist,
                signed=side * dist,
                heading=math.atan2(dy, dx),
                segment=i,
            )
        s_base += seg_len
    assert best is not None
    return best


def lateral_offset(point: Point, lane: LaneGeometry) -> float:
    """Signed distance to the lane centerline, left of travel positive."""
    return project_to_polyline(point, lane.centerline).signed


def lane_heading_at(point: Point, lane: LaneGeometry) -> float:
    """Direction of the centerline segment nearest to the point."""
    return project_to_polyline(point, lane.centerline).heading


def arc_length_projection(point: Point, polyline: Sequence[Point]) -> tuple[float, float]:
    """(s, d): arc position of the closest polyline point and the unsigned
    distance to it. Beyond the ends, s clamps to 0 or the total length."""
    p = project_to_polyline(point, polyline)
    return p.s, p.distance


def point_in_lane(point: Point, lane: LaneGeometry) -> bool:
    """Center-point lane membership: within half a width of the centerline
    (closed boundary) and projecting strictly inside the polyline span."""
    p = project_to_polyline(point, lane.centerline)
    return p.distance <= lane.width / 2.0 and 0.0 < p.s < lane.total_length


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: Point, b: Point, c: Point) -> bool:
    return (
        min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
        and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
    )


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """Closed segment intersection (touching endpoints count)."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def gate_crossed(prev: Point, curr: Point, gate: GateSegment) -> bool:
    """True iff the motion segment crosses the gate in its crossing
    direction (strictly positive dot product)."""
    if prev == curr:
        return False
    mx, my = curr[0] - prev[0], curr[1] - prev[1]
    dx, dy = gate.crossing_direction
    if mx * dx + my * dy <= 0.0:
        return False
    return segments_intersect(prev, curr, gate.endpoints[0], gate.endpoints[1])


# --------------------------------------------------------------------------
# .crtm file format


def _fmt(v: float) -> str:
    return repr(float(v))


def write_crtm(road_map: RoadMap, path: str | Path) -> None:
    lines = [CRTM_VERSION, f"map {json.dumps(road_map.map_id)}"]
    for lane_id in sorted(road_map.lanes):
        lane = road_map.lanes[lane_id]
        lines.append(f"lane {lane.lane_id} {_fmt(lane.width)} {len(lane.centerline)}")
        for x, y in lane.centerline:
            lines.append(f"{_fmt(x)} {_fmt(y)}")
    for gate_id in sorted(road_map.gates):
        g = road_map.gates[gate_id]
        (x1, y1), (x2, y2) = g.endpoints
        dx, dy = g.crossing_direction
        lines.append(
            f"gate {g.gate_id} {g.kind.value} {_fmt(x1)} {_fmt(y1)} "
            f"{_fmt(x2)} {_fmt(y2)} {_fmt(dx)} {_fmt(dy)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_crtm(path: str | Path) -> RoadMap:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CRTM_VERSION:
        raise FormatError(f"{path}: not a {CRTM_VERSION!r} file")
    if len(lines) < 2 or not lines[1].startswith("map "):
        raise FormatError(f"{path}: missing map id line")
    map_id = json.loads(lines[1][4:])
    lanes: dict[int, LaneGeometry] = {}
    gates: dict[int, GateSegment] = {}
    i = 2
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "lane":
            if len(parts) != 4:
                raise FormatError(f"{path}:{i + 1}: bad lane header")
            lane_id, width, n = int(parts[1]), float(parts[2]), int(parts[3])
            pts = []
            for j in range(n):
                sp = lines[i + 1 + j].split()
                pts.append((float(sp[0]), float(sp[1])))
            if lane_id in lanes:
                raise FormatError(f"{path}: duplicate lane id {lane_id}")
            lanes[lane_id] = LaneGeometry(lane_id, tuple(pts), width)
            i += 1 + n
        elif parts[0] == "gate":
            if len(parts) != 9:
                raise FormatError(f"{path}:{i + 1}: bad gate line")
            gate_id = int(parts[1])
            kind = GateKind(parts[2])
            x1, y1, x2, y2, dx, dy = (float(v) for v in parts[3:9])
            n = math.hypot(dx, dy)
            if n == 0:
                raise FormatError(f"{path}:{i + 1}: zero crossing direction")
            if gate_id in gates:
                raise FormatError(f"{path}: duplicate gate id {gate_id}")
            gates[gate_id] = GateSegment(
                gate_id, kind, ((x1, y1), (x2, y2)), (dx / n, dy / n)
            )
            i += 1
        else:
            raise FormatError(f"{path}:{i + 1}: unknown record {parts[0]!r}")
    return RoadMap(map_id=map_id, lanes=lanes, gates=gates)


def yaw_error(yaw: float, heading: float) -> float:
    """Smallest signed angular difference yaw - heading."""
    return normalize_angle(yaw - heading)
