"""Baseline policies: a pure-pursuit follower of the recorded reference
trajectory (the completability baseline) and a do-nothing policy."""

from __future__ import annotations

import math
from typing import Protocol

from .roadmap import project_to_polyline
from .scenarios import Scenario
from .vehicle import Action, VehicleParams
from .world import WorldState

LOOKAHEAD_MIN = 3.0  # meters
LOOKAHEAD_SPEED_FACTOR = 0.5  # seconds of travel added to the lookahead


class Policy(Protocol):
    name: str

    def act(self, scenario: Scenario, world: WorldState) -> Action: ...


class IdlePolicy:
    """Constant (steer 0, target speed 0): rolls to a stop and waits."""

    name = "idle"

    def act(self, scenario: Scenario, world: WorldState) -> Action:
        return Action(steer=0.0, target_speed=0.0)


def _point_at_arc(
    xy: tuple[tuple[float, float], ...], arcs: list[float], s: float
) -> tuple[float, float]:
    if s <= 0:
        return xy[0]
    if s >= arcs[-1]:
        return xy[-1]
    lo, hi = 0, len(arcs) - 1
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if arcs[mid] <= s:
            lo = mid
        else:
            hi = mid
    seg = arcs[hi] - arcs[lo]
    w = 0.0 if seg == 0 else (s - arcs[lo]) / seg
    ax, ay = xy[lo]
    bx, by = xy[hi]
    return (ax + w * (bx - ax), ay + w * (by - ay))


class ReplayFollower:
    """Pure pursuit on the reference trajectory.

    Steering aims at the reference point one lookahead ahead of the ego's
    arc projection (kappa = 2 sin(alpha) / L); the speed target is the
    recorded speed at the matched reference time.
    """

    name = "replay-follower"

    def __init__(self, params: VehicleParams | None = None):
        self.params = params or VehicleParams()
        self._cache_id: str | None = None
        self._arcs: list[float] = []

    def _arcs_for(self, scenario: Scenario) -> list[float]:
        if self._cache_id != scenario.scenario_id:
            xy = scenario.reference_xy
            arcs = [0.0]
            for a, b in zip(xy, xy[1:]):
                arcs.append(arcs[-1] + math.hypot(b[0] - a[0], b[1] - a[1]))
            self._arcs = arcs
            self._cache_id = scenario.scenario_id
        return self._arcs

    def act(self, scenario: Scenario, world: WorldState) -> Action:
        ego = world.ego
        xy = scenario.reference_xy
        ref = scenario.reference_trajectory
        arcs = self._arcs_for(scenario)
        total = arcs[-1]
        proj = project_to_polyline((ego.x, ego.y), xy)
        if proj.s >= total - 0.05:
            return Action(steer=0.0, target_speed=0.0)

        lookahead = max(LOOKAHEAD_MIN, LOOKAHEAD_SPEED_FACTOR * ego.speed)
        tx, ty = _point_at_arc(xy, arcs, proj.s + lookahead)
        dx, dy = tx - ego.x, ty - ego.y
        fwd = dx * math.cos(ego.yaw) + dy * math.sin(ego.yaw)
        left = -dx * math.sin(ego.yaw) + dy * math.cos(ego.yaw)
        chord = math.hypot(fwd, left)
        if chord < 1e-6:
            steer = 0.0
        else:
            alpha = math.atan2(left, fwd)
            curvature = 2.0 * math.sin(alpha) / chord
            wheel = math.atan(curvature * self.params.wheelbase)
            steer = max(-1.0, min(1.0, wheel / self.params.max_wheel_angle))

        # recorded speed on the segment containing the arc projection
        i = min(proj.segment, len(ref) - 2)
        dt = ref[i + 1][0] - ref[i][0]
        seg_len = arcs[i + 1] - arcs[i]
        target_speed = seg_len / dt if dt > 0 else 0.0
        return Action(steer=steer, target_speed=target_speed)


POLICIES = {
    IdlePolicy.name: IdlePolicy,
    ReplayFollower.name: ReplayFollower,
}


def make_policy(name: str, params: VehicleParams | None = None) -> Policy:
    if name not in POLICIES:
        raise KeyError(f"unknown policy {name!r}; have {sorted(POLICIES)}")
    if name == ReplayFollower.name:
        return ReplayFollower(params)
    return POLICIES[name]()
