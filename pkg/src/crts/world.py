"""World state per simulation tick: replayed traffic, collision detection,
navigation commands, and the maneuver termination rules.

Traffic is open-loop: non-ego vehicles are pinned to their recorded poses
every 0.1 s tick and never react to the ego.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .catalog import DEFAULT_CATALOG, VehicleModel, match_vehicle_model
from .errors import DataError
from .roadmap import (
    GateKind,
    RoadMap,
    arc_length_projection,
    gate_crossed,
    point_in_lane,
    project_to_polyline,
    yaw_error,
)
from .scenarios import Direction, LaneChangeGoal, RoundaboutGoal, Scenario
from .tracks import TrajectoryDataset
from .vehicle import EgoState

# Termination geometry (fixed maneuver semantics, not tunables).
TARGET_OFFSET_MAX = 0.30  # meters to the target lane centerline, strict <
YAW_ERROR_MAX = math.radians(10.0)  # relative to the lane heading, strict <
DWELL_STEPS = 10  # consecutive compliant steps (1 s at 10 Hz)
DEVIATION_MAX = 3.0  # meters from the reference trajectory, strict >
TIME_EPS = 1e-9


class NavCommand(Enum):
    LANE_FOLLOW = "LANE_FOLLOW"
    LANE_CHANGE_LEFT = "LANE_CHANGE_LEFT"
    LANE_CHANGE_RIGHT = "LANE_CHANGE_RIGHT"
    TURN_LEFT = "TURN_LEFT"
    TURN_RIGHT = "TURN_RIGHT"
    GO_STRAIGHT = "GO_STRAIGHT"


class EpisodeState(Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE = "failure"


class FailureReason(Enum):
    COLLISION = "collision"
    LEFT_BOTH_LANES = "left_both_lanes"
    DEVIATION_EXCEEDED = "deviation_exceeded"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class TerminationStatus:
    state: EpisodeState
    failure_reason: Optional[FailureReason] = None

    def __post_init__(self) -> None:
        if (self.state is EpisodeState.FAILURE) != (self.failure_reason is not None):
            raise DataError("failure_reason present iff state is failure")

    @property
    def done(self) -> bool:
        return self.state is not EpisodeState.RUNNING


RUNNING = TerminationStatus(EpisodeState.RUNNING)
SUCCESS = TerminationStatus(EpisodeState.SUCCESS)


def failure(reason: FailureReason) -> TerminationStatus:
    return TerminationStatus(EpisodeState.FAILURE, reason)


@dataclass(frozen=True)
class AgentPose:
    track_id: int
    x: float
    y: float
    yaw: float
    dims: tuple[float, float]
    catalog_model: str


@dataclass(frozen=True)
class WorldState:
    step_index: int  # 0.1 s ticks since scenario start
    sim_time: float
    ego: EgoState
    agents: tuple[AgentPose, ...]
    collision: bool
    command: NavCommand


def replay_agents(
    scenario: Scenario,
    dataset: TrajectoryDataset,
    sim_time: float,
    catalog: tuple[VehicleModel, ...] = DEFAULT_CATALOG,
    model_names: Optional[dict[int, str]] = None,
) -> tuple[AgentPose, ...]:
    """Poses of every non-ego track that has a sample at this tick.

    Vehicles appear at their first recorded sample and vanish after their
    last; poses are set exactly to the recorded grid samples.
    """
    agents = []
    for tid in dataset.track_ids():
        if tid == scenario.ego_track_id:
            continue
        track = dataset.tracks[tid]
        s = track.sample_at(sim_time)
        if s is None:
            continue
        if model_names is not None:
            name = model_names[tid]
        else:
            name = match_vehicle_model((track.length, track.width), catalog).name
        agents.append(
            AgentPose(
                track_id=tid,
                x=s.x,
                y=s.y,
                yaw=s.yaw,
                dims=(track.length, track.width),
                catalog_model=name,
            )
        )
    return tuple(agents)


# --------------------------------------------------------------------------
# oriented-rectangle collision (separating axis test, closed boundaries)


def rectangle_corners(
    x: float, y: float, yaw: float, length: float, width: float
) -> list[tuple[float, float]]:
    c, s = math.cos(yaw), math.sin(yaw)
    hl, hw = length / 2.0, width / 2.0
    return [
        (x + dx * c - dy * s, y + dx * s + dy * c)
        for dx, dy in ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))
    ]


def _axes(corners: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    axes = []
    for i in range(2):  # a rectangle has two distinct edge normals
        x1, y1 = corners[i]
        x2, y2 = corners[i + 1]
        axes.append((y2 - y1, x1 - x2))
    return axes


def _interval(corners, axis):
    dots = [cx * axis[0] + cy * axis[1] for cx, cy in corners]
    return min(dots), max(dots)


def rectangles_overlap(c1, c2) -> bool:
    """SAT on the 4 edge normals; touching boundaries count as overlap."""
    for axis in _axes(c1) + _axes(c2):
        lo1, hi1 = _interval(c1, axis)
        lo2, hi2 = _interval(c2, axis)
        if hi1 < lo2 or hi2 < lo1:
            return False
    return True


def separation_gap(c1, c2) -> float:
    """Signed gap between two rectangles along their SAT axes (normalized):
    positive = separated by at least that much, negative = penetration depth.
    """
    worst = -math.inf
    for axis in _axes(c1) + _axes(c2):
        norm = math.hypot(*axis)
        lo1, hi1 = _interval(c1, axis)
        lo2, hi2 = _interval(c2, axis)
        gap = max(lo2 - hi1, lo1 - hi2) / norm
        worst = max(worst, gap)
    return worst


def check_collision(ego: EgoState, agents: Sequence[AgentPose]) -> bool:
    ego_corners = rectangle_corners(ego.x, ego.y, ego.yaw, ego.dims[0], ego.dims[1])
    ego_radius = math.hypot(ego.dims[0], ego.dims[1]) / 2.0
    for agent in agents:
        radius = math.hypot(agent.dims[0], agent.dims[1]) / 2.0
        if math.hypot(agent.x - ego.x, agent.y - ego.y) > ego_radius + radius:
            continue
        corners = rectangle_corners(agent.x, agent.y, agent.yaw, agent.dims[0], agent.dims[1])
        if rectangles_overlap(ego_corners, corners):
            return True
    return False


# --------------------------------------------------------------------------
# navigation command


def current_command(
    scenario: Scenario,
    ego: EgoState,
    road_map: RoadMap,
    turn_latched: bool = False,
) -> tuple[NavCommand, bool]:
    """Active command for this step. Returns (command, latched'): the
    roundabout TURN_RIGHT latches once the last prior exit is passed."""
    point = (ego.x, ego.y)
    m = scenario.maneuver
    if isinstance(m, LaneChangeGoal):
        if point_in_lane(point, road_map.lanes[m.start_lane_id]):
            cmd = (
                NavCommand.LANE_CHANGE_LEFT
                if m.direction is Direction.LEFT
                else NavCommand.LANE_CHANGE_RIGHT
            )
            return cmd, False
        return NavCommand.LANE_FOLLOW, False
    if turn_latched:
        return NavCommand.TURN_RIGHT, True
    s, _ = arc_length_projection(point, scenario.reference_xy)
    if s > m.last_prior_exit_arc:
        return NavCommand.TURN_RIGHT, True
    return NavCommand.LANE_FOLLOW, False


# --------------------------------------------------------------------------
# termination


def _lane_change_compliant(state: WorldState, scenario: Scenario, road_map: RoadMap) -> bool:
    m = scenario.maneuver
    assert isinstance(m, LaneChangeGoal)
    lane = road_map.lanes[m.target_lane_id]
    proj = project_to_polyline((state.ego.x, state.ego.y), lane.centerline)
    return (
        proj.distance < TARGET_OFFSET_MAX
        and abs(yaw_error(state.ego.yaw, proj.heading)) < YAW_ERROR_MAX
    )


def evaluate_termination(
    scenario: Scenario,
    history: Sequence[WorldState],
    road_map: RoadMap,
) -> TerminationStatus:
    """Apply the maneuver's success/failure clauses to the newest state.

    ``history`` must hold the most recent states in order (at least the
    last 10 for the lane-change dwell rule to be decidable). Collision
    outranks every other clause in the same tick; timeout is checked last.
    """
    current = history[-1]
    if current.collision:
        return failure(FailureReason.COLLISION)

    m = scenario.maneuver
    if isinstance(m, LaneChangeGoal):
        point = (current.ego.x, current.ego.y)
        in_start = point_in_lane(point, road_map.lanes[m.start_lane_id])
        in_target = point_in_lane(point, road_map.lanes[m.target_lane_id])
        if not in_start and not in_target:
            return failure(FailureReason.LEFT_BOTH_LANES)
        if len(history) >= DWELL_STEPS and all(
            _lane_change_compliant(w, scenario, road_map)
            for w in history[-DWELL_STEPS:]
        ):
            return SUCCESS
    else:
        assert isinstance(m, RoundaboutGoal)
        if len(history) >= 2:
            prev = history[-2]
            p, q = (prev.ego.x, prev.ego.y), (current.ego.x, current.ego.y)
            target = road_map.gates[m.target_exit_gate_id]
            for gate in road_map.gates_of(GateKind.ROUNDABOUT_EXIT):
                if gate.gate_id != target.gate_id and gate_crossed(p, q, gate):
                    return failure(FailureReason.DEVIATION_EXCEEDED)  # wrong exit
            if gate_crossed(p, q, target):
                return SUCCESS
        _, d = arc_length_projection(
            (current.ego.x, current.ego.y), scenario.reference_xy
        )
        if d > DEVIATION_MAX:
            return failure(FailureReason.DEVIATION_EXCEEDED)

    if current.sim_time > scenario.deadline + TIME_EPS:
        return failure(FailureReason.TIMEOUT)
    return RUNNING
