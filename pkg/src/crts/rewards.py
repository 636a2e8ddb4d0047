"""Step and terminal reward computation.

Three schemes: ``dense`` (progress shaping plus +-1 terminal), ``sparse``
(terminal only), and ``no_failure_penalty`` (dense shaping, failures pay 0).
Lane-change shaping divides the initial distance to the target centerline
into 10 bins worth +-0.1 each; roundabout shaping pays 0.1 once per tenth
of the reference trajectory completed, never penalizing regress.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .roadmap import RoadMap, arc_length_projection, project_to_polyline
from .scenarios import LaneChangeGoal, RoundaboutGoal, Scenario
from .world import EpisodeState, TerminationStatus, WorldState

N_BINS = 10
SHAPING_UNIT = 0.1
TERMINAL_REWARD = 1.0


class RewardScheme(Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    NO_FAILURE_PENALTY = "no_failure_penalty"


@dataclass(frozen=True)
class RewardState:
    """Progress bookkeeping, owned by one episode."""

    # lane change
    d0: float = 0.0  # initial |offset| to the target centerline, meters
    current_bin: int = N_BINS
    degenerate: bool = False  # started on the centerline: shaping is 0
    # roundabout
    total_length: float = 0.0  # reference trajectory length, meters
    segments_passed: int = 0


def _target_distance(scenario: Scenario, world: WorldState, road_map: RoadMap) -> float:
    m = scenario.maneuver
    assert isinstance(m, LaneChangeGoal)
    lane = road_map.lanes[m.target_lane_id]
    return project_to_polyline((world.ego.x, world.ego.y), lane.centerline).distance


def init_reward_state(
    scenario: Scenario, world: WorldState, road_map: RoadMap
) -> RewardState:
    if isinstance(scenario.maneuver, LaneChangeGoal):
        d0 = _target_distance(scenario, world, road_map)
        if d0 <= 0.0:
            return RewardState(d0=0.0, current_bin=0, degenerate=True)
        return RewardState(d0=d0, current_bin=N_BINS)
    total = 0.0
    xy = scenario.reference_xy
    for a, b in zip(xy, xy[1:]):
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return RewardState(total_length=total)


def lane_change_bin(d: float, d0: float) -> int:
    """ceil(10 d / d0), clamped to [0, 10]: bin 10 at the start distance
    and beyond, bin 0 on the target centerline."""
    if d0 <= 0.0:
        return 0
    return min(N_BINS, max(0, math.ceil(N_BINS * d / d0 - 1e-12)))


def step_reward(
    state: RewardState,
    scheme: RewardScheme,
    scenario: Scenario,
    world: WorldState,
    termination: TerminationStatus,
    road_map: RoadMap,
) -> tuple[float, RewardState]:
    """Reward for the step that produced ``world`` / ``termination``.

    Shaping applies in dense and no_failure_penalty; terminal rewards are
    +1 on success (all schemes), -1 on failure (dense, sparse), 0 on
    failure under no_failure_penalty.
    """
    reward = 0.0
    shaped = scheme is not RewardScheme.SPARSE
    if shaped and isinstance(scenario.maneuver, LaneChangeGoal) and not state.degenerate:
        d = _target_distance(scenario, world, road_map)
        new_bin = lane_change_bin(d, state.d0)
        reward += SHAPING_UNIT * (state.current_bin - new_bin)
        state = replace(state, current_bin=new_bin)
    elif shaped and isinstance(scenario.maneuver, RoundaboutGoal) and state.total_length > 0:
        s, _ = arc_length_projection((world.ego.x, world.ego.y), scenario.reference_xy)
        k = min(N_BINS, math.floor(N_BINS * s / state.total_length))
        gained = max(0, k - state.segments_passed)
        if gained:
            reward += SHAPING_UNIT * gained
            state = replace(state, segments_passed=state.segments_passed + gained)

    if termination.state is EpisodeState.SUCCESS:
        reward += TERMINAL_REWARD
    elif termination.state is EpisodeState.FAILURE:
        if scheme is not RewardScheme.NO_FAILURE_PENALTY:
            reward -= TERMINAL_REWARD
    return reward, state
