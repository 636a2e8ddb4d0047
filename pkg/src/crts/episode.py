"""Episode orchestration: the reset/step contract over a scenario suite.

One :class:`ScenarioEnv` owns one episode at a time. Each 0.1 s step runs,
in order: ego integration, traffic replay, collision check, command update,
termination evaluation, reward computation, observation rendering.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .bev import BevSpec, FrameStack, render
from .catalog import DEFAULT_CATALOG, VehicleModel, match_vehicle_model
from .errors import EndOfSuiteError, EpisodeStateError, ScenarioLookupError
from .rewards import RewardScheme, RewardState, init_reward_state, step_reward
from .roadmap import RoadMap, arc_length_projection, project_to_polyline, yaw_error
from .scenarios import LaneChangeGoal, Scenario, ScenarioSet, Split
from .tracks import GRID_DT, TrajectoryDataset
from .vehicle import Action, EgoDynamics, VehicleParams
from .world import (
    DWELL_STEPS,
    EpisodeState,
    NavCommand,
    TerminationStatus,
    WorldState,
    check_collision,
    current_command,
    evaluate_termination,
    replay_agents,
)


@dataclass(frozen=True)
class EpisodeConfig:
    split: Split = Split.VALIDATION
    scheme: RewardScheme = RewardScheme.DENSE
    observation: BevSpec = field(default_factory=BevSpec)
    seed: int = 0
    scenario_order: str = "sequential"  # or "shuffled"
    render_observations: bool = True


@dataclass(frozen=True)
class StepResult:
    observation: Optional[np.ndarray]
    reward: float
    done: bool
    info: dict[str, Any]


class ScenarioEnv:
    """Steps one episode at a time over the configured split of a suite.

    Suite, dataset and map are shared read-only; every mutable bit of
    episode state lives on this instance, so independent instances can run
    concurrently.
    """

    def __init__(
        self,
        suite: ScenarioSet,
        dataset: TrajectoryDataset,
        road_map: RoadMap,
        config: EpisodeConfig | None = None,
        vehicle_params: VehicleParams | None = None,
        catalog: tuple[VehicleModel, ...] = DEFAULT_CATALOG,
    ):
        self.suite = suite
        self.dataset = dataset
        self.road_map = road_map
        self.config = config or EpisodeConfig()
        self.dynamics = EgoDynamics(vehicle_params)
        self._model_names = {
            tid: match_vehicle_model(
                (dataset.tracks[tid].length, dataset.tracks[tid].width), catalog
            ).name
            for tid in dataset.track_ids()
        }
        self._split_scenarios = sorted(
            suite.of_split(self.config.split), key=lambda s: s.scenario_id
        )
        if self.config.scenario_order == "shuffled":
            random.Random(self.config.seed).shuffle(self._split_scenarios)
        self._by_id = {s.scenario_id: s for s in self._split_scenarios}
        self._cursor = 0

        self.scenario: Optional[Scenario] = None
        self._history: list[WorldState] = []
        self._reward_state: Optional[RewardState] = None
        self._termination = TerminationStatus(EpisodeState.RUNNING)
        self._turn_latched = False
        self._frames = FrameStack(self.config.observation)
        self._started = False

    # -- scenario selection ------------------------------------------------

    def _next_scenario(self) -> Scenario:
        if self._cursor >= len(self._split_scenarios):
            raise EndOfSuiteError(
                f"all {len(self._split_scenarios)} scenarios of split "
                f"{self.config.split.value!r} have been played"
            )
        s = self._split_scenarios[self._cursor]
        self._cursor += 1
        return s

    def rewind(self) -> None:
        self._cursor = 0

    # -- episode lifecycle ---------------------------------------------------

    def reset(
        self, scenario_id: Optional[str] = None
    ) -> tuple[Optional[np.ndarray], dict[str, Any]]:
        if scenario_id is not None:
            scenario = self._by_id.get(scenario_id)
            if scenario is None:
                raise ScenarioLookupError(
                    f"scenario {scenario_id!r} not in split {self.config.split.value!r}"
                )
        else:
            scenario = self._next_scenario()
        self.scenario = scenario

        track = self.dataset.tracks[scenario.ego_track_id]
        s0 = track.sample_at(scenario.start_time)
        if s0 is None:
            raise ScenarioLookupError(
                f"scenario {scenario.scenario_id}: ego track has no sample at "
                f"t={scenario.start_time}"
            )
        self.dynamics.reset()
        ego = self.dynamics.initial_state(s0.x, s0.y, s0.yaw, s0.speed)
        agents = replay_agents(
            scenario, self.dataset, scenario.start_time, model_names=self._model_names
        )
        self._turn_latched = False
        command, self._turn_latched = current_command(
            scenario, ego, self.road_map, self._turn_latched
        )
        world = WorldState(
            step_index=0,
            sim_time=scenario.start_time,
            ego=ego,
            agents=agents,
            collision=check_collision(ego, agents),
            command=command,
        )
        self._history = [world]
        self._termination = TerminationStatus(EpisodeState.RUNNING)
        self._reward_state = init_reward_state(scenario, world, self.road_map)
        self._frames.reset()
        self._started = True
        obs = self._observe(world)
        return obs, self._info(world, 0.0)

    def step(self, action: Action) -> StepResult:
        if not self._started:
            raise EpisodeStateError("step before reset")
        if self._termination.done:
            raise EpisodeStateError("step after episode end")
        assert self.scenario is not None and self._reward_state is not None
        scenario = self.scenario
        prev = self._history[-1]

        ego = self.dynamics.step(prev.ego, action)
        step_index = prev.step_index + 1
        sim_time = scenario.start_time + GRID_DT * step_index
        agents = replay_agents(
            scenario, self.dataset, sim_time, model_names=self._model_names
        )
        collision = check_collision(ego, agents)
        command, self._turn_latched = current_command(
            scenario, ego, self.road_map, self._turn_latched
        )
        world = WorldState(
            step_index=step_index,
            sim_time=sim_time,
            ego=ego,
            agents=agents,
            collision=collision,
            command=command,
        )
        self._history.append(world)
        if len(self._history) > DWELL_STEPS + 2:
            self._history = self._history[-(DWELL_STEPS + 2) :]
        self._termination = evaluate_termination(scenario, self._history, self.road_map)
        reward, self._reward_state = step_reward(
            self._reward_state,
            self.config.scheme,
            scenario,
            world,
            self._termination,
            self.road_map,
        )
        obs = self._observe(world)
        return StepResult(
            observation=obs,
            reward=reward,
            done=self._termination.done,
            info=self._info(world, reward),
        )

    # -- helpers -------------------------------------------------------------

    def _observe(self, world: WorldState) -> Optional[np.ndarray]:
        if not self.config.render_observations:
            return None
        frame = render(world, self.road_map, self.config.observation)
        self._frames.push(frame)
        return self._frames.view()

    def _info(self, world: WorldState, reward: float) -> dict[str, Any]:
        assert self.scenario is not None
        scenario = self.scenario
        ego = world.ego
        info: dict[str, Any] = {
            "scenario_id": scenario.scenario_id,
            "sim_time": world.sim_time,
            "step_index": world.step_index,
            "deadline": scenario.deadline,
            "command": world.command.value,
            "termination": self._termination.state.value,
            "failure_reason": (
                self._termination.failure_reason.value
                if self._termination.failure_reason
                else None
            ),
            "collision": world.collision,
            "ego": {
                "x": ego.x,
                "y": ego.y,
                "yaw": ego.yaw,
                "speed": ego.speed,
                "wheel_angle": ego.wheel_angle,
            },
            "n_agents": len(world.agents),
        }
        m = scenario.maneuver
        if isinstance(m, LaneChangeGoal):
            lane = self.road_map.lanes[m.target_lane_id]
            proj = project_to_polyline((ego.x, ego.y), lane.centerline)
            info["lateral_offset"] = proj.signed
            info["yaw_error"] = yaw_error(ego.yaw, proj.heading)
            if self._reward_state is not None:
                info["distance_bin"] = self._reward_state.current_bin
        else:
            s, d = arc_length_projection((ego.x, ego.y), scenario.reference_xy)
            info["progress_arc"] = s
            info["deviation"] = d
            if self._reward_state is not None:
                info["segments_passed"] = self._reward_state.segments_passed
        return info

    @property
    def done(self) -> bool:
        return self._termination.done

    @property
    def termination(self) -> TerminationStatus:
        return self._termination

    @property
    def world(self) -> WorldState:
        return self._history[-1]

    def observation_shape(self) -> tuple[int, int, int]:
        spec = self.config.observation
        return (spec.rows, spec.cols, spec.stacked_channels)
