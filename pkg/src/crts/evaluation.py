"""Success-rate evaluation of a policy over one split of a suite."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .episode import EpisodeConfig, ScenarioEnv
from .policies import make_policy
from .roadmap import RoadMap
from .scenarios import ScenarioSet
from .tracks import TrajectoryDataset
from .vehicle import VehicleParams
from .world import EpisodeState

REPORT_FORMAT = "crts-eval-report/1"

# hard step ceiling, only as a guard against runaway configs; the scenario
# deadline terminates episodes well before this
MAX_STEPS = 100_000


@dataclass(frozen=True)
class EpisodeOutcome:
    scenario_id: str
    success: bool
    failure_reason: Optional[str]
    episode_return: float
    length: int


@dataclass(frozen=True)
class EvalReport:
    split: str
    scheme: str
    policy: str
    n_scenarios: int
    success_rate: float
    failures: dict[str, int]
    mean_return: float
    mean_length: float
    runtime_seconds: float

    def to_json(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "split": self.split,
            "scheme": self.scheme,
            "policy": self.policy,
            "n_scenarios": self.n_scenarios,
            "success_rate": self.success_rate,
            "failures": self.failures,
            "mean_return": self.mean_return,
            "mean_length": self.mean_length,
            "runtime_seconds": self.runtime_seconds,
        }


def run_episode(env: ScenarioEnv, policy, scenario_id: Optional[str] = None) -> EpisodeOutcome:
    env.reset(scenario_id)
    assert env.scenario is not None
    total = 0.0
    steps = 0
    while not env.done and steps < MAX_STEPS:
        action = policy.act(env.scenario, env.world)
        result = env.step(action)
        total += result.reward
        steps += 1
    term = env.termination
    return EpisodeOutcome(
        scenario_id=env.scenario.scenario_id,
        success=term.state is EpisodeState.SUCCESS,
        failure_reason=term.failure_reason.value if term.failure_reason else None,
        episode_return=total,
        length=steps,
    )


def evaluate(
    suite: ScenarioSet,
    dataset: TrajectoryDataset,
    road_map: RoadMap,
    config: EpisodeConfig,
    policy_name: str,
    workers: int = 1,
    vehicle_params: VehicleParams | None = None,
) -> EvalReport:
    """Run every scenario of the configured split once.

    Aggregation is order-independent: outcomes are merged in scenario-id
    order, so the report is identical for any worker count.
    """
    started = time.perf_counter()
    ids = sorted(s.scenario_id for s in suite.of_split(config.split))

    def run_chunk(chunk: list[str]) -> list[EpisodeOutcome]:
        env = ScenarioEnv(suite, dataset, road_map, config, vehicle_params)
        policy = make_policy(policy_name, env.dynamics.params)
        return [run_episode(env, policy, sid) for sid in chunk]

    outcomes: list[EpisodeOutcome] = []
    if workers <= 1 or len(ids) <= 1:
        outcomes = run_chunk(ids)
    else:
        n = min(workers, len(ids))
        chunks = [ids[i::n] for i in range(n)]
        with ThreadPoolExecutor(max_workers=n) as pool:
            for part in pool.map(run_chunk, chunks):
                outcomes.extend(part)
    outcomes.sort(key=lambda o: o.scenario_id)

    n_total = len(outcomes)
    n_success = sum(1 for o in outcomes if o.success)
    failures: dict[str, int] = {}
    for o in outcomes:
        if not o.success and o.failure_reason:
            failures[o.failure_reason] = failures.get(o.failure_reason, 0) + 1
    return EvalReport(
        split=config.split.value,
        scheme=config.scheme.value,
        policy=policy_name,
        n_scenarios=n_total,
        success_rate=(n_success / n_total) if n_total else 0.0,
        failures=dict(sorted(failures.items())),
        mean_return=(sum(o.episode_return for o in outcomes) / n_total) if n_total else 0.0,
        mean_length=(sum(o.length for o in outcomes) / n_total) if n_total else 0.0,
        runtime_seconds=time.perf_counter() - started,
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
