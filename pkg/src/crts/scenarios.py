"""Maneuver mining and scenario suites.

Scans canonical datasets for lane-change and roundabout-crossing events,
turns each into a reproducible scenario (ego identity, time window, goal,
recorded reference trajectory) and assigns a deterministic train/validation
split.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import FormatError
from .roadmap import GateKind, RoadMap, gate_crossed, point_in_lane, project_to_polyline
from .tracks import Source, TrajectoryDataset, VehicleTrack

CRTS_VERSION = "crts 1"

LANE_CHANGE_LEAD = 5.0  # scenario starts this long before the event, seconds
LANE_CHANGE_TIMEOUT = 10.0  # seconds
ROUNDABOUT_APPROACH = 20.0  # start this far (arc meters) before the entry gate
ROUNDABOUT_TIMEOUT_FACTOR = 1.5  # times the recorded crossing duration
PRIOR_EXIT_RADIUS = 6.0  # closest-approach radius marking a passed exit, meters

RefPoint = tuple[float, float, float]  # (t, x, y)


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"


class Direction(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class LaneChangeGoal:
    start_lane_id: int
    target_lane_id: int
    direction: Direction


@dataclass(frozen=True)
class RoundaboutGoal:
    entry_gate_id: int
    target_exit_gate_id: int
    last_prior_exit_arc: float  # on the reference trajectory, meters


Maneuver = Union[LaneChangeGoal, RoundaboutGoal]


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    dataset: Source
    recording_id: str
    ego_track_id: int
    start_time: float
    deadline: float
    maneuver: Maneuver
    reference_trajectory: tuple[RefPoint, ...]
    split: Optional[Split] = None

    def __post_init__(self) -> None:
        if self.deadline <= self.start_time:
            raise ValueError("deadline must come after start_time")

    @property
    def reference_xy(self) -> tuple[tuple[float, float], ...]:
        return tuple((x, y) for _, x, y in self.reference_trajectory)

    @property
    def is_lane_change(self) -> bool:
        return isinstance(self.maneuver, LaneChangeGoal)


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    split_seed: int

    def count(self, split: Split) -> int:
        return sum(1 for s in self.scenarios if s.split is split)

    def of_split(self, split: Split) -> list[Scenario]:
        return [s for s in self.scenarios if s.split is split]

    def by_id(self) -> dict[str, Scenario]:
        return {s.scenario_id: s for s in self.scenarios}


@dataclass
class ExtractionStats:
    events_found: int = 0
    scenarios: int = 0
    skipped_short_history: int = 0
    skipped_unknown_lane: int = 0
    skipped_no_exit: int = 0


def _scenario_id(recording_id: str, ego_id: int, event_time: float, kind: str) -> str:
    key = f"{recording_id}|{ego_id}|{event_time:.1f}|{kind}"
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def _reference(track: VehicleTrack, start_time: float) -> tuple[RefPoint, ...]:
    return tuple(
        (s.t, s.x, s.y) for s in track.samples if s.t >= start_time - 1e-9
    )


def annotate_lane_ids(dataset: TrajectoryDataset, road_map: RoadMap) -> TrajectoryDataset:
    """Fill missing lane ids with the lane whose centerline is nearest among
    those containing the sample point; leaves existing annotations alone."""
    lanes = sorted(road_map.lanes.values(), key=lambda l: l.lane_id)
    new_tracks = {}
    for tid, track in dataset.tracks.items():
        samples = []
        for s in track.samples:
            if s.lane_id is not None:
                samples.append(s)
                continue
            best_id, best_d = None, math.inf
            for lane in lanes:
                if point_in_lane((s.x, s.y), lane):
                    d = abs(project_to_polyline((s.x, s.y), lane.centerline).signed)
                    if d < best_d:
                        best_id, best_d = lane.lane_id, d
            samples.append(replace(s, lane_id=best_id))
        new_tracks[tid] = replace(track, samples=tuple(samples))
    return replace(dataset, tracks=new_tracks)


def extract_lane_changes(
    dataset: TrajectoryDataset,
    road_map: RoadMap,
    stats: Optional[ExtractionStats] = None,
) -> list[Scenario]:
    """One scenario per lane-id change with at least 5 s of prior history.

    The window opens 5 s before the change and closes 10 s later. Direction
    comes from the side of the starting lane the vehicle ends up on.
    """
    stats = stats if stats is not None else ExtractionStats()
    out: list[Scenario] = []
    for tid in dataset.track_ids():
        track = dataset.tracks[tid]
        for prev, curr in zip(track.samples, track.samples[1:]):
            if prev.lane_id is None or curr.lane_id is None:
                continue
            if prev.lane_id == curr.lane_id:
                continue
            stats.events_found += 1
            event_time = curr.t
            if event_time - track.t_first < LANE_CHANGE_LEAD - 1e-9:
                stats.skipped_short_history += 1
                continue
            if prev.lane_id not in road_map.lanes or curr.lane_id not in road_map.lanes:
                stats.skipped_unknown_lane += 1
                continue
            start_lane = road_map.lanes[prev.lane_id]
            side = project_to_polyline((curr.x, curr.y), start_lane.centerline).signed
            direction = Direction.LEFT if side > 0 else Direction.RIGHT
            start_time = event_time - LANE_CHANGE_LEAD
            out.append(
                Scenario(
                    scenario_id=_scenario_id(
                        dataset.recording_id, tid, event_time, "lane_change"
                    ),
                    dataset=dataset.source,
                    recording_id=dataset.recording_id,
                    ego_track_id=tid,
                    start_time=start_time,
                    deadline=start_time + LANE_CHANGE_TIMEOUT,
                    maneuver=LaneChangeGoal(
                        start_lane_id=prev.lane_id,
                        target_lane_id=curr.lane_id,
                        direction=direction,
                    ),
                    reference_trajectory=_reference(track, start_time),
                )
            )
            stats.scenarios += 1
    return out


def _cumulative_arcs(track: VehicleTrack) -> list[float]:
    arcs = [0.0]
    for a, b in zip(track.samples, track.samples[1:]):
        arcs.append(arcs[-1] + math.hypot(b.x - a.x, b.y - a.y))
    return arcs


def extract_roundabout_crossings(
    dataset: TrajectoryDataset,
    road_map: RoadMap,
    stats: Optional[ExtractionStats] = None,
) -> list[Scenario]:
    """One scenario per track that crosses an entry gate and then an exit.

    The window opens at the last sample still >= 20 m (along the track) from
    the entry crossing, and allows 1.5x the recorded crossing duration.
    """
    stats = stats if stats is not None else ExtractionStats()
    entries = road_map.gates_of(GateKind.ROUNDABOUT_ENTRY)
    exits = road_map.gates_of(GateKind.ROUNDABOUT_EXIT)
    out: list[Scenario] = []
    for tid in dataset.track_ids():
        track = dataset.tracks[tid]
        samples = track.samples
        entry_idx = entry_gate = None
        for i in range(len(samples) - 1):
            p, q = (samples[i].x, samples[i].y), (samples[i + 1].x, samples[i + 1].y)
            for gate in entries:
                if gate_crossed(p, q, gate):
                    entry_idx, entry_gate = i + 1, gate
                    break
            if entry_idx is not None:
                break
        if entry_idx is None:
            continue
        stats.events_found += 1
        exit_idx = exit_gate = None
        for i in range(entry_idx, len(samples) - 1):
            p, q = (samples[i].x, samples[i].y), (samples[i + 1].x, samples[i + 1].y)
            for gate in exits:
                if gate_crossed(p, q, gate):
                    exit_idx, exit_gate = i + 1, gate
                    break
            if exit_idx is not None:
                break
        if exit_idx is None:
            stats.skipped_no_exit += 1
            continue

        arcs = _cumulative_arcs(track)
        arc_entry = arcs[entry_idx]
        start_idx = 0
        for j in range(entry_idx, -1, -1):
            if arc_entry - arcs[j] >= ROUNDABOUT_APPROACH - 1e-9:
                start_idx = j
                break
        start_time = samples[start_idx].t
        exit_time = samples[exit_idx].t
        deadline = start_time + ROUNDABOUT_TIMEOUT_FACTOR * (exit_time - start_time)
        reference = _reference(track, start_time)

        s_entry = arc_entry - arcs[start_idx]
        s_exit = arcs[exit_idx] - arcs[start_idx]
        ref_xy = tuple((x, y) for _, x, y in reference)
        last_prior = s_entry
        for gate in exits:
            if gate.gate_id == exit_gate.gate_id:
                continue
            proj = project_to_polyline(gate.midpoint, ref_xy)
            if proj.distance <= PRIOR_EXIT_RADIUS and s_entry < proj.s < s_exit - 0.5:
                last_prior = max(last_prior, proj.s)

        out.append(
            Scenario(
                scenario_id=_scenario_id(
                    dataset.recording_id, tid, samples[entry_idx].t, "roundabout"
                ),
                dataset=dataset.source,
                recording_id=dataset.recording_id,
                ego_track_id=tid,
                start_time=start_time,
                deadline=deadline,
                maneuver=RoundaboutGoal(
                    entry_gate_id=entry_gate.gate_id,
                    target_exit_gate_id=exit_gate.gate_id,
                    last_prior_exit_arc=last_prior,
                ),
                reference_trajectory=reference,
            )
        )
        stats.scenarios += 1
    return out


def assign_split(
    scenarios: Sequence[Scenario], seed: int, by_recording: bool = False
) -> ScenarioSet:
    """Deterministic 80/20 split: ceil(0.8 n) scenarios go to train.

    Scenarios are kept in canonical (id-sorted) order; the permutation that
    decides membership is keyed only by the seed, so the same inputs give
    the same split on any platform. ``by_recording`` switches to grouping
    whole recordings (leakage-averse mode; the ratio then holds only
    approximately).
    """
    ordered = sorted(scenarios, key=lambda s: s.scenario_id)
    n = len(ordered)
    n_train = math.ceil(0.8 * n)
    rng = random.Random(seed)
    if not by_recording:
        perm = list(range(n))
        rng.shuffle(perm)
        train_idx = set(perm[:n_train])
        labeled = [
            replace(s, split=Split.TRAIN if i in train_idx else Split.VALIDATION)
            for i, s in enumerate(ordered)
        ]
    else:
        recs = sorted({s.recording_id for s in ordered})
        rng.shuffle(recs)
        train_recs = set()
        assigned = 0
        for rec in recs:
            if assigned >= n_train:
                break
            train_recs.add(rec)
            assigned += sum(1 for s in ordered if s.recording_id == rec)
        labeled = [
            replace(
                s,
                split=Split.TRAIN if s.recording_id in train_recs else Split.VALIDATION,
            )
            for s in ordered
        ]
    return ScenarioSet(scenarios=tuple(labeled), split_seed=seed)


# --------------------------------------------------------------------------
# .crts suite files


@dataclass(frozen=True)
class SuiteFile:
    """A scenario set plus the resources it was extracted from."""

    scenario_set: ScenarioSet
    map_path: str
    data_path: str
    map_id: str = ""


def _maneuver_to_json(m: Maneuver) -> dict:
    if isinstance(m, LaneChangeGoal):
        return {
            "kind": "lane_change",
            "start_lane": m.start_lane_id,
            "target_lane": m.target_lane_id,
            "direction": m.direction.value,
        }
    return {
        "kind": "roundabout",
        "entry_gate": m.entry_gate_id,
        "target_exit_gate": m.target_exit_gate_id,
        "last_prior_exit_arc": m.last_prior_exit_arc,
    }


def _maneuver_from_json(d: dict) -> Maneuver:
    if d["kind"] == "lane_change":
        return LaneChangeGoal(d["start_lane"], d["target_lane"], Direction(d["direction"]))
    if d["kind"] == "roundabout":
        return RoundaboutGoal(d["entry_gate"], d["target_exit_gate"], d["last_prior_exit_arc"])
    raise FormatError(f"unknown maneuver kind {d['kind']!r}")


def write_suite(suite: SuiteFile, path: str | Path) -> None:
    lines = [CRTS_VERSION]
    header = {
        "split_seed": suite.scenario_set.split_seed,
        "map_path": suite.map_path,
        "data_path": suite.data_path,
        "map_id": suite.map_id,
        "counts": {
            "train": suite.scenario_set.count(Split.TRAIN),
            "validation": suite.scenario_set.count(Split.VALIDATION),
        },
    }
    lines.append(json.dumps(header, sort_keys=True))
    for s in suite.scenario_set.scenarios:
        lines.append(
            json.dumps(
                {
                    "id": s.scenario_id,
                    "dataset": s.dataset.value,
                    "recording_id": s.recording_id,
                    "ego": s.ego_track_id,
                    "start": s.start_time,
                    "deadline": s.deadline,
                    "split": s.split.value if s.split else None,
                    "maneuver": _maneuver_to_json(s.maneuver),
                    "reference": [[t, x, y] for t, x, y in s.reference_trajectory],
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_suite(path: str | Path) -> SuiteFile:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CRTS_VERSION:
        raise FormatError(f"{path}: not a {CRTS_VERSION!r} file")
    if len(lines) < 2:
        raise FormatError(f"{path}: missing header")
    header = json.loads(lines[1])
    scenarios = []
    for line in lines[2:]:
        if not line.strip():
            continue
        d = json.loads(line)
        scenarios.append(
            Scenario(
                scenario_id=d["id"],
                dataset=Source(d["dataset"]),
                recording_id=d["recording_id"],
                ego_track_id=d["ego"],
                start_time=d["start"],
                deadline=d["deadline"],
                maneuver=_maneuver_from_json(d["maneuver"]),
                reference_trajectory=tuple((p[0], p[1], p[2]) for p in d["reference"]),
                split=Split(d["split"]) if d["split"] else None,
            )
        )
    return SuiteFile(
        scenario_set=ScenarioSet(
            scenarios=tuple(scenarios), split_seed=header["split_seed"]
        ),
        map_path=header["map_path"],
        data_path=header["data_path"],
        map_id=header.get("map_id", ""),
    )


def resolve_suite_paths(suite: SuiteFile, suite_path: str | Path) -> tuple[Path, Path]:
    """Suite-relative data/map paths, resolved against the suite file."""
    base = Path(suite_path).parent
    data = Path(suite.data_path)
    map_ = Path(suite.map_path)
    return (
        data if data.is_absolute() else base / data,
        map_ if map_.is_absolute() else base / map_,
    )
