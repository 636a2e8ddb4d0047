"""Trajectory dataset ingestion.

Parses delimiter-separated recordings into a canonical, unit-normalized
representation: every track is a time-ordered series of poses on a common
0.1 s grid (10 Hz), positions in meters, yaw in radians CCW from +x.
Source-specific quirks (feet, odd frame rates, bumper-referenced positions)
are described by a :class:`ColumnMapping` and undone here, so everything
downstream can assume one clean format.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    DataError,
    EmptyDatasetError,
    FormatError,
    SchemaError,
    TooShortTrackError,
)

GRID_DT = 0.1  # canonical sample spacing, seconds
GRID_EPS = 1e-9
FOOT = 0.3048  # meters per foot
MIN_YAW_DISPLACEMENT = 0.01  # below this, heading is carried over (meters)

CRTD_VERSION = "crtd 1"


class VehicleClass(Enum):
    CAR = "car"
    TRUCK = "truck"
    MOTORCYCLE = "motorcycle"
    OTHER = "other"


class Source(Enum):
    NGSIM = "ngsim"
    OPENDD = "opendd"
    CANONICAL = "canonical"


class LengthUnit(Enum):
    FEET = "feet"
    METERS = "meters"


class ReferencePoint(Enum):
    FRONT_BUMPER = "front_bumper"
    CENTER = "center"
    REAR_AXLE = "rear_axle"


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class TrackSample:
    t: float  # seconds, scenario-epoch time
    x: float  # meters, map frame
    y: float  # meters, map frame
    yaw: float  # radians, CCW from +x, in (-pi, pi]
    speed: float  # m/s, >= 0
    lane_id: Optional[int] = None


@dataclass(frozen=True)
class VehicleTrack:
    id: int
    vehicle_class: VehicleClass
    length: float  # meters
    width: float  # meters
    samples: tuple[TrackSample, ...]

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise DataError(f"track {self.id}: non-positive dimensions")
        if len(self.samples) < 2:
            raise DataError(f"track {self.id}: needs at least 2 samples")
        for a, b in zip(self.samples, self.samples[1:]):
            if b.t <= a.t:
                raise DataError(
                    f"track {self.id}: non-increasing timestamps at t={b.t}"
                )

    @property
    def t_first(self) -> float:
        return self.samples[0].t

    @property
    def t_last(self) -> float:
        return self.samples[-1].t

    def is_on_grid(self) -> bool:
        return all(
            abs((b.t - a.t) - GRID_DT) <= GRID_EPS
            for a, b in zip(self.samples, self.samples[1:])
        )

    def sample_at(self, t: float) -> Optional[TrackSample]:
        """Grid-aligned lookup; None outside the track's time span."""
        if t < self.t_first - GRID_EPS or t > self.t_last + GRID_EPS:
            return None
        idx = round((t - self.t_first) / GRID_DT)
        if idx < 0 or idx >= len(self.samples):
            return None
        s = self.samples[idx]
        if abs(s.t - t) > 1e-6:
            return None
        return s


@dataclass(frozen=True)
class TrajectoryDataset:
    source: Source
    recording_id: str
    tracks: dict[int, VehicleTrack]
    map_id: str = ""

    def __post_init__(self) -> None:
        for tid, tr in self.tracks.items():
            if tid != tr.id:
                raise DataError(f"track keyed {tid} but carries id {tr.id}")

    def track_ids(self) -> list[int]:
        return sorted(self.tracks)


@dataclass(frozen=True)
class ColumnMapping:
    """Describes how to read one tabular trajectory schema.

    Mandatory columns: vehicle id, position x/y, and either a time column
    (seconds) or a frame column (divided by ``rate``). Everything else is
    optional and falls back to defaults.
    """

    id_column: str
    x_column: str
    y_column: str
    time_column: Optional[str] = None
    frame_column: Optional[str] = None
    yaw_column: Optional[str] = None
    speed_column: Optional[str] = None
    lane_column: Optional[str] = None
    length_column: Optional[str] = None
    width_column: Optional[str] = None
    class_column: Optional[str] = None
    unit: LengthUnit = LengthUnit.METERS
    rate: float = 10.0  # Hz, one of {10, 25, 30}
    reference_point: ReferencePoint = ReferencePoint.CENTER
    delimiter: str = ","
    time_scale: float = 1.0  # multiply raw time values to get seconds
    smoothing_window: float = 0.0  # seconds, 0 disables
    default_length: float = 4.5
    default_width: float = 1.8
    class_labels: dict[str, VehicleClass] = field(default_factory=dict)
    source: Source = Source.CANONICAL

    def __post_init__(self) -> None:
        if self.time_column is None and self.frame_column is None:
            raise SchemaError("mapping needs a time or frame column")
        if self.rate not in (10.0, 25.0, 30.0, 10, 25, 30):
            raise SchemaError(f"unsupported source rate {self.rate}")

    def required_columns(self) -> list[str]:
        cols = [self.id_column, self.x_column, self.y_column]
        for c in (
            self.time_column,
            self.frame_column,
            self.yaw_column,
            self.speed_column,
            self.lane_column,
            self.length_column,
            self.width_column,
            self.class_column,
        ):
            if c is not None:
                cols.append(c)
        return cols


# NGSIM class codes: 1 motorcycle, 2 car, 3 truck.
_NGSIM_CLASSES = {
    "1": VehicleClass.MOTORCYCLE,
    "2": VehicleClass.CAR,
    "3": VehicleClass.TRUCK,
}

_OPENDD_CLASSES = {
    "Car": VehicleClass.CAR,
    "Truck": VehicleClass.TRUCK,
    "Bus": VehicleClass.TRUCK,
    "Van": VehicleClass.CAR,
    "Motorcycle": VehicleClass.MOTORCYCLE,
    "Bicycle": VehicleClass.OTHER,
    "Pedestrian": VehicleClass.OTHER,
}

PRESETS: dict[str, ColumnMapping] = {
    "ngsim": ColumnMapping(
        id_column="Vehicle_ID",
        x_column="Local_X",
        y_column="Local_Y",
        frame_column="Frame_ID",
        speed_column="v_Vel",
        lane_column="Lane_ID",
        length_column="v_Length",
        width_column="v_Width",
        class_column="v_Class",
        unit=LengthUnit.FEET,
        rate=10.0,
        reference_point=ReferencePoint.FRONT_BUMPER,
        delimiter=",",
        smoothing_window=1.5,
        class_labels=_NGSIM_CLASSES,
        source=Source.NGSIM,
    ),
    "opendd": ColumnMapping(
        id_column="OBJID",
        x_column="UTM_X",
        y_column="UTM_Y",
        time_column="TIMESTAMP",
        yaw_column="ANGLE",
        speed_column="V",
        length_column="LENGTH",
        width_column="WIDTH",
        class_column="CLASS",
        unit=LengthUnit.METERS,
        rate=30.0,
        reference_point=ReferencePoint.CENTER,
        delimiter=",",
        smoothing_window=0.0,
        class_labels=_OPENDD_CLASSES,
        source=Source.OPENDD,
    ),
}


def _to_float(raw: str, column: str, line_no: int) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise DataError(f"line {line_no}: column {column!r}: bad number {raw!r}") from exc


def parse_tabular_tracks(path: str | Path, mapping: ColumnMapping) -> TrajectoryDataset:
    """Read a delimited trajectory table into per-vehicle tracks.

    Rows are grouped by vehicle id and sorted by time; lengths are converted
    to meters; when no heading column is mapped, yaw is derived from
    consecutive displacements. The result is NOT yet on the canonical grid —
    run :func:`ingest` (or resample/smooth/remap explicitly) for that.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=mapping.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        col_idx: dict[str, int] = {}
        for col in mapping.required_columns():
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
            col_idx[col] = header.index(col)

        unit = FOOT if mapping.unit is LengthUnit.FEET else 1.0
        rows_by_vehicle: dict[int, list[tuple[float, float, float, dict]]] = {}
        meta_by_vehicle: dict[int, dict] = {}
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            n_rows += 1

            def get(col: Optional[str]) -> Optional[str]:
                return row[col_idx[col]].strip() if col is not None else None

            vid = int(float(get(mapping.id_column)))
            if mapping.time_column is not None:
                t = _to_float(get(mapping.time_column), mapping.time_column, line_no)
                t *= mapping.time_scale
            else:
                frame = _to_float(get(mapping.frame_column), mapping.frame_column, line_no)
                t = frame / mapping.rate
            x = _to_float(get(mapping.x_column), mapping.x_column, line_no) * unit
            y = _to_float(get(mapping.y_column), mapping.y_column, line_no) * unit
            extras: dict = {}
            if mapping.yaw_column is not None:
                extras["yaw"] = normalize_angle(
                    _to_float(get(mapping.yaw_column), mapping.yaw_column, line_no)
                )
            if mapping.speed_column is not None:
                extras["speed"] = max(
                    0.0, _to_float(get(mapping.speed_column), mapping.speed_column, line_no) * unit
                )
            if mapping.lane_column is not None:
                raw_lane = get(mapping.lane_column)
                extras["lane_id"] = int(float(raw_lane)) if raw_lane not in ("", None) else None
            rows_by_vehicle.setdefault(vid, []).append((t, x, y, extras))

            if vid not in meta_by_vehicle:
                length = mapping.default_length
                width = mapping.default_width
                if mapping.length_column is not None:
                    length = _to_float(get(mapping.length_column), mapping.length_column, line_no) * unit
                if mapping.width_column is not None:
                    width = _to_float(get(mapping.width_column), mapping.width_column, line_no) * unit
                vclass = VehicleClass.CAR
                if mapping.class_column is not None:
                    vclass = mapping.class_labels.get(get(mapping.class_column), VehicleClass.OTHER)
                meta_by_vehicle[vid] = {"length": length, "width": width, "class": vclass}

    if n_rows == 0:
        raise EmptyDatasetError(f"{path}: no data rows")

    tracks: dict[int, VehicleTrack] = {}
    for vid, rows in rows_by_vehicle.items():
        rows.sort(key=lambda r: r[0])
        for a, b in zip(rows, rows[1:]):
            if b[0] - a[0] <= 0:
                raise DataError(f"vehicle {vid}: duplicate timestamp t={b[0]}")
        if len(rows) < 2:
            continue  # single-sample vehicles carry no motion
        meta = meta_by_vehicle[vid]
        have_yaw = "yaw" in rows[0][3]
        samples = []
        for i, (t, x, y, extras) in enumerate(rows):
            yaw = extras.get("yaw", 0.0)
            speed = extras.get("speed")
            if speed is None:
                j = min(i + 1, len(rows) - 1)
                k = max(j - 1, 0)
                dt = rows[j][0] - rows[k][0]
                speed = math.hypot(rows[j][1] - rows[k][1], rows[j][2] - rows[k][2]) / dt
            samples.append(
                TrackSample(t=t, x=x, y=y, yaw=yaw, speed=speed, lane_id=extras.get("lane_id"))
            )
        if not have_yaw:
            samples = _derive_yaw(samples)
        tracks[vid] = VehicleTrack(
            id=vid,
            vehicle_class=meta["class"],
            length=meta["length"],
            width=meta["width"],
            samples=tuple(samples),
        )

    if not tracks:
        raise EmptyDatasetError(f"{path}: no usable tracks")

    return TrajectoryDataset(source=mapping.source, recording_id=path.stem, tracks=tracks)


def _derive_yaw(samples: list[TrackSample]) -> list[TrackSample]:
    """Heading from forward displacement; near-standstill keeps the last one."""
    yaws: list[Optional[float]] = []
    prev: Optional[float] = None
    for i, s in enumerate(samples):
        if i < len(samples) - 1:
            dx = samples[i + 1].x - s.x
            dy = samples[i + 1].y - s.y
            if math.hypot(dx, dy) >= MIN_YAW_DISPLACEMENT:
                prev = math.atan2(dy, dx)
        yaws.append(prev)
    # leading standstill samples inherit the first resolved heading
    first = next((y for y in yaws if y is not None), 0.0)
    resolved = [y if y is not None else first for y in yaws]
    return [replace(s, yaw=normalize_angle(y)) for s, y in zip(samples, resolved)]


def _interp_sample(a: TrackSample, b: TrackSample, t: float) -> TrackSample:
    if abs(t - a.t) <= 1e-12:
        return replace(a, t=t)
    if abs(t - b.t) <= 1e-12:
        return replace(b, t=t)
    w = (t - a.t) / (b.t - a.t)
    # shortest-arc interpolation keeps yaw continuous across the -pi/pi seam
    dyaw = normalize_angle(b.yaw - a.yaw)
    return TrackSample(
        t=t,
        x=a.x + w * (b.x - a.x),
        y=a.y + w * (b.y - a.y),
        yaw=normalize_angle(a.yaw + w * dyaw),
        speed=a.speed + w * (b.speed - a.speed),
        lane_id=a.lane_id if w < 0.5 else b.lane_id,
    )


def resample_to_grid(track: VehicleTrack, source_rate: float) -> VehicleTrack:
    """Resample onto the canonical 0.1 s grid by interpolation.

    A track already on the grid comes back sample-identical.
    """
    if source_rate < 10:
        raise DataError(f"source rate {source_rate} below the 10 Hz grid")
    t0, t1 = track.t_first, track.t_last
    k_first = math.ceil((t0 - GRID_EPS) / GRID_DT)
    k_last = math.floor((t1 + GRID_EPS) / GRID_DT)
    if k_last - k_first < 1:
        raise TooShortTrackError(
            f"track {track.id}: span [{t0}, {t1}] holds fewer than two grid points"
        )
    times = [k * GRID_DT for k in range(k_first, k_last + 1)]
    src_t = [s.t for s in track.samples]
    out = []
    for t in times:
        j = bisect_right(src_t, t + 1e-12)
        j = min(max(j, 1), len(src_t) - 1)
        out.append(_interp_sample(track.samples[j - 1], track.samples[j], t))
    return replace(track, samples=tuple(out))


def smooth_positions(track: VehicleTrack, window: float) -> VehicleTrack:
    """Centered moving-average position filter, truncated at the track ends.

    Yaw is recomputed from the smoothed displacements; timestamps, speeds
    and dimensions are untouched.
    """
    if window <= 0:
        raise DataError("smoothing window must be positive")
    half = window / 2.0 + GRID_EPS
    n = len(track.samples)
    ts = [s.t for s in track.samples]
    smoothed = []
    lo = 0
    hi = 0
    for i, s in enumerate(track.samples):
        while lo < n and ts[lo] < s.t - half:
            lo += 1
        while hi < n and ts[hi] <= s.t + half:
            hi += 1
        xs = track.samples[lo:hi]
        m = len(xs)
        smoothed.append(
            replace(s, x=sum(p.x for p in xs) / m, y=sum(p.y for p in xs) / m)
        )
    return replace(track, samples=tuple(_derive_yaw(smoothed)))


_REF_OFFSET_OF_CENTER = {
    ReferencePoint.CENTER: 0.0,
    ReferencePoint.FRONT_BUMPER: 0.5,  # times length, ahead of center
}


def remap_reference_point(
    track: VehicleTrack,
    from_point: ReferencePoint,
    to_point: ReferencePoint,
    rear_axle_fraction: float = 0.5,
) -> VehicleTrack:
    """Shift recorded positions between reference-point conventions.

    Offsets are applied along each sample's heading. The rear axle sits
    ``rear_axle_fraction * length/2`` behind the center (convention varies
    between dataset releases, hence configurable).
    """

    def offset(p: ReferencePoint) -> float:
        if p is ReferencePoint.REAR_AXLE:
            return -rear_axle_fraction * 0.5
        return _REF_OFFSET_OF_CENTER[p]

    shift = (offset(to_point) - offset(from_point)) * track.length
    if shift == 0.0:
        return track
    samples = tuple(
        replace(s, x=s.x + shift * math.cos(s.yaw), y=s.y + shift * math.sin(s.yaw))
        for s in track.samples
    )
    return replace(track, samples=samples)


def ingest(
    path: str | Path,
    mapping: ColumnMapping,
    smoothing_window: Optional[float] = None,
) -> TrajectoryDataset:
    """Full ingestion: parse, remap to center, smooth, resample to 10 Hz.

    For 10 Hz sources smoothing runs before resampling, for faster sources
    after it, so the window always spans the same canonical sample count.
    ``smoothing_window=None`` takes the mapping's default; 0 disables.
    """
    ds = parse_tabular_tracks(path, mapping)
    window = mapping.smoothing_window if smoothing_window is None else smoothing_window
    out: dict[int, VehicleTrack] = {}
    for tid, track in ds.tracks.items():
        tr = track
        try:
            if mapping.rate <= 10:
                if window > 0:
                    tr = smooth_positions(tr, window)
                tr = remap_reference_point(tr, mapping.reference_point, ReferencePoint.CENTER)
                tr = resample_to_grid(tr, mapping.rate)
            else:
                tr = resample_to_grid(tr, mapping.rate)
                if window > 0:
                    tr = smooth_positions(tr, window)
                tr = remap_reference_point(tr, mapping.reference_point, ReferencePoint.CENTER)
        except TooShortTrackError:
            continue
        out[tid] = tr
    if not out:
        raise EmptyDatasetError(f"{path}: no track survives resampling")
    return replace(ds, tracks=out)


# --------------------------------------------------------------------------
# canonical .crtd serialization


def _fmt(v: float) -> str:
    return repr(float(v))


def write_crtd(ds: TrajectoryDataset, path: str | Path) -> None:
    """Serialize a dataset; byte-identical for identical inputs."""
    lines = [CRTD_VERSION]
    header = {
        "source": ds.source.value,
        "recording_id": ds.recording_id,
        "map_id": ds.map_id,
    }
    lines.append(json.dumps(header, sort_keys=True))
    for tid in ds.track_ids():
        tr = ds.tracks[tid]
        lines.append(
            f"track {tr.id} {tr.vehicle_class.value} {_fmt(tr.length)} "
            f"{_fmt(tr.width)} {len(tr.samples)}"
        )
        for s in tr.samples:
            lane = "-" if s.lane_id is None else str(s.lane_id)
            lines.append(
                f"{_fmt(s.t)} {_fmt(s.x)} {_fmt(s.y)} {_fmt(s.yaw)} {_fmt(s.speed)} {lane}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_crtd(path: str | Path) -> TrajectoryDataset:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CRTD_VERSION:
        raise FormatError(f"{path}: not a {CRTD_VERSION!r} file")
    if len(lines) < 2:
        raise FormatError(f"{path}: missing header")
    header = json.loads(lines[1])
    tracks: dict[int, VehicleTrack] = {}
    i = 2
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] != "track" or len(parts) != 6:
            raise FormatError(f"{path}:{i + 1}: expected a track header")
        tid = int(parts[1])
        vclass = VehicleClass(parts[2])
        length, width, n = float(parts[3]), float(parts[4]), int(parts[5])
        samples = []
        for j in range(n):
            sp = lines[i + 1 + j].split()
            if len(sp) != 6:
                raise FormatError(f"{path}:{i + 2 + j}: expected 6 sample fields")
            samples.append(
                TrackSample(
                    t=float(sp[0]),
                    x=float(sp[1]),
                    y=float(sp[2]),
                    yaw=float(sp[3]),
                    speed=float(sp[4]),
                    lane_id=None if sp[5] == "-" else int(sp[5]),
                )
            )
        tracks[tid] = VehicleTrack(tid, vclass, length, width, tuple(samples))
        i += 1 + n
    return TrajectoryDataset(
        source=Source(header["source"]),
        recording_id=header["recording_id"],
        tracks=tracks,
        map_id=header.get("map_id", ""),
    )


# --------------------------------------------------------------------------
# sanity validation


@dataclass(frozen=True)
class TrackReport:
    track_id: int
    n_samples: int
    on_grid: bool
    max_speed_mismatch: float  # |displacement/dt - speed|, m/s
    duration: float

    def ok(self, speed_tolerance: float) -> bool:
        return self.on_grid and self.max_speed_mismatch <= speed_tolerance


def validate_dataset(ds: TrajectoryDataset, speed_tolerance: float = 2.0) -> list[TrackReport]:
    """Per-track sanity report; mismatch between displacement and the stored
    speed field flags suspect data but is not a hard invariant."""
    reports = []
    for tid in ds.track_ids():
        tr = ds.tracks[tid]
        worst = 0.0
        for a, b in zip(tr.samples, tr.samples[1:]):
            dt = b.t - a.t
            v = math.hypot(b.x - a.x, b.y - a.y) / dt
            worst = max(worst, abs(v - a.speed))
        reports.append(
            TrackReport(
                track_id=tid,
                n_samples=len(tr.samples),
                on_grid=tr.is_on_grid(),
                max_speed_mismatch=worst,
                duration=tr.t_last - tr.t_first,
            )
        )
    return reports
