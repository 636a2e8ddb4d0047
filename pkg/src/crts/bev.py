"""Ego-centric bird's-eye-view rasterization.

Renders the world into a multi-channel binary raster (values 0/255):
road fill, lane boundaries, lane centerlines, other vehicles, ego. The ego
sits at a fixed anchor pixel heading toward row 0, with two thirds of the
view ahead of it. A pixel is set iff its center lies inside the shape;
centerlines and boundaries are stroked as 1-pixel Bresenham lines, so the
output is deterministic down to the byte.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .roadmap import RoadMap
from .world import WorldState, rectangle_corners

ALL_CHANNELS = ("road", "lanes", "centerlines", "vehicles", "ego")


class BevVariant(Enum):
    FULL = "full"
    FRONT_ONLY = "front_only"
    NO_CENTERLINE = "no_centerline"


@dataclass(frozen=True)
class BevSpec:
    rows: int = 186
    cols: int = 150
    resolution: float = 0.25  # meters per pixel
    channels: tuple[str, ...] = ALL_CHANNELS
    variant: BevVariant = BevVariant.FULL
    stack_depth: int = 1
    anchor_row: int = 124  # ego center pixel; 2/3 of the view is ahead
    anchor_col: int = 75

    def __post_init__(self) -> None:
        if self.stack_depth < 1:
            raise ValueError("stack_depth must be >= 1")
        unknown = set(self.channels) - set(ALL_CHANNELS)
        if unknown:
            raise ValueError(f"unknown channels {sorted(unknown)}")

    @property
    def effective_channels(self) -> tuple[str, ...]:
        if self.variant is BevVariant.NO_CENTERLINE:
            return tuple(c for c in self.channels if c != "centerlines")
        return self.channels

    @property
    def n_channels(self) -> int:
        return len(self.effective_channels)

    @property
    def stacked_channels(self) -> int:
        return self.n_channels * self.stack_depth


@dataclass(frozen=True)
class BevFrame:
    tensor: np.ndarray  # (rows, cols, channels) uint8, values in {0, 255}
    channels: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.tensor.shape  # type: ignore[return-value]


def _fill_convex(plane: np.ndarray, corners: Sequence[tuple[float, float]]) -> None:
    """Set pixels whose center lies inside a convex polygon given in image
    (row, col) coordinates; boundary pixels are included."""
    rows, cols = plane.shape
    rs = [p[0] for p in corners]
    cs = [p[1] for p in corners]
    r0 = max(0, math.ceil(min(rs) - 1e-9))
    r1 = min(rows - 1, math.floor(max(rs) + 1e-9))
    c0 = max(0, math.ceil(min(cs) - 1e-9))
    c1 = min(cols - 1, math.floor(max(cs) + 1e-9))
    if r0 > r1 or c0 > c1:
        return
    rr, cc = np.meshgrid(
        np.arange(r0, r1 + 1, dtype=np.float64),
        np.arange(c0, c1 + 1, dtype=np.float64),
        indexing="ij",
    )
    area = 0.0
    n = len(corners)
    for i in range(n):
        p, q = corners[i], corners[(i + 1) % n]
        area += p[0] * q[1] - q[0] * p[1]
    orient = 1.0 if area >= 0 else -1.0
    inside = np.ones(rr.shape, dtype=bool)
    for i in range(n):
        p, q = corners[i], corners[(i + 1) % n]
        cross = (q[0] - p[0]) * (cc - p[1]) - (q[1] - p[1]) * (rr - p[0])
        inside &= orient * cross >= -1e-9
    plane[r0 : r1 + 1, c0 : c1 + 1][inside] = 255


def _fill_disc(plane: np.ndarray, center: tuple[float, float], radius_px: float) -> None:
    rows, cols = plane.shape
    r0 = max(0, math.ceil(center[0] - radius_px))
    r1 = min(rows - 1, math.floor(center[0] + radius_px))
    c0 = max(0, math.ceil(center[1] - radius_px))
    c1 = min(cols - 1, math.floor(center[1] + radius_px))
    if r0 > r1 or c0 > c1:
        return
    rr, cc = np.meshgrid(
        np.arange(r0, r1 + 1, dtype=np.float64),
        np.arange(c0, c1 + 1, dtype=np.float64),
        indexing="ij",
    )
    inside = (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius_px * radius_px
    plane[r0 : r1 + 1, c0 : c1 + 1][inside] = 255


def _clip_segment(
    p: tuple[float, float], q: tuple[float, float], rows: int, cols: int
) -> Optional[tuple[tuple[float, float], tuple[float, float]]]:
    """Liang-Barsky clip to the pixel-index box with a 1 px margin."""
    t0, t1 = 0.0, 1.0
    dr, dc = q[0] - p[0], q[1] - p[1]
    for start, delta, lo, hi in (
        (p[0], dr, -1.0, float(rows)),
        (p[1], dc, -1.0, float(cols)),
    ):
        if delta == 0.0:
            if start < lo or start > hi:
                return None
            continue
        ta, tb = (lo - start) / delta, (hi - start) / delta
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return (
        (p[0] + t0 * dr, p[1] + t0 * dc),
        (p[0] + t1 * dr, p[1] + t1 * dc),
    )


def _stroke_int(plane: np.ndarray, p: tuple[float, float], q: tuple[float, float]) -> None:
    """1-pixel Bresenham line between image coordinates."""
    clipped = _clip_segment(p, q, plane.shape[0], plane.shape[1])
    if clipped is None:
        return
    (pr, pc), (qr, qc) = clipped
    r, c = round(pr), round(pc)
    r2, c2 = round(qr), round(qc)
    dr = abs(r2 - r)
    dc = -abs(c2 - c)
    sr = 1 if r2 > r else -1
    sc = 1 if c2 > c else -1
    err = dr + dc
    rows, cols = plane.shape
    while True:
        if 0 <= r < rows and 0 <= c < cols:
            plane[r, c] = 255
        if r == r2 and c == c2:
            break
        e2 = 2 * err
        if e2 >= dc:
            err += dc
            r += sr
        if e2 <= dr:
            err += dr
            c += sc


class _EgoFrame:
    """World -> image transform for one ego pose."""

    def __init__(self, world: WorldState, spec: BevSpec):
        self.spec = spec
        ego = world.ego
        self.ox, self.oy = ego.x, ego.y
        self.cos = math.cos(ego.yaw)
        self.sin = math.sin(ego.yaw)
        # farthest pixel center from the anchor, in meters, plus slack
        far_r = max(spec.anchor_row, spec.rows - 1 - spec.anchor_row)
        far_c = max(spec.anchor_col, spec.cols - 1 - spec.anchor_col)
        self.view_radius = math.hypot(far_r, far_c) * spec.resolution + 1.0

    def to_image(self, x: float, y: float) -> tuple[float, float]:
        dx, dy = x - self.ox, y - self.oy
        fwd = dx * self.cos + dy * self.sin
        left = -dx * self.sin + dy * self.cos
        return (
            self.spec.anchor_row - fwd / self.spec.resolution,
            self.spec.anchor_col - left / self.spec.resolution,
        )

    def visible(self, x: float, y: float, radius: float) -> bool:
        return math.hypot(x - self.ox, y - self.oy) <= self.view_radius + radius


def render(world: WorldState, road_map: RoadMap, spec: BevSpec) -> BevFrame:
    """Rasterize the current world into an ego-centric frame."""
    channels = spec.effective_channels
    tensor = np.zeros((spec.rows, spec.cols, len(channels)), dtype=np.uint8)
    frame = _EgoFrame(world, spec)
    plane = {name: tensor[:, :, i] for i, name in enumerate(channels)}

    lanes = [road_map.lanes[i] for i in sorted(road_map.lanes)]
    for lane in lanes:
        half = lane.width / 2.0
        pts = lane.centerline
        img = [frame.to_image(x, y) for x, y in pts]
        for i, (a, b) in enumerate(zip(pts, pts[1:])):
            seg_len = math.hypot(b[0] - a[0], b[1] - a[1])
            mid = ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)
            if not frame.visible(mid[0], mid[1], seg_len / 2.0 + half):
                continue
            ux, uy = (b[0] - a[0]) / seg_len, (b[1] - a[1]) / seg_len
            nx, ny = -uy * half, ux * half
            if "road" in plane:
                quad = [
                    frame.to_image(a[0] + nx, a[1] + ny),
                    frame.to_image(b[0] + nx, b[1] + ny),
                    frame.to_image(b[0] - nx, b[1] - ny),
                    frame.to_image(a[0] - nx, a[1] - ny),
                ]
                _fill_convex(plane["road"], quad)
            if "lanes" in plane:
                _stroke_int(
                    plane["lanes"],
                    frame.to_image(a[0] + nx, a[1] + ny),
                    frame.to_image(b[0] + nx, b[1] + ny),
                )
                _stroke_int(
                    plane["lanes"],
                    frame.to_image(a[0] - nx, a[1] - ny),
                    frame.to_image(b[0] - nx, b[1] - ny),
                )
            if "centerlines" in plane:
                _stroke_int(plane["centerlines"], img[i], img[i + 1])
        if "road" in plane:
            for x, y in pts[1:-1]:
                if frame.visible(x, y, half):
                    _fill_disc(
                        plane["road"], frame.to_image(x, y), half / spec.resolution
                    )

    if "vehicles" in plane:
        for agent in world.agents:
            radius = math.hypot(agent.dims[0], agent.dims[1]) / 2.0
            if not frame.visible(agent.x, agent.y, radius):
                continue
            corners = rectangle_corners(
                agent.x, agent.y, agent.yaw, agent.dims[0], agent.dims[1]
            )
            _fill_convex(plane["vehicles"], [frame.to_image(x, y) for x, y in corners])

    if "ego" in plane:
        ego = world.ego
        hl = ego.dims[0] / 2.0 / spec.resolution
        hw = ego.dims[1] / 2.0 / spec.resolution
        corners = [
            (spec.anchor_row - hl, spec.anchor_col - hw),
            (spec.anchor_row - hl, spec.anchor_col + hw),
            (spec.anchor_row + hl, spec.anchor_col + hw),
            (spec.anchor_row + hl, spec.anchor_col - hw),
        ]
        _fill_convex(plane["ego"], corners)

    if spec.variant is BevVariant.FRONT_ONLY:
        tensor[spec.anchor_row :, :, :] = 0

    return BevFrame(tensor=tensor, channels=channels)


class FrameStack:
    """Ring of the newest ``stack_depth`` frames, concatenated on read;
    until the ring is full, missing slots repeat the oldest frame."""

    def __init__(self, spec: BevSpec):
        self.spec = spec
        self._frames: deque[BevFrame] = deque(maxlen=spec.stack_depth)

    def reset(self) -> None:
        self._frames.clear()

    def push(self, frame: BevFrame) -> None:
        expected = (self.spec.rows, self.spec.cols, self.spec.n_channels)
        if frame.tensor.shape != expected:
            raise ValueError(f"frame shape {frame.tensor.shape} != spec {expected}")
        self._frames.append(frame)

    def view(self) -> np.ndarray:
        if not self._frames:
            raise ValueError("no frames pushed yet")
        frames = list(self._frames)
        pad = self.spec.stack_depth - len(frames)
        ordered = [frames[0]] * pad + frames
        return np.concatenate([f.tensor for f in ordered], axis=2)


def stack(frames: FrameStack, new: BevFrame) -> np.ndarray:
    """Push a frame and return the channel-stacked tensor, oldest first."""
    frames.push(new)
    return frames.view()
