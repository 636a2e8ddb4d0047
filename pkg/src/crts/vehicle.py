"""Ego vehicle dynamics: kinematic bicycle model with PID speed control.

The ego advances in 0.1 s control ticks, each integrated in 10 sub-steps of
0.01 s. Steering commands map to a wheel angle bounded by +-80 deg and a
configurable slew rate; speed commands go through a PID that outputs an
acceleration clamped to [-6, +3] m/s^2. No reverse gear: speed floors at 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

from .tracks import normalize_angle

logger = logging.getLogger(__name__)

CONTROL_DT = 0.1  # seconds per control tick


@dataclass(frozen=True)
class VehicleParams:
    """Physics constants; every key can be overridden via the config file."""

    length: float = 3.83
    width: float = 1.67
    wheelbase: float = 2.41
    max_wheel_angle: float = math.radians(80.0)
    wheel_rate: float = math.radians(60.0)  # rad/s slew limit
    accel_min: float = -6.0
    accel_max: float = 3.0
    pid_kp: float = 1.0
    pid_ki: float = 0.05
    pid_kd: float = 0.0
    pid_integral_limit: float = 2.0
    substeps: int = 10


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    yaw: float
    speed: float
    wheel_angle: float
    dims: tuple[float, float]  # (length, width)
    wheelbase: float


@dataclass(frozen=True)
class Action:
    steer: float  # dimensionless, [-1, 1]
    target_speed: float  # m/s, >= 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.steer) and math.isfinite(self.target_speed)):
            raise ValueError(f"non-finite action ({self.steer}, {self.target_speed})")


def clamp_action(action: Action) -> Action:
    """Clamp out-of-range commands, warning once per offending value."""
    steer = min(1.0, max(-1.0, action.steer))
    target = max(0.0, action.target_speed)
    if steer != action.steer or target != action.target_speed:
        logger.warning(
            "action out of bounds, clamped: steer %.3f -> %.3f, target %.2f -> %.2f",
            action.steer,
            steer,
            action.target_speed,
            target,
        )
        return Action(steer, target)
    return action


@dataclass
class SpeedPid:
    params: VehicleParams
    integral: float = 0.0
    prev_error: float = field(default=0.0)
    primed: bool = False

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = 0.0
        self.primed = False

    def accel(self, speed: float, target: float, dt: float) -> float:
        p = self.params
        error = target - speed
        self.integral = min(
            p.pid_integral_limit, max(-p.pid_integral_limit, self.integral + error * dt)
        )
        derivative = 0.0 if not self.primed else (error - self.prev_error) / dt
        self.prev_error = error
        self.primed = True
        a = p.pid_kp * error + p.pid_ki * self.integral + p.pid_kd * derivative
        return min(p.accel_max, max(p.accel_min, a))


class EgoDynamics:
    """Owns the controller state for one episode's ego vehicle."""

    def __init__(self, params: VehicleParams | None = None):
        self.params = params or VehicleParams()
        self.pid = SpeedPid(self.params)

    def reset(self) -> None:
        self.pid.reset()

    def initial_state(self, x: float, y: float, yaw: float, speed: float) -> EgoState:
        p = self.params
        return EgoState(
            x=x,
            y=y,
            yaw=yaw,
            speed=speed,
            wheel_angle=0.0,
            dims=(p.length, p.width),
            wheelbase=p.wheelbase,
        )

    def step(self, state: EgoState, action: Action, dt: float = CONTROL_DT) -> EgoState:
        """One 0.1 s tick of bicycle-model integration.

        The PID acceleration is computed once per tick and held; the wheel
        angle slews toward steer * 80 deg during the sub-steps.
        """
        p = self.params
        action = clamp_action(action)
        target_wheel = action.steer * p.max_wheel_angle
        a = self.pid.accel(state.speed, action.target_speed, dt)

        x, y, yaw = state.x, state.y, state.yaw
        v = state.speed
        wheel = state.wheel_angle
        h = dt / p.substeps
        max_slew = p.wheel_rate * h
        for _ in range(p.substeps):
            delta = target_wheel - wheel
            wheel += min(max_slew, max(-max_slew, delta))
            x += v * math.cos(yaw) * h
            y += v * math.sin(yaw) * h
            yaw += v * math.tan(wheel) / p.wheelbase * h
            v = max(0.0, v + a * h)
        return replace(
            state,
            x=x,
            y=y,
            yaw=normalize_angle(yaw),
            speed=v,
            wheel_angle=wheel,
        )
