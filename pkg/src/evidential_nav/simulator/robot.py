"""
Robot geometry and the traction-scaled kinematic bicycle.

`bicycle_update` is the only implementation of the motion model; the
simulator, the episode collector and the planner rollouts all call it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

MAX_ABS_STEER = np.pi / 2 - 1e-3


class RobotParams(BaseModel):
    wheelbase: float = Field(default=1.5, gt=0)
    track: float = Field(default=1.0, gt=0)
    dt: float = Field(default=0.1, gt=0)
    max_speed: float = Field(default=2.0, gt=0)
    max_steer: float = Field(default=float(np.radians(30.0)), gt=0, lt=np.pi / 2)

    def wheel_offsets(self) -> np.ndarray:
        """Body-frame wheel positions (forward, left): FL, RL, RR, FR."""
        half_l, half_t = 0.5 * self.wheelbase, 0.5 * self.track
        return np.array([[half_l, half_t], [-half_l, half_t], [-half_l, -half_t], [half_l, -half_t]])

    def roll_distances(self) -> np.ndarray:
        return np.array([self.track, self.track])

    def pitch_distances(self) -> np.ndarray:
        return np.array([self.wheelbase, self.wheelbase])


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    yaw: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


@dataclass(frozen=True)
class ControlInput:
    speed: float
    steer: float

    def clamped(self, params: RobotParams) -> "ControlInput":
        return ControlInput(float(np.clip(self.speed, 0.0, params.max_speed)),
                            float(np.clip(self.steer, -params.max_steer, params.max_steer)))


@dataclass(frozen=True)
class TraversabilitySample:
    """Linear traction, angular traction, absolute roll and absolute pitch (rad)."""

    psi1: float
    psi2: float
    psi3: float
    psi4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.psi1, self.psi2, self.psi3, self.psi4])

    @classmethod
    def from_array(cls, values) -> "TraversabilitySample":
        return cls(*(float(v) for v in values))


def bicycle_update(x, y, yaw, speed, steer, psi1, psi2, wheelbase: float, dt: float):
    """One traction-scaled bicycle step; broadcasts over array inputs."""
    steer = np.clip(steer, -MAX_ABS_STEER, MAX_ABS_STEER)
    linear = dt * psi1 * speed
    return (
        x + linear * np.cos(yaw),
        y + linear * np.sin(yaw),
        yaw + dt * psi2 * speed * np.tan(steer) / wheelbase,
    )


def step_bicycle(state: RobotState, control: ControlInput, psi: TraversabilitySample,
                 params: RobotParams) -> RobotState:
    x, y, yaw = bicycle_update(state.x, state.y, state.yaw, control.speed, control.steer,
                               psi.psi1, psi.psi2, params.wheelbase, params.dt)
    return RobotState(float(x), float(y), float(yaw))


def body_to_world(xs, ys, yaws, forward, left):
    """World coordinates of body-frame offsets; poses (N,), offsets (M,) -> (N, M)."""
    xs, ys, yaws = (np.asarray(a, dtype=np.float64)[..., None] for a in (xs, ys, yaws))
    cos, sin = np.cos(yaws), np.sin(yaws)
    return xs + forward * cos - left * sin, ys + forward * sin + left * cos


@dataclass
class WheelContacts:
    """Terrain under each wheel for N poses; per-wheel arrays are (N, 4)."""

    heights: np.ndarray
    slopes: np.ndarray
    veg_heights: np.ndarray
    veg_ratio: np.ndarray


def sample_wheel_contacts(terrain, xs, ys, yaws, params: RobotParams, grid: int = 5) -> WheelContacts:
    """Heights, absolute heading-aligned grades and vegetation under the wheels.

    The vegetation ratio is the vegetated share of a grid x grid lattice over the
    vehicle rectangle.
    """
    xs, ys, yaws = (np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (xs, ys, yaws))
    offsets = params.wheel_offsets()
    wx, wy = body_to_world(xs, ys, yaws, offsets[:, 0], offsets[:, 1])
    gx, gy = terrain.slope_at(wx, wy)
    grade = np.abs(gx * np.cos(yaws)[:, None] + gy * np.sin(yaws)[:, None])

    fwd = np.linspace(-0.5, 0.5, grid) * params.wheelbase
    lat = np.linspace(-0.5, 0.5, grid) * params.track
    ff, ll = np.meshgrid(fwd, lat, indexing="ij")
    fx, fy = body_to_world(xs, ys, yaws, ff.ravel(), ll.ravel())
    veg_ratio = terrain.semantic_at(fx, fy).mean(axis=1)

    return WheelContacts(
        heights=terrain.elevation_at(wx, wy),
        slopes=grade,
        veg_heights=terrain.veg_height_at(wx, wy),
        veg_ratio=veg_ratio.astype(np.float64),
    )
