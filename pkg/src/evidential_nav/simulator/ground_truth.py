"""
Ground-truth traversability, standing in for a physics engine.

Traction falls off with the 1.5 power of the normalized grade (and vegetation
height), so the linear physics prior is informative but biased. Roll and pitch
come from a plane fit through the four wheel contacts.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, Field

from evidential_nav.simulator.robot import RobotParams, RobotState, TraversabilitySample, sample_wheel_contacts
from evidential_nav.utils.errors import DomainError

MEAN_FLOOR = 0.01
MEAN_CEIL = 0.99


class GroundTruthConfig(BaseModel):
    true_s_max_linear: float = Field(default=float(np.tan(np.radians(35.0))), gt=0)
    true_s_max_angular: float = Field(default=float(np.tan(np.radians(20.0))), gt=0)
    true_h_max: float = Field(default=0.25, gt=0)
    exponent: float = Field(default=1.5, gt=0)
    concentration: float = Field(default=20.0, gt=0)
    attitude_noise_std: float = Field(default=0.005, ge=0)
    noise: bool = True


def _law(values: np.ndarray, max_value: float, exponent: float) -> np.ndarray:
    normalized = np.clip(np.asarray(values) / max_value, 0.0, 1.0)
    return 1.0 - np.mean(normalized ** exponent, axis=-1)


def traction_mean_law(slopes, veg_heights, veg_ratio, true_s_max: float, cfg: GroundTruthConfig) -> np.ndarray:
    """Mean traction for per-wheel grades and vegetation heights of shape (..., 4).

    Vegetation scales the dirt traction down in proportion to the vegetated share.
    """
    dirt = _law(slopes, true_s_max, cfg.exponent)
    veg = _law(veg_heights, cfg.true_h_max, cfg.exponent)
    ratio = np.asarray(veg_ratio, dtype=np.float64)
    return np.clip(dirt * ((1.0 - ratio) + ratio * veg), MEAN_FLOOR, MEAN_CEIL)


def attitude_law(heights, params: RobotParams) -> tuple[np.ndarray, np.ndarray]:
    """Signed (roll, pitch) of the plane through the FL, RL, RR, FR contact heights."""
    heights = np.asarray(heights, dtype=np.float64)
    fl, rl, rr, fr = (heights[..., k] for k in range(4))
    roll = np.arctan(0.5 * ((fl + rl) - (fr + rr)) / params.track)
    pitch = np.arctan(0.5 * ((fl + fr) - (rl + rr)) / params.wheelbase)
    return roll, pitch


def ground_truth_batch(terrain, xs, ys, yaws, params: RobotParams, cfg: GroundTruthConfig,
                       rng: np.random.Generator | None) -> np.ndarray:
    """Traversability samples of shape (N, 4) for N poses."""
    contacts = sample_wheel_contacts(terrain, xs, ys, yaws, params)
    psi1 = traction_mean_law(contacts.slopes, contacts.veg_heights, contacts.veg_ratio, cfg.true_s_max_linear, cfg)
    psi2 = traction_mean_law(contacts.slopes, contacts.veg_heights, contacts.veg_ratio, cfg.true_s_max_angular, cfg)
    roll, pitch = attitude_law(contacts.heights, params)
    if cfg.noise and rng is not None:
        c = cfg.concentration
        psi1 = rng.beta(c * psi1, c * (1.0 - psi1))
        psi2 = rng.beta(c * psi2, c * (1.0 - psi2))
        roll = roll + rng.normal(0.0, cfg.attitude_noise_std, size=roll.shape)
        pitch = pitch + rng.normal(0.0, cfg.attitude_noise_std, size=pitch.shape)
    return np.stack([psi1, psi2, np.abs(roll), np.abs(pitch)], axis=-1)


def ground_truth_traversability(terrain, state: RobotState, params: RobotParams, rng: np.random.Generator | None,
                                cfg: GroundTruthConfig | None = None) -> TraversabilitySample:
    if not bool(terrain.contains(state.x, state.y)):
        raise DomainError(f"State ({state.x:.3f}, {state.y:.3f}) lies outside the map")
    values = ground_truth_batch(terrain, [state.x], [state.y], [state.yaw], params, cfg or GroundTruthConfig(), rng)
    return TraversabilitySample.from_array(values[0])
