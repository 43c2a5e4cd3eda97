"""
CVaR-constrained MPPI.

Rollouts step the traction-scaled bicycle with the left-tail CVaR traction
looked up from a `CvarMapStack`, and pay a penalty whenever the right-tail
CVaR roll or pitch exceeds its limit. Costs are in steps:

    cost = arrival step                                  if the goal radius is reached
         = T + terminal distance / (max_speed * dt)      otherwise
         + penalty_weight * sum_t [excess roll + excess pitch]
         + out_of_bounds_penalty                          once, when a rollout leaves the map
         + ood_weight * number of OOD look-ups            when OOD avoidance is on

A rollout freezes once it arrives or leaves the map.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from evidential_nav.predictor.cvar_maps import CvarMapStack
from evidential_nav.simulator.robot import RobotParams, RobotState, bicycle_update
from evidential_nav.utils.errors import DomainError

logger = logging.getLogger(__name__)


class PlannerConfig(BaseModel):
    horizon: int = Field(default=50, ge=1)
    n_rollouts: int = Field(default=1024, ge=1)
    n_iterations: int = Field(default=1, ge=1)
    temperature: float = Field(default=1.0, gt=0)
    noise_std_speed: float = Field(default=0.3, ge=0)
    noise_std_steer: float = Field(default=0.2, ge=0)
    alpha: float = Field(default=0.6, gt=0, le=1)
    max_speed: float = Field(default=1.0, gt=0)
    max_steer: float = Field(default=float(np.radians(30.0)), gt=0, lt=np.pi / 2)
    roll_limit: float = Field(default=float(np.radians(30.0)), gt=0)
    pitch_limit: float = Field(default=float(np.radians(30.0)), gt=0)
    penalty_weight: float = Field(default=100.0, ge=0, description="10^3 * dt at dt = 0.1 s")
    out_of_bounds_penalty: float = Field(default=1000.0, ge=0)
    goal_radius: float = Field(default=1.0, gt=0)
    avoid_ood: bool = False
    ood_weight: float = Field(default=10.0, ge=0)
    replan_every: int = Field(default=1, ge=1)
    max_steps: int = Field(default=300, ge=1)
    stuck_traction: float = Field(default=0.05, ge=0)
    stuck_steps: int = Field(default=10, ge=1)
    n_yaw: int = Field(default=8, ge=1)
    chunk_size: int = Field(default=256, ge=1)
    n_workers: int = Field(default=1, ge=1)


@dataclass
class PlanResult:
    controls: np.ndarray        # (T, 2) speed, steer
    states: np.ndarray          # (T + 1, 3) x, y, yaw
    cost: float
    violation: bool
    best_states: np.ndarray | None = None
    best_cost: float = float("inf")
    sample_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))


def clamp_controls(controls: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    out = np.array(controls, dtype=np.float64, copy=True)
    out[..., 0] = np.clip(out[..., 0], 0.0, cfg.max_speed)
    out[..., 1] = np.clip(out[..., 1], -cfg.max_steer, cfg.max_steer)
    return out


def initial_nominal(cfg: PlannerConfig) -> np.ndarray:
    """Full speed, straight ahead."""
    nominal = np.zeros((cfg.horizon, 2))
    nominal[:, 0] = cfg.max_speed
    return nominal


def shift_nominal(controls: np.ndarray, steps: int = 1) -> np.ndarray:
    """Warm start for the next replan: drop the executed controls, repeat the last one."""
    steps = min(steps, len(controls))
    return np.concatenate([controls[steps:], np.repeat(controls[-1:], steps, axis=0)])


def softmin_weights(costs: np.ndarray, temperature: float) -> np.ndarray:
    """exp(-(c - min c) / temperature), normalized; non-finite costs get zero weight."""
    costs = np.asarray(costs, dtype=np.float64)
    finite = np.isfinite(costs)
    if not finite.any():
        return np.full(costs.shape, 1.0 / costs.size)
    shifted = np.where(finite, costs - costs[finite].min(), 0.0)
    weights = np.where(finite, np.exp(-shifted / temperature), 0.0)
    return weights / weights.sum()


def rollout_costs(controls: np.ndarray, start: RobotState, maps: CvarMapStack, goal, cfg: PlannerConfig,
                  robot: RobotParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Costs (K,), states (K, T + 1, 3) and violation flags (K,) for controls (K, T, 2)."""
    if not bool(maps.contains(start.x, start.y)):
        raise DomainError(f"Start ({start.x:.3f}, {start.y:.3f}) lies outside the CVaR maps")
    controls = np.asarray(controls, dtype=np.float64)
    n_samples, horizon = controls.shape[:2]
    gx, gy = float(goal[0]), float(goal[1])

    x = np.full(n_samples, start.x)
    y = np.full(n_samples, start.y)
    yaw = np.full(n_samples, start.yaw)
    states = np.empty((n_samples, horizon + 1, 3))
    states[:, 0] = start.as_array()

    arrival = np.full(n_samples, -1, dtype=np.int64)
    arrival[np.hypot(x - gx, y - gy) <= cfg.goal_radius] = 0
    active = arrival < 0
    penalty = np.zeros(n_samples)
    ood_count = np.zeros(n_samples)
    violation = np.zeros(n_samples, dtype=bool)
    left_map = np.zeros(n_samples, dtype=bool)

    for t in range(horizon):
        psi, ood, _ = maps.lookup(x, y, yaw)
        excess = np.maximum(psi[:, 2] - cfg.roll_limit, 0.0) + np.maximum(psi[:, 3] - cfg.pitch_limit, 0.0)
        penalty += np.where(active, excess, 0.0)
        violation |= active & (excess > 0)
        if cfg.avoid_ood:
            ood_count += active & ood

        nx, ny, nyaw = bicycle_update(x, y, yaw, controls[:, t, 0], controls[:, t, 1],
                                      psi[:, 0], psi[:, 1], robot.wheelbase, robot.dt)
        x, y, yaw = np.where(active, nx, x), np.where(active, ny, y), np.where(active, nyaw, yaw)
        states[:, t + 1, 0], states[:, t + 1, 1], states[:, t + 1, 2] = x, y, yaw

        exited = active & ~maps.contains(x, y)
        left_map |= exited
        arrived = active & ~exited & (np.hypot(x - gx, y - gy) <= cfg.goal_radius)
        arrival[arrived] = t + 1
        active &= ~(exited | arrived)

    distance = np.hypot(x - gx, y - gy)
    time_cost = np.where(arrival >= 0, arrival, horizon + distance / (cfg.max_speed * robot.dt))
    costs = (time_cost + cfg.penalty_weight * penalty + cfg.out_of_bounds_penalty * left_map
             + cfg.ood_weight * ood_count)
    return costs, states, violation


def rollout_cost(controls: np.ndarray, start: RobotState, maps: CvarMapStack, goal, cfg: PlannerConfig,
                 robot: RobotParams | None = None) -> tuple[float, np.ndarray]:
    """Cost and states (T + 1, 3) of a single control sequence (T, 2)."""
    costs, states, _ = rollout_costs(np.asarray(controls)[None], start, maps, goal, cfg, robot or RobotParams())
    return float(costs[0]), states[0]


def _evaluate(samples, start, maps, goal, cfg, robot):
    if cfg.n_workers <= 1 or len(samples) <= cfg.chunk_size:
        return rollout_costs(samples, start, maps, goal, cfg, robot)
    chunks = [samples[s:s + cfg.chunk_size] for s in range(0, len(samples), cfg.chunk_size)]
    with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
        parts = list(pool.map(lambda c: rollout_costs(c, start, maps, goal, cfg, robot), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def mppi_plan(start: RobotState, goal, maps: CvarMapStack, nominal: np.ndarray | None, cfg: PlannerConfig,
              rng: np.random.Generator, robot: RobotParams | None = None) -> PlanResult:
    """Improve `nominal` by softmin-weighted averaging of perturbed rollouts.

    Sample 0 of every iteration is the unperturbed nominal. All noise is drawn
    before the rollouts are dispatched, so results depend only on the rng.
    """
    robot = robot or RobotParams()
    nominal = clamp_controls(initial_nominal(cfg) if nominal is None else nominal, cfg)
    std = np.array([cfg.noise_std_speed, cfg.noise_std_steer])
    best_cost, best_states = float("inf"), None
    costs = np.zeros(0)
    for _ in range(cfg.n_iterations):
        noise = rng.normal(size=(cfg.n_rollouts, *nominal.shape)) * std
        noise[0] = 0.0
        samples = clamp_controls(nominal[None] + noise, cfg)
        costs, states, _ = _evaluate(samples, start, maps, goal, cfg, robot)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost, best_states = float(costs[k]), states[k]
        weights = softmin_weights(costs, cfg.temperature)
        nominal = clamp_controls(np.tensordot(weights, samples, axes=1), cfg)

    final_costs, final_states, final_violation = rollout_costs(nominal[None], start, maps, goal, cfg, robot)
    logger.debug("MPPI plan cost %.3f (best sample %.3f)", final_costs[0], best_cost)
    return PlanResult(
        controls=nominal,
        states=final_states[0],
        cost=float(final_costs[0]),
        violation=bool(final_violation[0]),
        best_states=best_states,
        best_cost=best_cost,
        sample_costs=costs,
    )
