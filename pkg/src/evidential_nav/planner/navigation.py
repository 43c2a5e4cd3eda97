"""
Closed-loop navigation trials.

The planner sees only a `CvarMapStack`; the executed motion uses sampled
ground-truth traversability through the same `bicycle_update` the rollouts
use. A trial ends on reaching the goal, a true roll or pitch above the limit,
immobilization, leaving the map, or the step cap.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from evidential_nav.planner.mppi import PlannerConfig, initial_nominal, mppi_plan, shift_nominal
from evidential_nav.predictor.cvar_maps import CvarMapStack
from evidential_nav.simulator.ground_truth import GroundTruthConfig, ground_truth_batch
from evidential_nav.simulator.robot import RobotParams, RobotState, bicycle_update
from evidential_nav.utils.errors import DomainError

logger = logging.getLogger(__name__)

OUTCOMES = ("goal", "rollover", "stuck", "out_of_bounds", "timeout")


@dataclass(frozen=True)
class GoalPair:
    start: RobotState
    goal: tuple[float, float]


@dataclass(frozen=True)
class EpisodeLog:
    method: str
    alpha: float
    map_id: int
    pair_id: int
    seed: int
    outcome: str
    steps: int
    path_length: float
    time_to_goal: float

    @property
    def success(self) -> bool:
        return self.outcome == "goal"

    def as_dict(self) -> dict:
        return asdict(self)


def sample_goal_pairs(terrain, n_pairs: int, distance: float, rng: np.random.Generator,
                      margin: float = 2.0, max_tries: int = 1000) -> list[GoalPair]:
    """Start-goal pairs `distance` apart, both at least `margin` from the map edge.

    The start heading points at the goal.
    """
    width, height = terrain.extent
    if distance > np.hypot(width - 2 * margin, height - 2 * margin):
        raise DomainError(f"A {distance} m start-goal distance does not fit a {width} x {height} m map")
    pairs = []
    for _ in range(n_pairs):
        for _ in range(max_tries):
            sx, sy = rng.uniform(margin, width - margin), rng.uniform(margin, height - margin)
            heading = rng.uniform(-np.pi, np.pi)
            gx, gy = sx + distance * np.cos(heading), sy + distance * np.sin(heading)
            if margin <= gx <= width - margin and margin <= gy <= height - margin:
                pairs.append(GoalPair(RobotState(float(sx), float(sy), float(heading)), (float(gx), float(gy))))
                break
        else:
            raise DomainError(f"Could not place a start-goal pair {distance} m apart after {max_tries} tries")
    return pairs


def _run_trial(terrain, maps: CvarMapStack, pair: GoalPair, cfg: PlannerConfig, robot: RobotParams,
               gt_cfg: GroundTruthConfig, rng: np.random.Generator) -> tuple[str, int, float]:
    x, y, yaw = pair.start.x, pair.start.y, pair.start.yaw
    gx, gy = pair.goal
    if np.hypot(x - gx, y - gy) <= cfg.goal_radius:
        return "goal", 0, 0.0

    nominal = initial_nominal(cfg)
    path_length = 0.0
    stuck_count = 0
    since_plan = cfg.replan_every
    for step in range(cfg.max_steps):
        if since_plan >= cfg.replan_every:
            plan = mppi_plan(RobotState(x, y, yaw), pair.goal, maps, nominal, cfg, rng, robot)
            nominal = plan.controls
            since_plan = 0
        speed, steer = nominal[0]
        nominal = shift_nominal(nominal)
        since_plan += 1

        psi = ground_truth_batch(terrain, [x], [y], [yaw], robot, gt_cfg, rng)[0]
        if psi[2] > cfg.roll_limit or psi[3] > cfg.pitch_limit:
            return "rollover", step, path_length
        stuck_count = stuck_count + 1 if psi[0] < cfg.stuck_traction else 0
        if stuck_count >= cfg.stuck_steps:
            return "stuck", step, path_length

        nx, ny, yaw = bicycle_update(x, y, yaw, speed, steer, psi[0], psi[1], robot.wheelbase, robot.dt)
        path_length += float(np.hypot(nx - x, ny - y))
        x, y, yaw = float(nx), float(ny), float(yaw)
        if not bool(terrain.contains(x, y)):
            return "out_of_bounds", step + 1, path_length
        if np.hypot(x - gx, y - gy) <= cfg.goal_radius:
            return "goal", step + 1, path_length
    return "timeout", cfg.max_steps, path_length


def run_navigation(terrain, maps: CvarMapStack, pairs: list[GoalPair], cfg: PlannerConfig, seed: int,
                   robot: RobotParams | None = None, gt_cfg: GroundTruthConfig | None = None,
                   method: str = "", map_id: int = 0) -> list[EpisodeLog]:
    """One trial per pair; trial k always draws from the k-th child of `seed`."""
    robot = robot or RobotParams()
    gt_cfg = gt_cfg or GroundTruthConfig()
    children = np.random.SeedSequence(seed).spawn(len(pairs))
    logs = []
    for pair_id, (pair, child) in enumerate(zip(pairs, children)):
        outcome, steps, path_length = _run_trial(terrain, maps, pair, cfg, robot, gt_cfg, np.random.default_rng(child))
        time_to_goal = steps * robot.dt if outcome == "goal" else float("nan")
        logs.append(EpisodeLog(method or maps.method, cfg.alpha, map_id, pair_id, seed, outcome, steps,
                               path_length, time_to_goal))
        logger.debug("%s alpha=%.2f map %d pair %d: %s after %d steps", method or maps.method, cfg.alpha,
                     map_id, pair_id, outcome, steps)
    return logs
