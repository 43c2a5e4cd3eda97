"""
CVaR look-up maps for planning.

Every cell center is evaluated at `n_yaw` headings; bin k holds heading
k * 2*pi / n_yaw and a query snaps to the nearest bin. Traction stores the
left-tail CVaR, roll and pitch the right-tail CVaR.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from evidential_nav.distributions import PARAMS, tail_cvar_array
from evidential_nav.predictor.features import FeatureConfig, extract_features_batch
from evidential_nav.predictor.methods import TraversabilityModel
from evidential_nav.simulator.robot import RobotParams
from evidential_nav.utils.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass
class CvarMapStack:
    values: np.ndarray          # (H, W, n_yaw, 4)
    ood: np.ndarray             # (H, W, n_yaw) bool
    resolution: float
    alpha: float
    method: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.ood = np.asarray(self.ood, dtype=bool)
        if self.values.ndim != 4 or self.values.shape[-1] != len(PARAMS):
            raise DomainError(f"CVaR values must have shape (H, W, n_yaw, 4), got {self.values.shape}")
        if self.ood.shape != self.values.shape[:3]:
            raise DomainError(f"OOD mask shape {self.ood.shape} does not match {self.values.shape[:3]}")
        if self.resolution <= 0:
            raise DomainError(f"Map resolution must be positive, got {self.resolution}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @property
    def n_yaw(self) -> int:
        return self.values.shape[2]

    @property
    def extent(self) -> tuple[float, float]:
        rows, cols = self.shape
        return cols * self.resolution, rows * self.resolution

    def yaw_bin(self, yaws) -> np.ndarray:
        step = 2.0 * np.pi / self.n_yaw
        return np.mod(np.round(np.asarray(yaws, dtype=np.float64) / step), self.n_yaw).astype(np.int64)

    def contains(self, x, y) -> np.ndarray:
        width, height = self.extent
        x, y = np.asarray(x), np.asarray(y)
        return (x >= 0) & (x < width) & (y >= 0) & (y < height)

    def lookup(self, xs, ys, yaws) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CVaR values (..., 4), OOD flags and in-bounds flags at world poses.

        Off-map poses read the nearest edge cell; callers decide how to treat them
        through the in-bounds flags.
        """
        xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
        rows, cols = self.shape
        i = np.clip(np.floor(ys / self.resolution).astype(np.int64), 0, rows - 1)
        j = np.clip(np.floor(xs / self.resolution).astype(np.int64), 0, cols - 1)
        k = self.yaw_bin(yaws)
        return self.values[i, j, k], self.ood[i, j, k], self.contains(xs, ys)

    @classmethod
    def constant(cls, shape: tuple[int, int], resolution: float, psi, n_yaw: int = 8,
                 alpha: float = 1.0, method: str = "constant") -> "CvarMapStack":
        """A stack holding the same four values everywhere."""
        values = np.broadcast_to(np.asarray(psi, dtype=np.float64), (*shape, n_yaw, len(PARAMS))).copy()
        return cls(values, np.zeros((*shape, n_yaw), dtype=bool), resolution, alpha, method)


@dataclass
class GridPrediction:
    """Expected PMFs (H, W, n_yaw, 4, B) and OOD flags (H, W, n_yaw) over a whole map."""

    expected: np.ndarray
    ood: np.ndarray
    resolution: float
    method: str


def _predict_chunk(terrain, model: TraversabilityModel, robot: RobotParams, feat_cfg: FeatureConfig,
                   xs: np.ndarray, ys: np.ndarray, yaws: np.ndarray):
    prediction = model.predict(extract_features_batch(terrain, xs, ys, yaws, robot, feat_cfg))
    return prediction.expected, prediction.ood


def predict_grid(terrain, model: TraversabilityModel, n_yaw: int = 8, robot: RobotParams | None = None,
                 feat_cfg: FeatureConfig | None = None, chunk_size: int = 4096, n_workers: int = 1) -> GridPrediction:
    """Evaluate `model` at every cell and yaw bin of `terrain`.

    Chunks run on a thread pool over the frozen model; results are assembled
    in submission order so the output does not depend on scheduling.
    """
    if n_yaw < 1:
        raise DomainError(f"n_yaw must be >= 1, got {n_yaw}")
    robot = robot or RobotParams()
    feat_cfg = feat_cfg or FeatureConfig()
    rows, cols = terrain.shape
    cx, cy = terrain.cell_centers()
    xs = np.repeat(cx.ravel(), n_yaw)
    ys = np.repeat(cy.ravel(), n_yaw)
    yaws = np.tile(np.arange(n_yaw) * 2.0 * np.pi / n_yaw, rows * cols)

    jobs = [(xs[s:s + chunk_size], ys[s:s + chunk_size], yaws[s:s + chunk_size])
            for s in range(0, len(xs), chunk_size)]
    if n_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda job: _predict_chunk(terrain, model, robot, feat_cfg, *job), jobs))
    else:
        results = [_predict_chunk(terrain, model, robot, feat_cfg, *job) for job in jobs]

    expected = np.concatenate([r[0] for r in results]).reshape(rows, cols, n_yaw, len(PARAMS), -1)
    ood = np.concatenate([r[1] for r in results]).reshape(rows, cols, n_yaw)
    return GridPrediction(expected, ood, terrain.resolution, model.spec.name)


def cvar_stack(prediction: GridPrediction, discs, alpha: float) -> CvarMapStack:
    values = np.stack([
        tail_cvar_array(prediction.expected[..., p, :], discs[p].bin_centers, alpha, p) for p in PARAMS
    ], axis=-1)
    return CvarMapStack(values, prediction.ood, prediction.resolution, alpha, prediction.method)


def build_cvar_maps(terrain, model: TraversabilityModel, alpha: float, n_yaw: int = 8,
                    robot: RobotParams | None = None, feat_cfg: FeatureConfig | None = None,
                    chunk_size: int = 4096, n_workers: int = 1) -> CvarMapStack:
    """Left-tail CVaR traction and right-tail CVaR roll/pitch for every cell and yaw bin."""
    stack = cvar_stack(predict_grid(terrain, model, n_yaw, robot, feat_cfg, chunk_size, n_workers),
                       model.discs, alpha)
    rows, cols = terrain.shape
    logger.info("Built %s CVaR maps at alpha=%.2f: %dx%dx%d, %.1f%% OOD", model.spec.name, alpha,
                rows, cols, n_yaw, 100.0 * stack.ood.mean())
    return stack
