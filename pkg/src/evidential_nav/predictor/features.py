"""
Yaw-aligned terrain features.

A feature is a P x P patch of elevation (mean-centered), vegetation indicator
and vegetation height sampled on a square lattice centered on the robot and
rotated to its heading (row index runs forward, column index runs left), plus
the wheel footprint the physics prior needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from evidential_nav.distributions import Discretization, TraversabilityParam
from evidential_nav.physics_prior import FootprintSample, PriorConfig, physics_prior_array
from evidential_nav.simulator.robot import RobotParams, RobotState, body_to_world, sample_wheel_contacts
from evidential_nav.utils.errors import DomainError


class FeatureConfig(BaseModel):
    patch_size_m: float = Field(default=2.0, gt=0)
    patch_cells: int = Field(default=8, ge=2)

    @property
    def input_dim(self) -> int:
        return 3 * self.patch_cells ** 2


@dataclass(frozen=True)
class TerrainFeature:
    elevation_patch: np.ndarray
    semantic_patch: np.ndarray
    veg_patch: np.ndarray
    footprint: FootprintSample
    yaw: float

    @property
    def unevenness(self) -> float:
        return float(np.std(self.elevation_patch))

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.elevation_patch.ravel(), self.semantic_patch.ravel(), self.veg_patch.ravel()])


@dataclass
class FeatureBatch:
    """N features stored as stacked arrays."""

    elevation: np.ndarray
    semantic: np.ndarray
    veg: np.ndarray
    slopes: np.ndarray
    heights: np.ndarray
    veg_heights: np.ndarray
    roll_distances: np.ndarray
    pitch_distances: np.ndarray
    veg_ratio: np.ndarray
    yaw: np.ndarray

    def __len__(self) -> int:
        return len(self.yaw)

    @property
    def unevenness(self) -> np.ndarray:
        return self.elevation.reshape(len(self), -1).std(axis=1)

    def inputs(self) -> np.ndarray:
        n = len(self)
        return np.concatenate([self.elevation.reshape(n, -1), self.semantic.reshape(n, -1),
                               self.veg.reshape(n, -1)], axis=1)

    def prior_masses(self, param: TraversabilityParam, cfg: PriorConfig, disc: Discretization) -> np.ndarray:
        return physics_prior_array(self.slopes, self.heights, self.veg_heights, self.roll_distances,
                                   self.pitch_distances, self.veg_ratio, param, cfg, disc)

    def all_prior_masses(self, cfg: PriorConfig, discs: dict) -> np.ndarray:
        """Physics priors of shape (N, 4, B)."""
        return np.stack([self.prior_masses(p, cfg, discs[p]) for p in TraversabilityParam], axis=1)

    def subset(self, index) -> "FeatureBatch":
        return FeatureBatch(**{name: getattr(self, name)[index] for name in _FIELDS})

    def feature(self, k: int) -> TerrainFeature:
        footprint = FootprintSample(
            wheel_slopes=self.slopes[k],
            wheel_heights=self.heights[k],
            veg_heights=self.veg_heights[k],
            roll_distances=self.roll_distances[k],
            pitch_distances=self.pitch_distances[k],
            semantic_ratios={"dirt": 1.0 - float(self.veg_ratio[k]), "veg": float(self.veg_ratio[k])},
        )
        return TerrainFeature(self.elevation[k], self.semantic[k], self.veg[k], footprint, float(self.yaw[k]))

    @classmethod
    def from_features(cls, features: list[TerrainFeature]) -> "FeatureBatch":
        if not features:
            raise DomainError("Cannot build a feature batch from an empty list")
        return cls(
            elevation=np.stack([f.elevation_patch for f in features]),
            semantic=np.stack([f.semantic_patch for f in features]),
            veg=np.stack([f.veg_patch for f in features]),
            slopes=np.stack([f.footprint.wheel_slopes for f in features]),
            heights=np.stack([f.footprint.wheel_heights for f in features]),
            veg_heights=np.stack([f.footprint.veg_heights for f in features]),
            roll_distances=np.stack([f.footprint.roll_distances for f in features]),
            pitch_distances=np.stack([f.footprint.pitch_distances for f in features]),
            veg_ratio=np.array([f.footprint.veg_ratio for f in features]),
            yaw=np.array([f.yaw for f in features]),
        )


_FIELDS = tuple(FeatureBatch.__dataclass_fields__)


def patch_offsets(cfg: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    """Body-frame (forward, left) lattice offsets, each of shape (P*P,)."""
    ticks = ((np.arange(cfg.patch_cells) + 0.5) / cfg.patch_cells - 0.5) * cfg.patch_size_m
    forward, left = np.meshgrid(ticks, ticks, indexing="ij")
    return forward.ravel(), left.ravel()


def extract_features_batch(terrain, xs, ys, yaws, params: RobotParams, cfg: FeatureConfig) -> FeatureBatch:
    xs, ys, yaws = (np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (xs, ys, yaws))
    n, p = len(xs), cfg.patch_cells
    forward, left = patch_offsets(cfg)
    px, py = body_to_world(xs, ys, yaws, forward, left)
    elevation = terrain.elevation_at(px, py)
    elevation = elevation - elevation.mean(axis=1, keepdims=True)
    semantic = terrain.semantic_at(px, py).astype(np.float64)
    veg = terrain.veg_height_at(px, py)
    contacts = sample_wheel_contacts(terrain, xs, ys, yaws, params)
    return FeatureBatch(
        elevation=elevation.reshape(n, p, p),
        semantic=semantic.reshape(n, p, p),
        veg=veg.reshape(n, p, p),
        slopes=contacts.slopes,
        heights=contacts.heights,
        veg_heights=contacts.veg_heights,
        roll_distances=np.tile(params.roll_distances(), (n, 1)),
        pitch_distances=np.tile(params.pitch_distances(), (n, 1)),
        veg_ratio=contacts.veg_ratio,
        yaw=yaws,
    )


def extract_feature(terrain, pose: RobotState, params: RobotParams, cfg: FeatureConfig | None = None) -> TerrainFeature:
    if not bool(terrain.contains(pose.x, pose.y)):
        raise DomainError(f"Pose ({pose.x:.3f}, {pose.y:.3f}) lies outside the map")
    batch = extract_features_batch(terrain, [pose.x], [pose.y], [pose.yaw], params, cfg or FeatureConfig())
    return batch.feature(0)
