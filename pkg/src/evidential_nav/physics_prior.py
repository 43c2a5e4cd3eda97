"""
Closed-form physics priors over traversability PMFs.

Traction priors drop linearly with the absolute wheel grade (dirt) or the
vegetation height under each wheel (veg); roll and pitch priors come from the
height difference between wheel pairs. Each wheel contributes a one-hot vote
and the votes are averaged, so a prior has at most four nonzero bins before it
is mixed with the uniform PMF.

Wheels are numbered 1 = front-left, 2 = rear-left, 3 = rear-right and
4 = front-right (0-based indices 0..3 below). Roll pairs run across the track,
pitch pairs along the wheelbase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from evidential_nav.distributions import (
    Discretization,
    Pmf,
    TraversabilityParam,
    one_hot_array,
)
from evidential_nav.utils.errors import DomainError

ROLL_PAIRS = ((0, 3), (1, 2))
PITCH_PAIRS = ((0, 1), (3, 2))
SEMANTIC_TYPES = ("dirt", "veg")
RATIO_TOLERANCE = 1e-6


class PriorConfig(BaseModel):
    """Max grades are rise/run; 30 and 15 degrees by default."""

    s_max_linear: float = Field(default=float(np.tan(np.radians(30.0))), gt=0)
    s_max_angular: float = Field(default=float(np.tan(np.radians(15.0))), gt=0)
    h_max: float = Field(default=0.2, gt=0)
    w_unif: float = Field(default=0.2, ge=0, le=1)
    n_phys: float = Field(default=12.0, gt=0)

    def s_max(self, param: TraversabilityParam) -> float:
        if param == TraversabilityParam.ANGULAR_TRACTION:
            return self.s_max_angular
        return self.s_max_linear


@dataclass(frozen=True)
class FootprintSample:
    wheel_slopes: np.ndarray
    wheel_heights: np.ndarray
    veg_heights: np.ndarray
    roll_distances: np.ndarray
    pitch_distances: np.ndarray
    semantic_ratios: dict[str, float] = field(default_factory=lambda: {"dirt": 1.0, "veg": 0.0})

    def __post_init__(self):
        for name, size in (("wheel_slopes", 4), ("wheel_heights", 4), ("veg_heights", 4),
                           ("roll_distances", 2), ("pitch_distances", 2)):
            values = np.asarray(getattr(self, name), dtype=np.float64)
            if values.shape != (size,):
                raise DomainError(f"{name} needs {size} entries, got shape {values.shape}")
            if not np.all(np.isfinite(values)):
                raise DomainError(f"{name} must be finite: {values}")
            object.__setattr__(self, name, values)
        if np.any(self.wheel_slopes < 0) or np.any(self.veg_heights < 0):
            raise DomainError("Wheel slopes and vegetation heights must be non-negative")
        if np.any(self.roll_distances <= 0) or np.any(self.pitch_distances <= 0):
            raise DomainError("Wheel pair distances must be positive")

    @property
    def veg_ratio(self) -> float:
        return float(self.semantic_ratios.get("veg", 0.0))


# ---------------------------------------------------------------------------
# Batched forms: per-wheel arrays of shape (N, 4), pair distances (N, 2)
# ---------------------------------------------------------------------------

def traction_votes(values: np.ndarray, max_value: float) -> np.ndarray:
    """Per-wheel traction estimates 1 - value/max clipped to [0, 1]."""
    return np.clip((max_value - np.asarray(values, dtype=np.float64)) / max_value, 0.0, 1.0)


def traction_prior_array(values: np.ndarray, max_value: float, disc: Discretization) -> np.ndarray:
    return one_hot_array(traction_votes(values, max_value), disc).mean(axis=-2)


def attitude_angles(heights: np.ndarray, distances: np.ndarray, pairs) -> np.ndarray:
    heights = np.asarray(heights, dtype=np.float64)
    distances = np.asarray(distances, dtype=np.float64)
    diffs = np.stack([heights[..., i] - heights[..., j] for i, j in pairs], axis=-1)
    return np.abs(np.arctan(diffs / distances))


def attitude_prior_array(heights, distances, param: TraversabilityParam, disc: Discretization) -> np.ndarray:
    pairs = _pairs(param)
    return one_hot_array(attitude_angles(heights, distances, pairs), disc).mean(axis=-2)


def mix_array(prior_dirt: np.ndarray, prior_veg: np.ndarray, veg_ratio, w_unif: float) -> np.ndarray:
    veg_ratio = np.asarray(veg_ratio, dtype=np.float64)[..., None]
    num_bins = prior_dirt.shape[-1]
    semantic = (1.0 - veg_ratio) * prior_dirt + veg_ratio * prior_veg
    return w_unif / num_bins + (1.0 - w_unif) * semantic


def physics_prior_array(
    slopes: np.ndarray,
    heights: np.ndarray,
    veg_heights: np.ndarray,
    roll_distances: np.ndarray,
    pitch_distances: np.ndarray,
    veg_ratio: np.ndarray,
    param: TraversabilityParam,
    cfg: PriorConfig,
    disc: Discretization,
) -> np.ndarray:
    """Mixed prior masses of shape (N, B) for a batch of footprints."""
    if param.is_traction:
        dirt = traction_prior_array(slopes, cfg.s_max(param), disc)
        veg = traction_prior_array(veg_heights, cfg.h_max, disc)
    else:
        distances = roll_distances if param == TraversabilityParam.ROLL else pitch_distances
        dirt = veg = attitude_prior_array(heights, distances, param, disc)
    return mix_array(dirt, veg, veg_ratio, cfg.w_unif)


def _pairs(param: TraversabilityParam):
    if param == TraversabilityParam.ROLL:
        return ROLL_PAIRS
    if param == TraversabilityParam.PITCH:
        return PITCH_PAIRS
    raise DomainError(f"{param.name} is not an attitude parameter")


# ---------------------------------------------------------------------------
# Typed forms
# ---------------------------------------------------------------------------

def dirt_traction_prior(fp: FootprintSample, cfg: PriorConfig, disc: Discretization,
                        param: TraversabilityParam = TraversabilityParam.LINEAR_TRACTION) -> Pmf:
    """Average of one-hot votes at clip((s_max - s_i) / s_max, 0, 1)."""
    return Pmf(traction_prior_array(fp.wheel_slopes[None, :], cfg.s_max(param), disc)[0], disc)


def veg_traction_prior(fp: FootprintSample, cfg: PriorConfig, disc: Discretization) -> Pmf:
    """Average of one-hot votes at clip((h_max - h_i) / h_max, 0, 1)."""
    return Pmf(traction_prior_array(fp.veg_heights[None, :], cfg.h_max, disc)[0], disc)


def attitude_prior(fp: FootprintSample, param: TraversabilityParam, disc: Discretization) -> Pmf:
    """Average of one-hot votes at |arctan(dh / d)| over the two wheel pairs."""
    distances = fp.roll_distances if param == TraversabilityParam.ROLL else fp.pitch_distances
    masses = attitude_prior_array(fp.wheel_heights[None, :], distances[None, :], param, disc)[0]
    return Pmf(masses, disc)


def mix_semantic(priors_by_semantic: dict[str, Pmf], fp: FootprintSample, cfg: PriorConfig) -> Pmf:
    total = sum(fp.semantic_ratios.values())
    if abs(total - 1.0) > RATIO_TOLERANCE:
        raise DomainError(f"Semantic ratios must sum to 1, got {total}")
    unknown = set(fp.semantic_ratios) - set(priors_by_semantic)
    if unknown:
        raise DomainError(f"No prior for semantic types: {sorted(unknown)}")
    disc = next(iter(priors_by_semantic.values())).disc
    semantic = sum(fp.semantic_ratios[s] * priors_by_semantic[s].masses for s in fp.semantic_ratios)
    return Pmf(cfg.w_unif / disc.num_bins + (1.0 - cfg.w_unif) * semantic, disc)


def physics_prior_pmf(feature, param: TraversabilityParam, cfg: PriorConfig, disc: Discretization) -> Pmf:
    """Prior for one parameter of a `TerrainFeature` (or a bare `FootprintSample`)."""
    fp = getattr(feature, "footprint", feature)
    if param.is_traction:
        priors = {
            "dirt": dirt_traction_prior(fp, cfg, disc, param),
            "veg": veg_traction_prior(fp, cfg, disc),
        }
    else:
        shared = attitude_prior(fp, param, disc)
        priors = {s: shared for s in SEMANTIC_TYPES}
    return mix_semantic(priors, fp, cfg)
