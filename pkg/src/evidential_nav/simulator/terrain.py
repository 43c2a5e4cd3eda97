"""
Synthetic 2.5D terrain: diamond-square elevation, vegetation patches and
bilinear sampling.

Cell (i, j) covers x in [j*res, (j+1)*res) and y in [i*res, (i+1)*res); its
value is taken to sit at the cell center.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field
from scipy.ndimage import map_coordinates

from evidential_nav.utils.errors import DomainError

logger = logging.getLogger(__name__)

DIRT = 0
VEG = 1


class TerrainConfig(BaseModel):
    size_m: float = Field(default=25.0, gt=0)
    resolution: float = Field(default=0.25, gt=0)
    base_std: float = Field(default=0.15, ge=0, description="Elevation std (m) at scale 1")
    roughness: float = Field(default=0.55, gt=0, lt=1)
    veg_fraction: float = Field(default=0.0, ge=0, le=1)
    veg_height_max: float = Field(default=0.3, ge=0)


@dataclass
class TerrainMap:
    resolution: float
    elevation: np.ndarray
    semantic: np.ndarray
    veg_height: np.ndarray
    seed: int = 0
    scale: float = 1.0
    grad_x: np.ndarray = field(init=False, repr=False)
    grad_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.elevation = np.asarray(self.elevation, dtype=np.float64)
        self.semantic = np.asarray(self.semantic, dtype=np.int64)
        self.veg_height = np.asarray(self.veg_height, dtype=np.float64)
        if self.resolution <= 0:
            raise DomainError(f"Map resolution must be positive, got {self.resolution}")
        if (self.elevation.ndim != 2 or self.semantic.shape != self.elevation.shape
                or self.veg_height.shape != self.elevation.shape):
            raise DomainError("Elevation, semantic and veg_height grids must share one 2-D shape")
        if not np.all(np.isfinite(self.elevation)):
            raise DomainError("Elevations must be finite")
        if np.any(self.veg_height < 0) or np.any(self.veg_height[self.semantic == DIRT] != 0):
            raise DomainError("veg_height must be >= 0 and zero on dirt cells")
        if min(self.shape) >= 2:
            self.grad_y, self.grad_x = np.gradient(self.elevation, self.resolution)
        else:
            self.grad_y = self.grad_x = np.zeros_like(self.elevation)

    @property
    def shape(self) -> tuple[int, int]:
        return self.elevation.shape

    @property
    def extent(self) -> tuple[float, float]:
        """(width, height) in meters."""
        rows, cols = self.shape
        return cols * self.resolution, rows * self.resolution

    def contains(self, x, y) -> np.ndarray:
        width, height = self.extent
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= 0) & (x < width) & (y >= 0) & (y < height)

    def cell_of(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = self.shape
        i = np.clip(np.floor(np.asarray(y) / self.resolution).astype(np.int64), 0, rows - 1)
        j = np.clip(np.floor(np.asarray(x) / self.resolution).astype(np.int64), 0, cols - 1)
        return i, j

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = self.shape
        ys, xs = np.meshgrid((np.arange(rows) + 0.5) * self.resolution,
                             (np.arange(cols) + 0.5) * self.resolution, indexing="ij")
        return xs, ys

    def _coords(self, x, y):
        return np.stack([np.asarray(y, dtype=np.float64).ravel() / self.resolution - 0.5,
                         np.asarray(x, dtype=np.float64).ravel() / self.resolution - 0.5])

    def _sample(self, grid, x, y, order=1):
        shape = np.shape(x)
        values = map_coordinates(grid, self._coords(x, y), order=order, mode="nearest")
        return values.reshape(shape)

    def elevation_at(self, x, y) -> np.ndarray:
        return self._sample(self.elevation, x, y)

    def slope_at(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """(dz/dx, dz/dy) at world points."""
        return self._sample(self.grad_x, x, y), self._sample(self.grad_y, x, y)

    def veg_height_at(self, x, y) -> np.ndarray:
        return self._sample(self.veg_height, x, y)

    def semantic_at(self, x, y) -> np.ndarray:
        return self._sample(self.semantic.astype(np.float64), x, y, order=0).astype(np.int64)


def diamond_square(levels: int, roughness: float, rng: np.random.Generator) -> np.ndarray:
    """Fractal heightfield of shape (2**levels + 1, 2**levels + 1)."""
    n = 2 ** levels
    grid = np.zeros((n + 1, n + 1))
    grid[::n, ::n] = rng.uniform(-1.0, 1.0, size=(2, 2))
    step, amplitude = n, 1.0
    while step > 1:
        half = step // 2
        # square step: centers of each step x step square
        corners = grid[:-step:step, :-step:step] + grid[step::step, :-step:step] \
            + grid[:-step:step, step::step] + grid[step::step, step::step]
        grid[half::step, half::step] = corners / 4.0 + rng.uniform(-amplitude, amplitude, corners.shape)
        # diamond step: edge midpoints, averaging the in-bounds of their four neighbours
        padded = np.pad(grid, half, constant_values=np.nan)
        for rows, cols in ((np.arange(0, n + 1, step), np.arange(half, n, step)),
                           (np.arange(half, n, step), np.arange(0, n + 1, step))):
            r = rows[:, None] + half
            c = cols[None, :] + half
            neighbours = np.stack([padded[r - half, c], padded[r + half, c],
                                   padded[r, c - half], padded[r, c + half]])
            mean = np.nanmean(neighbours, axis=0)
            grid[rows[:, None], cols[None, :]] = mean + rng.uniform(-amplitude, amplitude, mean.shape)
        amplitude *= roughness
        step = half
    return grid


def _fractal_field(rows: int, cols: int, roughness: float, rng: np.random.Generator) -> np.ndarray:
    levels = max(1, int(np.ceil(np.log2(max(rows, cols, 2) - 1))))
    return diamond_square(levels, roughness, rng)[:rows, :cols]


def _standardize(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean()
    std = centered.std()
    return centered / std if std > 0 else centered


def generate_map(seed: int, size_m: float = 25.0, resolution: float = 0.25, scale: float = 1.0,
                 veg_fraction: float = 0.0, cfg: TerrainConfig | None = None) -> TerrainMap:
    """Deterministic fractal map whose elevation std is exactly scale * base_std."""
    if size_m <= 0 or resolution <= 0:
        raise DomainError(f"size_m and resolution must be positive, got {size_m}, {resolution}")
    if scale < 0:
        raise DomainError(f"scale must be >= 0, got {scale}")
    cfg = cfg or TerrainConfig()
    cells = max(2, int(round(size_m / resolution)))
    rng = np.random.default_rng(seed)

    elevation = _standardize(_fractal_field(cells, cells, cfg.roughness, rng)) * cfg.base_std * scale

    vegetation = _fractal_field(cells, cells, cfg.roughness, rng)
    semantic = np.zeros((cells, cells), dtype=np.int64)
    veg_height = np.zeros((cells, cells))
    if veg_fraction > 0:
        threshold = np.quantile(vegetation, 1.0 - veg_fraction)
        mask = vegetation >= threshold
        semantic[mask] = VEG
        spread = max(vegetation.max() - threshold, 1e-12)
        veg_height[mask] = cfg.veg_height_max * np.clip((vegetation[mask] - threshold) / spread, 0.2, 1.0)

    logger.debug("Generated map seed=%d scale=%.2f cells=%d std=%.4f", seed, scale, cells, elevation.std())
    return TerrainMap(resolution=resolution, elevation=elevation, semantic=semantic,
                      veg_height=veg_height, seed=seed, scale=scale)


def flat_map(size_m: float = 10.0, resolution: float = 0.25, height: float = 0.0) -> TerrainMap:
    cells = max(2, int(round(size_m / resolution)))
    return TerrainMap(resolution=resolution, elevation=np.full((cells, cells), height),
                      semantic=np.zeros((cells, cells), dtype=np.int64),
                      veg_height=np.zeros((cells, cells)), seed=0, scale=0.0)
