"""gen-maps: fractal terrain maps split into train / val / test roles."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from evidential_nav.predictor.features import extract_features_batch
from evidential_nav.simulator.terrain import generate_map
from evidential_nav.stages.common import maps_dir, write_csv
from evidential_nav.utils.config_manager import ExperimentConfig
from evidential_nav.utils.constants import MAP_SUMMARY_FILE
from evidential_nav.utils.grid_io import save_terrain

logger = logging.getLogger(__name__)

# Poses per map axis used for the footprint-scale unevenness statistic
UNEVENNESS_GRID = 12


def map_roles(n: int) -> list[str]:
    """Equal val and test thirds (rounded down); the rest train."""
    n_held_out = n // 3
    n_train = n - 2 * n_held_out
    return ["train"] * n_train + ["val"] * n_held_out + ["test"] * n_held_out


def footprint_unevenness(terrain, cfg: ExperimentConfig) -> np.ndarray:
    width, height = terrain.extent
    margin = 0.5 * cfg.features.patch_size_m
    xs, ys = np.meshgrid(np.linspace(margin, width - margin, UNEVENNESS_GRID),
                         np.linspace(margin, height - margin, UNEVENNESS_GRID))
    batch = extract_features_batch(terrain, xs.ravel(), ys.ravel(), np.zeros(xs.size), cfg.robot, cfg.features)
    return batch.unevenness


def run(cfg: ExperimentConfig, out_dir: Path, n: int | None = None, scale: float | None = None) -> list[Path]:
    n = n or cfg.benchmark.n_maps
    train_scale = cfg.benchmark.train_scale if scale is None else scale
    seeds = np.random.SeedSequence(cfg.seed).generate_state(n)
    rows, paths = [], []
    for map_id, (role, map_seed) in enumerate(zip(map_roles(n), seeds)):
        map_scale = train_scale * (cfg.benchmark.test_scale_factor if role == "test" else 1.0)
        terrain = generate_map(int(map_seed), cfg.terrain.size_m, cfg.terrain.resolution, map_scale,
                               cfg.terrain.veg_fraction, cfg.terrain)
        path = save_terrain(terrain, maps_dir(out_dir) / f"map_{map_id:02d}_{role}.grid")
        paths.append(path)
        rows.append({
            "map_id": map_id,
            "role": role,
            "seed": int(map_seed),
            "scale": map_scale,
            "elevation_std": float(terrain.elevation.std()),
            "unevenness_median": float(np.median(footprint_unevenness(terrain, cfg))),
            "file": path.name,
        })
        logger.info("Map %d (%s): seed %d scale %.2f", map_id, role, map_seed, map_scale)
    write_csv(pd.DataFrame(rows), Path(out_dir) / MAP_SUMMARY_FILE)
    return paths
