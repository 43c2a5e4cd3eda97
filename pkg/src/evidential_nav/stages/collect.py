"""collect: self-supervised driving episodes on every generated map."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from evidential_nav.simulator.episodes import collect_episodes, save_dataset
from evidential_nav.stages.common import maps_dir, read_map_summary
from evidential_nav.utils.config_manager import ExperimentConfig
from evidential_nav.utils.constants import DATASET_FILE
from evidential_nav.utils.errors import MissingArtifactError
from evidential_nav.utils.grid_io import load_terrain

logger = logging.getLogger(__name__)


def run(cfg: ExperimentConfig, out_dir: Path) -> Path:
    summary = read_map_summary(out_dir)
    records = []
    for row in summary.itertuples(index=False):
        path = maps_dir(out_dir) / row.file
        if not path.exists():
            raise MissingArtifactError(path, "gen-maps")
        terrain = load_terrain(path)
        rng = np.random.default_rng([cfg.seed, int(row.map_id)])
        records.extend(collect_episodes(
            terrain, cfg.robot, cfg.collection.episodes_per_map, rng,
            cfg=cfg.collection, gt_cfg=cfg.ground_truth, feat_cfg=cfg.features,
            map_id=int(row.map_id), split=str(row.role), n_workers=cfg.workers,
        ))
    path = save_dataset(records, Path(out_dir) / DATASET_FILE)
    logger.info("Saved %d records to %s", len(records), path)
    return path
