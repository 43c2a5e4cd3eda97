"""bench-nav: closed-loop CVaR-MPPI trials per navigation method and risk tolerance."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from evidential_nav.planner.navigation import OUTCOMES, run_navigation, sample_goal_pairs
from evidential_nav.predictor.cvar_maps import cvar_stack, predict_grid
from evidential_nav.predictor.methods import NAV_METHODS
from evidential_nav.stages.common import load_model, maps_dir, method_slug, read_map_summary, write_csv
from evidential_nav.utils.config_manager import ExperimentConfig
from evidential_nav.utils.constants import NAV_EPISODES_FILE, NAV_SUMMARY_FILE
from evidential_nav.utils.errors import ConfigError, MissingArtifactError
from evidential_nav.utils.grid_io import load_terrain, save_cvar_maps

logger = logging.getLogger(__name__)


def navigation_maps(summary: pd.DataFrame, n_maps: int) -> pd.DataFrame:
    """The first `n_maps` test maps, or the first maps of any role when there are none."""
    test = summary[summary["role"] == "test"]
    return (test if len(test) else summary).head(n_maps)


def summarize(episodes: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for (method, alpha), group in episodes.groupby(["method", "alpha"], sort=False):
        success = group[group["outcome"] == "goal"]
        row = {
            "method": method,
            "alpha": alpha,
            "n_trials": len(group),
            "success_rate": len(success) / len(group),
            "mean_time_to_goal": success["time_to_goal"].mean() if len(success) else np.nan,
            "median_time_to_goal": success["time_to_goal"].median() if len(success) else np.nan,
        }
        for outcome in OUTCOMES[1:]:
            row[f"{outcome}_rate"] = float((group["outcome"] == outcome).mean())
        rows.append(row)
    return pd.DataFrame(rows)


def run(cfg: ExperimentConfig, out_dir: Path, save_maps: bool = False) -> Path:
    for name in cfg.benchmark.nav_methods:
        if name not in NAV_METHODS:
            raise ConfigError(f"Unknown navigation method '{name}'. Available: {', '.join(NAV_METHODS)}")
    summary = read_map_summary(out_dir)
    discs = cfg.discretizations()
    seeds = cfg.benchmark.seeds
    rows = []
    for map_row in navigation_maps(summary, cfg.benchmark.nav_maps).itertuples(index=False):
        path = maps_dir(out_dir) / map_row.file
        if not path.exists():
            raise MissingArtifactError(path, "gen-maps")
        terrain = load_terrain(path)
        rng = np.random.default_rng([cfg.seed, int(map_row.map_id)])
        pairs = sample_goal_pairs(terrain, cfg.benchmark.n_goal_pairs, cfg.benchmark.goal_distance, rng,
                                  margin=cfg.benchmark.goal_margin)

        for nav_name in cfg.benchmark.nav_methods:
            method, avoid_ood = NAV_METHODS[nav_name]
            predictions = {}
            for k, nav_seed in enumerate(cfg.benchmark.nav_seeds):
                model_seed = seeds[k % len(seeds)]
                if model_seed not in predictions:
                    model = load_model(cfg, out_dir, method, model_seed)
                    predictions[model_seed] = predict_grid(terrain, model, cfg.planner.n_yaw, cfg.robot,
                                                           cfg.features, n_workers=cfg.workers)
                for alpha in cfg.benchmark.alphas:
                    stack = cvar_stack(predictions[model_seed], discs, alpha)
                    if save_maps:
                        save_cvar_maps(stack, Path(out_dir) / "cvar_maps" /
                                       f"map{map_row.map_id:02d}_{method_slug(method)}_seed{model_seed}_a{alpha:g}.grid")
                    planner_cfg = cfg.planner.model_copy(update={"alpha": alpha, "avoid_ood": avoid_ood,
                                                                 "n_workers": cfg.workers})
                    logs = run_navigation(terrain, stack, pairs, planner_cfg, nav_seed, cfg.robot,
                                          cfg.ground_truth, method=nav_name, map_id=int(map_row.map_id))
                    rows.extend({**log.as_dict(), "model_seed": model_seed} for log in logs)
            logger.info("Map %d %s: %d trials", map_row.map_id, nav_name,
                        len(cfg.benchmark.nav_seeds) * len(cfg.benchmark.alphas) * len(pairs))

    episodes = pd.DataFrame(rows)
    write_csv(episodes, Path(out_dir) / NAV_EPISODES_FILE)
    return write_csv(summarize(episodes), Path(out_dir) / NAV_SUMMARY_FILE)
