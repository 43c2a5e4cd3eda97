"""train: one network per learned method and seed, with an optional hyperparameter sweep."""

from __future__ import annotations

import itertools
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from evidential_nav.predictor.methods import METHODS, NAV_METHODS, TRAINED_AS, get_method, trained_method_name
from evidential_nav.predictor.network import EvidentialConfig, save_network
from evidential_nav.predictor.training import build_network, prepare_training_data, train
from evidential_nav.simulator.episodes import load_dataset, split_dataset
from evidential_nav.stages.common import checkpoint_path, write_csv
from evidential_nav.utils.config_manager import ExperimentConfig
from evidential_nav.utils.constants import DATASET_FILE, TRAINING_CURVES_FILE
from evidential_nav.utils.errors import MissingArtifactError

logger = logging.getLogger(__name__)


def methods_to_train(cfg: ExperimentConfig, methods: list[str] | None = None) -> list[str]:
    """Networks needed by the learning and navigation benchmarks, in registry order."""
    if methods is None:
        wanted = list(cfg.benchmark.methods) + [NAV_METHODS[m][0] for m in cfg.benchmark.nav_methods
                                                if m in NAV_METHODS]
    else:
        wanted = list(methods)
    for name in wanted:
        get_method(name)
    needed = {trained_method_name(m) for m in wanted if METHODS[m].uses_network}
    return [name for name in METHODS if name in needed and name not in TRAINED_AS]


def sweep_settings(cfg: ExperimentConfig) -> list[dict]:
    sweep = cfg.benchmark.sweep
    kappas = sweep.kappa or [cfg.evidential.kappa]
    entropy_weights = sweep.entropy_weight or [cfg.evidential.entropy_weight]
    learning_rates = sweep.learning_rate or [cfg.evidential.learning_rate]
    return [
        {"kappa": k, "entropy_weight": e, "learning_rate": lr}
        for k, e, lr in itertools.product(kappas, entropy_weights, learning_rates)
    ]


def run(cfg: ExperimentConfig, out_dir: Path, methods: list[str] | None = None) -> list[Path]:
    dataset_path = Path(out_dir) / DATASET_FILE
    if not dataset_path.exists():
        raise MissingArtifactError(dataset_path, "collect")
    train_id, val_id, _ = split_dataset(load_dataset(dataset_path), cfg.benchmark.split_percentile)
    discs = cfg.discretizations()
    settings = sweep_settings(cfg)

    curves, saved = [], []
    for method in methods_to_train(cfg, methods):
        spec = get_method(method)
        train_data = prepare_training_data(train_id, spec, cfg.prior, discs)
        val_data = prepare_training_data(val_id, spec, cfg.prior, discs) if val_id else None

        best_score, best_networks, best_index = np.inf, None, 0
        for index, setting in enumerate(settings):
            base: EvidentialConfig = cfg.evidential.model_copy(update=setting)
            networks, scores = {}, []
            for seed in cfg.benchmark.seeds:
                network = build_network(spec, base, train_data.inputs.shape[1], seed)
                result = train(train_data, val_data, network, seed=seed)
                networks[seed] = network
                scores.append(result.best_val_error)
                for row in result.curves:
                    curves.append({"method": method, "seed": seed, "setting": index, **setting, **row})
            score = float(np.mean(scores))
            logger.info("%s setting %d %s: mean val EMD2 %.4f", method, index, setting, score)
            if best_networks is None or score < best_score:
                best_score, best_networks, best_index = score, networks, index

        for seed, network in best_networks.items():
            path = save_network(network, checkpoint_path(out_dir, method, seed),
                                {"method": method, "seed": seed, "setting": settings[best_index]})
            saved.append(path)
        for row in curves:
            if row["method"] == method:
                row["selected"] = row["setting"] == best_index

    write_csv(pd.DataFrame(curves), Path(out_dir) / TRAINING_CURVES_FILE)
    return saved
