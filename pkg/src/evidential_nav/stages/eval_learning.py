"""eval-learning: EMD2 of every method on the test pool, overall and split ID / OOD."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from evidential_nav.predictor.network import record_errors
from evidential_nav.predictor.training import encode_targets
from evidential_nav.simulator.episodes import label_records, load_dataset, records_to_batch
from evidential_nav.stages.common import load_model, write_csv
from evidential_nav.utils.config_manager import ExperimentConfig
from evidential_nav.utils.constants import (
    DATASET_FILE,
    LEARNING_RECORDS_FILE,
    LEARNING_RESULTS_FILE,
    UNEVENNESS_BINS_FILE,
)
from evidential_nav.utils.errors import MissingArtifactError

logger = logging.getLogger(__name__)


def evaluation_pool(records, percentile: float):
    """Test-map records labeled ID/OOD; every record when no test map exists."""
    labeled, _ = label_records(records, percentile)
    return [r for r in labeled if r.split == "test"] or labeled


def per_record_frame(cfg: ExperimentConfig, out_dir: Path, records) -> pd.DataFrame:
    discs = cfg.discretizations()
    batch, targets = records_to_batch(records)
    onehot = encode_targets(targets, discs)
    physics = batch.all_prior_masses(cfg.prior, discs)
    base = pd.DataFrame({
        "record": np.arange(len(records)),
        "map_id": [r.map_id for r in records],
        "unevenness": [r.unevenness for r in records],
        "in_distribution": [bool(r.in_distribution) for r in records],
    })

    frames = []
    for method in cfg.benchmark.methods:
        for seed in cfg.benchmark.seeds:
            model = load_model(cfg, out_dir, method, seed)
            prediction = model.predict(batch)
            frame = base.copy()
            frame.insert(0, "seed", seed)
            frame.insert(0, "method", method)
            frame["emd2"] = record_errors(prediction.expected, onehot)
            frame["prior_gap"] = np.abs(prediction.expected - physics).sum(axis=-1).mean(axis=-1)
            frame["evidence"] = (prediction.evidence.mean(axis=-1) if prediction.evidence is not None
                                 else np.nan)
            frame["ood_flag"] = prediction.ood
            frames.append(frame)
        logger.info("Evaluated %s on %d records", method, len(records))
    return pd.concat(frames, ignore_index=True)


def summarize(per_record: pd.DataFrame) -> pd.DataFrame:
    """Method x {overall, ID, OOD}: mean and std over seeds of the per-seed mean EMD2."""
    ok = per_record["in_distribution"]
    frame = per_record.assign(
        overall=per_record["emd2"],
        id=per_record["emd2"].where(ok),
        ood=per_record["emd2"].where(~ok),
    )
    per_seed = frame.groupby(["method", "seed"], sort=False)[["overall", "id", "ood"]].mean().reset_index()
    rows = []
    for method, group in per_seed.groupby("method", sort=False):
        row = {"method": method, "n_seeds": len(group)}
        for subset in ("overall", "id", "ood"):
            row[f"{subset}_mean"] = group[subset].mean()
            row[f"{subset}_std"] = group[subset].std(ddof=0)
        rows.append(row)
    return pd.DataFrame(rows)


def unevenness_table(per_record: pd.DataFrame, n_bins: int) -> pd.DataFrame:
    """Binned error, evidence and gap to the physics prior against footprint unevenness."""
    lo, hi = per_record["unevenness"].min(), per_record["unevenness"].max()
    edges = np.linspace(lo, hi if hi > lo else lo + 1e-9, n_bins + 1)
    bins = np.clip(np.digitize(per_record["unevenness"], edges[1:-1]), 0, n_bins - 1)
    frame = per_record.assign(bin=bins)
    table = frame.groupby(["method", "bin"], sort=False).agg(
        count=("emd2", "size"),
        mean_emd2=("emd2", "mean"),
        mean_evidence=("evidence", "mean"),
        mean_prior_gap=("prior_gap", "mean"),
    ).reset_index()
    table.insert(2, "unevenness_lo", edges[table["bin"].to_numpy()])
    table.insert(3, "unevenness_hi", edges[table["bin"].to_numpy() + 1])
    return table


def run(cfg: ExperimentConfig, out_dir: Path) -> Path:
    dataset_path = Path(out_dir) / DATASET_FILE
    if not dataset_path.exists():
        raise MissingArtifactError(dataset_path, "collect")
    records = evaluation_pool(load_dataset(dataset_path), cfg.benchmark.split_percentile)
    per_record = per_record_frame(cfg, out_dir, records)
    write_csv(per_record, Path(out_dir) / LEARNING_RECORDS_FILE)
    write_csv(unevenness_table(per_record, cfg.benchmark.unevenness_bins), Path(out_dir) / UNEVENNESS_BINS_FILE)
    return write_csv(summarize(per_record), Path(out_dir) / LEARNING_RESULTS_FILE)
