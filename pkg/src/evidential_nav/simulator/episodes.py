"""
Self-supervised data collection and the in-distribution / out-of-distribution split.

Each episode drops the robot at a random pose, drives it at constant speed
with sinusoidal steering, and records (yaw-aligned feature, ground truth)
at every step until it rolls over, gets stuck, leaves the map or hits the
step cap.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from evidential_nav.predictor.features import FeatureBatch, FeatureConfig, TerrainFeature, extract_features_batch
from evidential_nav.physics_prior import FootprintSample
from evidential_nav.simulator.ground_truth import GroundTruthConfig, ground_truth_batch
from evidential_nav.simulator.robot import RobotParams, TraversabilitySample, bicycle_update
from evidential_nav.utils.errors import DomainError, FormatError

logger = logging.getLogger(__name__)

DATASET_FORMAT = "evidential_nav.dataset"
DATASET_VERSION = 1


class CollectionConfig(BaseModel):
    episodes_per_map: int = Field(default=10, ge=0)
    speed: float = Field(default=2.0, gt=0)
    steer_amplitude: float = Field(default=float(np.radians(25.0)), ge=0)
    steer_period: float = Field(default=4.0, gt=0)
    rollover_angle: float = Field(default=float(np.radians(35.0)), gt=0)
    stuck_traction: float = Field(default=0.05, ge=0)
    stuck_steps: int = Field(default=10, ge=1)
    max_steps: int = Field(default=150, ge=1)
    start_margin: float = Field(default=2.0, ge=0, description="Distance (m) kept from the map edge at start")


@dataclass(frozen=True)
class DatasetRecord:
    feature: TerrainFeature
    target: TraversabilitySample
    unevenness: float
    map_id: int = 0
    split: str = "train"
    in_distribution: bool | None = None


@dataclass(frozen=True)
class EpisodeSummary:
    steps: int
    termination: str
    final_pose: tuple[float, float, float]


def run_episode(terrain, params: RobotParams, cfg: CollectionConfig, gt_cfg: GroundTruthConfig,
                feat_cfg: FeatureConfig, seed_seq: np.random.SeedSequence):
    """One episode: features and targets at every recorded pose, plus where and why it ended."""
    rng = np.random.default_rng(seed_seq)
    width, height = terrain.extent
    margin_x = min(cfg.start_margin, 0.45 * width)
    margin_y = min(cfg.start_margin, 0.45 * height)
    x = rng.uniform(margin_x, width - margin_x)
    y = rng.uniform(margin_y, height - margin_y)
    yaw = rng.uniform(-np.pi, np.pi)
    phase = rng.uniform(0.0, 2.0 * np.pi)

    poses, targets = [], []
    stuck_count = 0
    termination = "max_steps"
    for step in range(cfg.max_steps):
        psi = ground_truth_batch(terrain, [x], [y], [yaw], params, gt_cfg, rng)[0]
        poses.append((x, y, yaw))
        targets.append(psi)
        if psi[2] > cfg.rollover_angle or psi[3] > cfg.rollover_angle:
            termination = "rollover"
            break
        stuck_count = stuck_count + 1 if psi[0] < cfg.stuck_traction else 0
        if stuck_count >= cfg.stuck_steps:
            termination = "stuck"
            break
        steer = cfg.steer_amplitude * np.sin(2.0 * np.pi * step * params.dt / cfg.steer_period + phase)
        x, y, yaw = bicycle_update(x, y, yaw, cfg.speed, steer, psi[0], psi[1], params.wheelbase, params.dt)
        if not bool(terrain.contains(x, y)):
            termination = "exit"
            break

    pose_arr = np.array(poses)
    batch = extract_features_batch(terrain, pose_arr[:, 0], pose_arr[:, 1], pose_arr[:, 2], params, feat_cfg)
    return batch, np.array(targets), EpisodeSummary(len(poses), termination, (float(x), float(y), float(yaw)))


def _episode_job(args):
    return run_episode(*args)


def collect_episodes(terrain, params: RobotParams, n_episodes: int, rng: np.random.Generator,
                     cfg: CollectionConfig | None = None, gt_cfg: GroundTruthConfig | None = None,
                     feat_cfg: FeatureConfig | None = None, map_id: int = 0, split: str = "train",
                     n_workers: int = 1) -> list[DatasetRecord]:
    """Roll out `n_episodes` episodes; episode k always uses the k-th child seed."""
    cfg = cfg or CollectionConfig()
    gt_cfg = gt_cfg or GroundTruthConfig()
    feat_cfg = feat_cfg or FeatureConfig()
    if cfg.speed * params.dt > terrain.resolution:
        raise DomainError(f"A {cfg.speed * params.dt:.3f} m step at speed {cfg.speed} crosses more than one "
                          f"{terrain.resolution} m cell; exit detection needs at most one cell per step")
    children = np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(n_episodes)
    jobs = [(terrain, params, cfg, gt_cfg, feat_cfg, child) for child in children]
    if n_workers > 1 and n_episodes > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_episode_job, jobs))
    else:
        results = [_episode_job(job) for job in jobs]

    records = []
    for batch, targets, summary in results:
        logger.debug("map %d episode: %d steps, %s", map_id, summary.steps, summary.termination)
        records.extend(records_from_batch(batch, targets, map_id, split))
    logger.info("Collected %d records from %d episodes on map %d", len(records), n_episodes, map_id)
    return records


def records_from_batch(batch: FeatureBatch, targets: np.ndarray, map_id: int, split: str) -> list[DatasetRecord]:
    unevenness = batch.unevenness
    return [
        DatasetRecord(batch.feature(k), TraversabilitySample.from_array(targets[k]), float(unevenness[k]), map_id, split)
        for k in range(len(batch))
    ]


def unevenness_threshold(records: list[DatasetRecord], percentile: float = 50.0) -> float:
    if not records:
        raise DomainError("Cannot compute an unevenness threshold from an empty dataset")
    reference = [r for r in records if r.split == "train"] or records
    return float(np.percentile([r.unevenness for r in reference], percentile))


def label_records(records: list[DatasetRecord], percentile: float = 50.0) -> tuple[list[DatasetRecord], float]:
    """Every record labeled ID (unevenness <= train percentile) or OOD, plus the threshold."""
    if not records:
        raise DomainError("Cannot split an empty dataset")
    threshold = unevenness_threshold(records, percentile)
    return [replace(r, in_distribution=bool(r.unevenness <= threshold)) for r in records], threshold


def split_dataset(records: list[DatasetRecord], percentile: float = 50.0):
    """Label records ID (unevenness <= train percentile) or OOD.

    Returns:
        (train_id, val_id, test_all) where test_all keeps both ID and OOD records
    """
    labeled, threshold = label_records(records, percentile)
    train_id = [r for r in labeled if r.split == "train" and r.in_distribution]
    val_id = [r for r in labeled if r.split == "val" and r.in_distribution]
    test_all = [r for r in labeled if r.split == "test"]
    logger.info("Split at unevenness %.4f: %d train ID, %d val ID, %d test", threshold,
                len(train_id), len(val_id), len(test_all))
    return train_id, val_id, test_all


def records_to_batch(records: list[DatasetRecord]) -> tuple[FeatureBatch, np.ndarray]:
    """Stack records into a feature batch and targets of shape (N, 4)."""
    batch = FeatureBatch.from_features([r.feature for r in records])
    return batch, np.stack([r.target.as_array() for r in records])


# ---------------------------------------------------------------------------
# Serialization: one JSON header line, then one JSON object per record
# ---------------------------------------------------------------------------

def _record_to_dict(r: DatasetRecord) -> dict:
    f = r.feature
    fp = f.footprint
    return {
        "map_id": r.map_id,
        "split": r.split,
        "in_distribution": r.in_distribution,
        "unevenness": r.unevenness,
        "target": r.target.as_array().tolist(),
        "yaw": f.yaw,
        "elevation_patch": f.elevation_patch.tolist(),
        "semantic_patch": f.semantic_patch.tolist(),
        "veg_patch": f.veg_patch.tolist(),
        "footprint": {
            "wheel_slopes": fp.wheel_slopes.tolist(),
            "wheel_heights": fp.wheel_heights.tolist(),
            "veg_heights": fp.veg_heights.tolist(),
            "roll_distances": fp.roll_distances.tolist(),
            "pitch_distances": fp.pitch_distances.tolist(),
            "semantic_ratios": dict(fp.semantic_ratios),
        },
    }


def _record_from_dict(d: dict) -> DatasetRecord:
    fp = d["footprint"]
    footprint = FootprintSample(
        wheel_slopes=np.array(fp["wheel_slopes"]),
        wheel_heights=np.array(fp["wheel_heights"]),
        veg_heights=np.array(fp["veg_heights"]),
        roll_distances=np.array(fp["roll_distances"]),
        pitch_distances=np.array(fp["pitch_distances"]),
        semantic_ratios=dict(fp["semantic_ratios"]),
    )
    feature = TerrainFeature(
        elevation_patch=np.array(d["elevation_patch"], dtype=np.float64),
        semantic_patch=np.array(d["semantic_patch"], dtype=np.float64),
        veg_patch=np.array(d["veg_patch"], dtype=np.float64),
        footprint=footprint,
        yaw=float(d["yaw"]),
    )
    return DatasetRecord(
        feature=feature,
        target=TraversabilitySample.from_array(d["target"]),
        unevenness=float(d["unevenness"]),
        map_id=int(d["map_id"]),
        split=str(d["split"]),
        in_distribution=d.get("in_distribution"),
    )


def save_dataset(records: list[DatasetRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": DATASET_FORMAT, "version": DATASET_VERSION, "count": len(records)}
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for r in records:
            f.write(json.dumps(_record_to_dict(r)) + "\n")
    return path


def load_dataset(path: Path) -> list[DatasetRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found at {path}")
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError(f"{path} is empty")
    try:
        header = json.loads(lines[0])
        records = [_record_from_dict(json.loads(line)) for line in lines[1:] if line.strip()]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"Malformed dataset file {path}: {e}") from e
    if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
        raise FormatError(f"{path} is not a version {DATASET_VERSION} dataset file (header: {header})")
    if header.get("count") != len(records):
        raise FormatError(f"{path} declares {header.get('count')} records but holds {len(records)}")
    return records
