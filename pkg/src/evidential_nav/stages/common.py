"""Artifact paths and CSV helpers shared by the pipeline stages."""

from __future__ import annotations

from pathlib import Path

import pandas as pd

from evidential_nav.predictor.methods import TraversabilityModel, get_method, trained_method_name
from evidential_nav.predictor.network import load_network
from evidential_nav.utils.config_manager import ExperimentConfig
from evidential_nav.utils.constants import (
    CHECKPOINTS_DIRNAME,
    MAP_SUMMARY_FILE,
    MAPS_DIRNAME,
    SCHEMA_VERSION,
)
from evidential_nav.utils.errors import FormatError, MissingArtifactError

FLOAT_FORMAT = "%.10g"


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write `frame` with a leading schema_version column."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = frame.copy()
    frame.insert(0, "schema_version", SCHEMA_VERSION)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_csv(path: Path, stage: str) -> pd.DataFrame:
    """Read a stage output, naming the producing stage when it is missing."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, stage)
    frame = pd.read_csv(path)
    if "schema_version" not in frame.columns:
        raise FormatError(f"{path} has no schema_version column")
    versions = set(frame["schema_version"].unique())
    if versions and versions != {SCHEMA_VERSION}:
        raise FormatError(f"{path} has schema version(s) {sorted(versions)}, expected {SCHEMA_VERSION}")
    return frame.drop(columns="schema_version")


def maps_dir(out_dir: Path) -> Path:
    return Path(out_dir) / MAPS_DIRNAME


def read_map_summary(out_dir: Path) -> pd.DataFrame:
    return read_csv(Path(out_dir) / MAP_SUMMARY_FILE, "gen-maps")


def method_slug(name: str) -> str:
    return name.replace("+", "_plus_").replace(" ", "_").replace("-", "_").lower()


def checkpoint_path(out_dir: Path, method: str, seed: int) -> Path:
    return Path(out_dir) / CHECKPOINTS_DIRNAME / f"{method_slug(method)}_seed{seed}.npz"


def load_model(cfg: ExperimentConfig, out_dir: Path, method: str, seed: int) -> TraversabilityModel:
    """The named method, with its trained network when it uses one."""
    spec = get_method(method)
    network = None
    if spec.uses_network:
        path = checkpoint_path(out_dir, trained_method_name(method), seed)
        if not path.exists():
            raise MissingArtifactError(path, "train")
        network, _ = load_network(path)
    return TraversabilityModel(spec, cfg.prior, cfg.discretizations(), network)
