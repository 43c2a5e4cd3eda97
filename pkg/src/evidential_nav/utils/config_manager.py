"""
Config Manager Module

Centralized management of experiment configuration. Loads the experiment
YAML (config/experiment.yaml unless another file is named), applies
`--set section.key=value` overrides and validates the result into an
`ExperimentConfig` whose sections are the config models of each module.

Environment variables (a .env file is honoured):
    EVIDENTIAL_NAV_CONFIG       path of the experiment YAML
    EVIDENTIAL_NAV_OUTPUT_DIR   artifact root
    EVIDENTIAL_NAV_LOG_LEVEL    logging level name
    EVIDENTIAL_NAV_WORKERS      worker count for parallel stages
"""

import logging
import os
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from evidential_nav.distributions import Discretization, TraversabilityParam, traversability_discretizations
from evidential_nav.physics_prior import PriorConfig
from evidential_nav.planner.mppi import PlannerConfig
from evidential_nav.predictor.features import FeatureConfig
from evidential_nav.predictor.network import EvidentialConfig
from evidential_nav.simulator.episodes import CollectionConfig
from evidential_nav.simulator.ground_truth import GroundTruthConfig
from evidential_nav.simulator.robot import RobotParams
from evidential_nav.simulator.terrain import TerrainConfig
from evidential_nav.utils.constants import DEFAULT_CONFIG_PATH, OUTPUT_DIR
from evidential_nav.utils.errors import ConfigError

load_dotenv()

# Cache for loaded YAML files, keyed by resolved path
_config_cache: Dict[Path, Dict] = {}


class DiscretizationConfig(BaseModel):
    num_bins: int = Field(default=12, ge=2)
    max_angle: float = Field(default=float(np.pi / 4), gt=0, description="Upper edge of the roll/pitch bins (rad)")

    def build(self) -> dict[TraversabilityParam, Discretization]:
        return traversability_discretizations(self.num_bins, self.max_angle)


class SweepConfig(BaseModel):
    """Candidate values tried by `train`; empty lists keep the `evidential` value."""

    kappa: list[float] = Field(default_factory=list)
    entropy_weight: list[float] = Field(default_factory=list)
    learning_rate: list[float] = Field(default_factory=list)


class BenchmarkConfig(BaseModel):
    n_maps: int = Field(default=6, ge=1)
    train_scale: float = Field(default=1.0, ge=0)
    test_scale_factor: float = Field(default=2.0, ge=0, description="Test maps use train_scale times this")
    split_percentile: float = Field(default=50.0, ge=0, le=100)
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    methods: list[str] = Field(default_factory=lambda: [
        "PIETRA", "EVORA", "PI", "Vanilla", "PP", "UPI", "EVORA+phys-if-OOD", "Physics Prior", "Uniform Prior",
    ])
    unevenness_bins: int = Field(default=8, ge=1)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    nav_methods: list[str] = Field(default_factory=lambda: [
        "PIETRA", "PIETRA+avoid-OOD", "EVORA+avoid-OOD", "PI", "Vanilla", "Physics Prior",
    ])
    alphas: list[float] = Field(default_factory=lambda: [0.4, 0.6, 0.8], min_length=1)
    nav_maps: int = Field(default=2, ge=1)
    n_goal_pairs: int = Field(default=5, ge=1)
    goal_distance: float = Field(default=15.0, gt=0)
    goal_margin: float = Field(default=2.0, ge=0)
    nav_seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    workers: int = Field(default=1, ge=1)
    discretization: DiscretizationConfig = Field(default_factory=DiscretizationConfig)
    prior: PriorConfig = Field(default_factory=PriorConfig)
    terrain: TerrainConfig = Field(default_factory=TerrainConfig)
    robot: RobotParams = Field(default_factory=RobotParams)
    ground_truth: GroundTruthConfig = Field(default_factory=GroundTruthConfig)
    collection: CollectionConfig = Field(default_factory=CollectionConfig)
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    evidential: EvidentialConfig = Field(default_factory=EvidentialConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    benchmark: BenchmarkConfig = Field(default_factory=BenchmarkConfig)

    @model_validator(mode="after")
    def _shared_values_agree(self):
        if self.evidential.num_bins != self.discretization.num_bins:
            raise ValueError("evidential.num_bins must equal discretization.num_bins")
        if self.evidential.n_phys != self.prior.n_phys:
            raise ValueError("evidential.n_phys must equal prior.n_phys")
        return self

    def discretizations(self) -> dict[TraversabilityParam, Discretization]:
        return self.discretization.build()


def config_path(path: Optional[Path] = None) -> Path:
    """The explicit path, else $EVIDENTIAL_NAV_CONFIG, else the packaged default."""
    if path is not None:
        return Path(path)
    env_path = os.getenv("EVIDENTIAL_NAV_CONFIG")
    return Path(env_path) if env_path else DEFAULT_CONFIG_PATH


def _load_experiment_config(path: Path) -> Dict:
    """
    Load the raw experiment configuration from a YAML file.

    Args:
        path: YAML file to read

    Returns:
        Dictionary of configuration sections (an empty file gives {})

    Raises:
        FileNotFoundError: If the config file doesn't exist
        yaml.YAMLError: If YAML is malformed
    """
    key = Path(path).resolve()
    if key in _config_cache:
        return _config_cache[key]

    try:
        with open(key, "r") as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise FileNotFoundError(
            f"Experiment configuration file not found at {key}. "
            "Pass --config, set EVIDENTIAL_NAV_CONFIG, or restore src/evidential_nav/config/experiment.yaml"
        )
    except yaml.YAMLError as e:
        raise yaml.YAMLError(f"Error parsing experiment configuration {key}: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"Experiment configuration {key} must be a mapping of sections")
    _config_cache[key] = raw
    return raw


def parse_override(item: str) -> tuple[list[str], object]:
    """Split 'section.key=value' into (['section', 'key'], YAML-parsed value)."""
    if "=" not in item:
        raise ConfigError(f"Override '{item}' must look like section.key=value")
    dotted, raw_value = item.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"Override '{item}' names no key")
    try:
        value = yaml.safe_load(raw_value)
    except yaml.YAMLError as e:
        raise ConfigError(f"Override '{item}' has an unparsable value: {e}") from e
    return keys, value


def apply_overrides(raw: Dict, overrides: Iterable[str]) -> Dict:
    """Return a copy of `raw` with every override applied."""
    merged = _deep_copy(raw)
    for item in overrides:
        keys, value = parse_override(item)
        node = merged
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override '{item}': '{key}' is not a section")
            node = child
        node[keys[-1]] = value
    return merged


def _deep_copy(raw):
    if isinstance(raw, dict):
        return {k: _deep_copy(v) for k, v in raw.items()}
    if isinstance(raw, list):
        return [_deep_copy(v) for v in raw]
    return raw


def validate_config(raw: Dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(
            f"Invalid configuration value at '{location}': {first['msg']} "
            f"({e.error_count()} problem(s) in total)"
        ) from e


def load_experiment_config(path: Optional[Path] = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """
    Load, override and validate the experiment configuration.

    Args:
        path: YAML file; see `config_path` for the fallbacks
        overrides: 'section.key=value' strings applied after loading

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: If an override or a value is invalid
    """
    raw = _load_experiment_config(config_path(path))
    cfg = validate_config(apply_overrides(raw, overrides))
    workers = os.getenv("EVIDENTIAL_NAV_WORKERS")
    if workers:
        try:
            cfg = cfg.model_copy(update={"workers": max(1, int(workers))})
        except ValueError:
            raise ConfigError(f"EVIDENTIAL_NAV_WORKERS must be an integer, got '{workers}'")
    return cfg


def resolve_output_dir(out: Optional[Path] = None) -> Path:
    out_dir = Path(out) if out is not None else OUTPUT_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or os.getenv("EVIDENTIAL_NAV_LOG_LEVEL", "INFO")).upper()
    numeric = logging.getLevelName(level_name)
    if not isinstance(numeric, int):
        raise ConfigError(f"Unknown log level '{level_name}'")
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        force=True,
    )


def list_sections() -> Dict[str, str]:
    """
    List the configuration sections with their descriptions.

    Returns:
        Dictionary mapping section names to the validating model's name
    """
    return {
        name: getattr(field.annotation, "__name__", str(field.annotation))
        for name, field in ExperimentConfig.model_fields.items()
    }


if __name__ == "__main__":
    print("Testing Config Manager\n")
    print(f"Config file: {config_path()}")

    print("\nSections:")
    for name, model in list_sections().items():
        print(f"  {name}: {model}")

    try:
        cfg = load_experiment_config()
        print(f"\n✓ Configuration valid: {len(cfg.benchmark.methods)} learning methods, "
              f"{len(cfg.benchmark.nav_methods)} navigation methods")
    except Exception as e:
        print(f"✗ Error: {e}")
