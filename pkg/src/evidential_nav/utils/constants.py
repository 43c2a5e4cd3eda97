import os
from datetime import datetime
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

NOW_DT: datetime = datetime.now()
DATE_TODAY: str = NOW_DT.strftime("%Y-%m-%d")

# Project directories
REPO_ROOT = Path(__file__).resolve().parents[3]
PACKAGE_DIR = Path(__file__).resolve().parents[1]
CONFIG_DIR = PACKAGE_DIR / "config"
DEFAULT_CONFIG_PATH = CONFIG_DIR / "experiment.yaml"

OUTPUT_DIR = Path(os.getenv("EVIDENTIAL_NAV_OUTPUT_DIR", REPO_ROOT / "outputs" / DATE_TODAY))

# Artifact layout under an output directory
MAPS_DIRNAME = "maps"
MAP_SUMMARY_FILE = "map_summary.csv"
DATASET_FILE = "dataset.jsonl"
CHECKPOINTS_DIRNAME = "checkpoints"
TRAINING_CURVES_FILE = "training_curves.csv"
LEARNING_RESULTS_FILE = "learning_results.csv"
LEARNING_RECORDS_FILE = "learning_records.csv"
UNEVENNESS_BINS_FILE = "error_vs_unevenness.csv"
NAV_EPISODES_FILE = "nav_episodes.csv"
NAV_SUMMARY_FILE = "nav_summary.csv"
REPORT_FILE = "report.md"

# Every emitted CSV carries this in a schema_version column
SCHEMA_VERSION = 1

# Console colours
RED = "\033[91m"
GREEN = "\033[92m"
YELLOW = "\033[93m"
RESET = "\033[0m"
