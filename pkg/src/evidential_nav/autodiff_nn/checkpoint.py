"""
Parameter checkpoints.

A checkpoint is an uncompressed `.npz` archive mapping parameter names to float64
arrays (shapes are carried by the arrays). Two reserved keys hold a format
version and a JSON metadata blob. No pickled objects are written, so loading
runs with `allow_pickle=False`.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from evidential_nav.autodiff_nn.layers import Tensor
from evidential_nav.utils.errors import FormatError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_VERSION_KEY = "__format_version__"
_METADATA_KEY = "__metadata__"


def save_checkpoint(path: Path, tensors: list[Tensor], metadata: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for t in tensors:
        if t.name in arrays or t.name.startswith("__"):
            raise FormatError(f"Duplicate or reserved parameter name in checkpoint: {t.name}")
        arrays[t.name] = np.asarray(t.values, dtype=np.float64)
    arrays[_VERSION_KEY] = np.array(CHECKPOINT_VERSION, dtype=np.int64)
    arrays[_METADATA_KEY] = np.array(json.dumps(metadata or {}, sort_keys=True))
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    logger.info("Saved %d parameter arrays to %s", len(tensors), path)
    return path


def load_checkpoint(path: Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint.

    Returns:
        (name -> array mapping, metadata dict)

    Raises:
        FileNotFoundError: If the checkpoint does not exist
        FormatError: If the file is not a checkpoint of a supported version
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found at {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {key: data[key] for key in data.files}
    except (ValueError, OSError) as e:
        raise FormatError(f"Could not read checkpoint {path}: {e}") from e
    if _VERSION_KEY not in arrays:
        raise FormatError(f"{path} has no format version key")
    version = int(arrays.pop(_VERSION_KEY))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path} has checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    metadata = json.loads(str(arrays.pop(_METADATA_KEY, np.array("{}"))))
    return arrays, metadata


def assign_parameters(tensors: list[Tensor], arrays: dict[str, np.ndarray], source: str = "checkpoint"):
    """Copy loaded arrays into tensors, checking names and shapes."""
    missing = [t.name for t in tensors if t.name not in arrays]
    if missing:
        raise FormatError(f"{source} is missing parameters: {', '.join(missing[:5])}")
    for t in tensors:
        values = arrays[t.name]
        if values.shape != t.values.shape:
            raise FormatError(f"{source}: {t.name} has shape {values.shape}, expected {t.values.shape}")
        t.values[...] = values
