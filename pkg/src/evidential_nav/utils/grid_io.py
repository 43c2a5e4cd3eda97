"""
Text grid files for terrain maps and CVaR map stacks.

    format: evidential_nav.terrain        (or evidential_nav.cvar)
    version: 1
    <key>: <value>                        one header line per key
    [section]
    <rows of space-separated numbers>     np.savetxt, %.17g
    [section]
    ...

Values are written with 17 significant digits so a load reproduces the
saved arrays exactly.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from evidential_nav.predictor.cvar_maps import CvarMapStack
from evidential_nav.simulator.terrain import TerrainMap
from evidential_nav.utils.errors import FormatError

GRID_VERSION = 1
TERRAIN_FORMAT = "evidential_nav.terrain"
CVAR_FORMAT = "evidential_nav.cvar"
NUMBER_FORMAT = "%.17g"


def _write(path: Path, header: dict, sections: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for key, value in header.items():
            f.write(f"{key}: {value}\n")
        for name, grid in sections.items():
            f.write(f"[{name}]\n")
            np.savetxt(f, np.atleast_2d(grid), fmt=NUMBER_FORMAT)
    return path


def _read(path: Path, expected_format: str) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Grid file not found at {path}")
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current = None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = []
            elif current is None:
                key, sep, value = line.partition(":")
                if not sep:
                    raise FormatError(f"{path}: malformed header line '{line}'")
                header[key.strip()] = value.strip()
            else:
                sections[current].append(line)
    if header.get("format") != expected_format:
        raise FormatError(f"{path}: expected format '{expected_format}', found '{header.get('format')}'")
    if header.get("version") != str(GRID_VERSION):
        raise FormatError(f"{path}: unsupported version '{header.get('version')}' (expected {GRID_VERSION})")
    try:
        arrays = {name: np.loadtxt(io.StringIO("\n".join(lines)), ndmin=2) for name, lines in sections.items()}
    except ValueError as e:
        raise FormatError(f"{path}: non-numeric grid data: {e}") from e
    return header, arrays


def _int(header: dict, key: str, path) -> int:
    try:
        return int(header[key])
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: header needs an integer '{key}'") from e


def _float(header: dict, key: str, path) -> float:
    try:
        return float(header[key])
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: header needs a number '{key}'") from e


def _section(arrays: dict, name: str, shape: tuple, path) -> np.ndarray:
    if name not in arrays:
        raise FormatError(f"{path}: missing [{name}] section")
    grid = arrays[name]
    if grid.size != int(np.prod(shape)):
        raise FormatError(f"{path}: [{name}] holds {grid.size} values, header implies {shape}")
    return grid.reshape(shape)


def save_terrain(terrain: TerrainMap, path) -> Path:
    rows, cols = terrain.shape
    header = {
        "format": TERRAIN_FORMAT,
        "version": GRID_VERSION,
        "resolution": repr(float(terrain.resolution)),
        "rows": rows,
        "cols": cols,
        "seed": int(terrain.seed),
        "scale": repr(float(terrain.scale)),
    }
    return _write(path, header, {
        "elevation": terrain.elevation,
        "semantic": terrain.semantic,
        "veg_height": terrain.veg_height,
    })


def load_terrain(path) -> TerrainMap:
    header, arrays = _read(path, TERRAIN_FORMAT)
    shape = (_int(header, "rows", path), _int(header, "cols", path))
    return TerrainMap(
        resolution=_float(header, "resolution", path),
        elevation=_section(arrays, "elevation", shape, path),
        semantic=_section(arrays, "semantic", shape, path).astype(np.int64),
        veg_height=_section(arrays, "veg_height", shape, path),
        seed=_int(header, "seed", path),
        scale=_float(header, "scale", path),
    )


def save_cvar_maps(stack: CvarMapStack, path) -> Path:
    rows, cols, n_yaw, n_params = stack.values.shape
    header = {
        "format": CVAR_FORMAT,
        "version": GRID_VERSION,
        "resolution": repr(float(stack.resolution)),
        "dims": f"{rows} {cols} {n_yaw} {n_params}",
        "alpha": repr(float(stack.alpha)),
        "method": stack.method,
    }
    return _write(path, header, {
        "values": stack.values.reshape(rows * cols * n_yaw, n_params),
        "ood": stack.ood.reshape(rows * cols, n_yaw).astype(np.int64),
    })


def load_cvar_maps(path) -> CvarMapStack:
    header, arrays = _read(path, CVAR_FORMAT)
    try:
        rows, cols, n_yaw, n_params = (int(v) for v in header["dims"].split())
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: header needs 'dims: rows cols n_yaw n_params'") from e
    return CvarMapStack(
        values=_section(arrays, "values", (rows, cols, n_yaw, n_params), path),
        ood=_section(arrays, "ood", (rows, cols, n_yaw), path).astype(bool),
        resolution=_float(header, "resolution", path),
        alpha=_float(header, "alpha", path),
        method=header.get("method", ""),
    )
