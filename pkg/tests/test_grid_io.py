import numpy as np
import pytest

from evidential_nav.predictor.cvar_maps import CvarMapStack
from evidential_nav.simulator.terrain import generate_map
from evidential_nav.utils.errors import FormatError
from evidential_nav.utils.grid_io import load_cvar_maps, load_terrain, save_cvar_maps, save_terrain


@pytest.fixture
def terrain():
    return generate_map(seed=21, size_m=5.0, resolution=0.25, scale=1.3, veg_fraction=0.3)


@pytest.fixture
def stack(rng):
    values = rng.uniform(0, 1, size=(3, 5, 4, 4)) / 7.0
    ood = rng.uniform(size=(3, 5, 4)) < 0.3
    return CvarMapStack(values, ood, 0.25, 0.6, "PIETRA+avoid-OOD")


class TestTerrainFiles:
    def test_round_trip_is_exact(self, tmp_path, terrain):
        loaded = load_terrain(save_terrain(terrain, tmp_path / "maps" / "map.grid"))
        np.testing.assert_array_equal(loaded.elevation, terrain.elevation)
        np.testing.assert_array_equal(loaded.semantic, terrain.semantic)
        np.testing.assert_array_equal(loaded.veg_height, terrain.veg_height)
        assert (loaded.resolution, loaded.seed, loaded.scale) == (terrain.resolution, terrain.seed, terrain.scale)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_terrain(tmp_path / "absent.grid")

    def test_wrong_format(self, tmp_path, stack):
        path = save_cvar_maps(stack, tmp_path / "cvar.grid")
        with pytest.raises(FormatError, match="expected format"):
            load_terrain(path)

    def test_wrong_version(self, tmp_path, terrain):
        path = save_terrain(terrain, tmp_path / "map.grid")
        path.write_text(path.read_text().replace("version: 1", "version: 7", 1))
        with pytest.raises(FormatError, match="version"):
            load_terrain(path)

    def test_truncated_section(self, tmp_path, terrain):
        path = save_terrain(terrain, tmp_path / "map.grid")
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(FormatError, match="veg_height"):
            load_terrain(path)

    def test_non_numeric_data(self, tmp_path, terrain):
        path = save_terrain(terrain, tmp_path / "map.grid")
        path.write_text(path.read_text().replace("[semantic]\n", "[semantic]\nabc def\n"))
        with pytest.raises(FormatError):
            load_terrain(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "map.grid"
        path.write_text("format evidential_nav.terrain\n[elevation]\n0 0\n")
        with pytest.raises(FormatError, match="header"):
            load_terrain(path)


class TestCvarFiles:
    def test_round_trip_is_exact(self, tmp_path, stack):
        loaded = load_cvar_maps(save_cvar_maps(stack, tmp_path / "cvar.grid"))
        np.testing.assert_array_equal(loaded.values, stack.values)
        np.testing.assert_array_equal(loaded.ood, stack.ood)
        assert (loaded.resolution, loaded.alpha, loaded.method) == (0.25, 0.6, "PIETRA+avoid-OOD")

    def test_lookups_survive_round_trip(self, tmp_path, stack, rng):
        loaded = load_cvar_maps(save_cvar_maps(stack, tmp_path / "cvar.grid"))
        xs, ys, yaws = rng.uniform(0, 1.2, 20), rng.uniform(0, 0.7, 20), rng.uniform(-np.pi, np.pi, 20)
        for a, b in zip(stack.lookup(xs, ys, yaws), loaded.lookup(xs, ys, yaws)):
            np.testing.assert_array_equal(a, b)

    def test_bad_dims(self, tmp_path, stack):
        path = save_cvar_maps(stack, tmp_path / "cvar.grid")
        path.write_text(path.read_text().replace("dims: 3 5 4 4", "dims: 3 5 4"))
        with pytest.raises(FormatError, match="dims"):
            load_cvar_maps(path)

    def test_size_mismatch(self, tmp_path, stack):
        path = save_cvar_maps(stack, tmp_path / "cvar.grid")
        path.write_text(path.read_text().replace("dims: 3 5 4 4", "dims: 3 6 4 4"))
        with pytest.raises(FormatError, match="values"):
            load_cvar_maps(path)
