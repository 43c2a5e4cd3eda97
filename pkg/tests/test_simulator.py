import numpy as np
import pytest

from evidential_nav.predictor.features import FeatureConfig
from evidential_nav.simulator.episodes import (
    CollectionConfig,
    DatasetRecord,
    collect_episodes,
    label_records,
    load_dataset,
    records_to_batch,
    run_episode,
    save_dataset,
    split_dataset,
    unevenness_threshold,
)
from evidential_nav.simulator.ground_truth import (
    GroundTruthConfig,
    attitude_law,
    ground_truth_batch,
    ground_truth_traversability,
    traction_mean_law,
)
from evidential_nav.simulator.robot import (
    ControlInput,
    RobotParams,
    RobotState,
    TraversabilitySample,
    bicycle_update,
    body_to_world,
    sample_wheel_contacts,
    step_bicycle,
)
from evidential_nav.simulator.terrain import DIRT, VEG, TerrainMap, diamond_square, generate_map
from evidential_nav.stages.gen_maps import footprint_unevenness
from evidential_nav.utils.errors import DomainError, FormatError

FULL = TraversabilitySample(1.0, 1.0, 0.0, 0.0)


def ramp_map(grade: float, size_m: float = 10.0, resolution: float = 0.25) -> TerrainMap:
    """Plane rising along +x with the given rise/run."""
    cells = int(round(size_m / resolution))
    xs = (np.arange(cells) + 0.5) * resolution
    elevation = np.tile(grade * xs, (cells, 1))
    return TerrainMap(resolution, elevation, np.zeros((cells, cells), dtype=int), np.zeros((cells, cells)))


class TestTerrain:
    def test_diamond_square_shape(self, rng):
        assert diamond_square(3, 0.5, rng).shape == (9, 9)

    def test_zero_scale_is_flat(self):
        terrain = generate_map(seed=3, size_m=10, resolution=0.5, scale=0.0)
        assert np.ptp(terrain.elevation) == 0.0

    def test_deterministic_per_seed(self):
        a = generate_map(seed=11, size_m=10, resolution=0.5, scale=1.0, veg_fraction=0.2)
        b = generate_map(seed=11, size_m=10, resolution=0.5, scale=1.0, veg_fraction=0.2)
        np.testing.assert_array_equal(a.elevation, b.elevation)
        np.testing.assert_array_equal(a.semantic, b.semantic)

    def test_std_scales_linearly(self):
        ratios = []
        for seed in range(10):
            one = generate_map(seed=seed, size_m=10, resolution=0.25, scale=1.0).elevation.std()
            two = generate_map(seed=seed, size_m=10, resolution=0.25, scale=2.0).elevation.std()
            ratios.append(two / one)
        assert 1.8 <= np.mean(ratios) <= 2.2

    def test_doubled_scale_is_more_uneven(self, tiny_config):
        for seed in range(5):
            one = generate_map(seed=seed, size_m=10, resolution=0.25, scale=1.0)
            two = generate_map(seed=seed, size_m=10, resolution=0.25, scale=2.0)
            assert (np.median(footprint_unevenness(two, tiny_config))
                    > np.median(footprint_unevenness(one, tiny_config)))

    def test_veg_fraction(self):
        terrain = generate_map(seed=5, size_m=20, resolution=0.25, scale=1.0, veg_fraction=0.3)
        assert np.mean(terrain.semantic == VEG) == pytest.approx(0.3, abs=0.05)
        assert np.all(terrain.veg_height[terrain.semantic == DIRT] == 0.0)
        assert np.all(terrain.veg_height[terrain.semantic == VEG] > 0.0)

    def test_rejects_vegetation_on_dirt(self):
        with pytest.raises(DomainError):
            TerrainMap(0.5, np.zeros((4, 4)), np.zeros((4, 4), dtype=int), np.full((4, 4), 0.1))

    def test_rejects_non_finite_elevation(self):
        elevation = np.zeros((4, 4))
        elevation[1, 1] = np.inf
        with pytest.raises(DomainError):
            TerrainMap(0.5, elevation, np.zeros((4, 4), dtype=int), np.zeros((4, 4)))

    def test_geometry(self, flat_terrain):
        assert flat_terrain.shape == (40, 40)
        assert flat_terrain.extent == (10.0, 10.0)
        assert bool(flat_terrain.contains(0.0, 9.99))
        assert not bool(flat_terrain.contains(10.0, 5.0))
        i, j = flat_terrain.cell_of(1.3, 0.6)
        assert (int(i), int(j)) == (2, 5)

    def test_ramp_slope(self):
        terrain = ramp_map(0.3)
        gx, gy = terrain.slope_at(np.array([5.0]), np.array([5.0]))
        assert gx[0] == pytest.approx(0.3)
        assert gy[0] == pytest.approx(0.0)


class TestBicycle:
    def test_straight_step(self):
        params = RobotParams(dt=0.1)
        state = step_bicycle(RobotState(0.0, 0.0, 0.0), ControlInput(1.0, 0.0), FULL, params)
        assert state.x == pytest.approx(0.1)
        assert state.y == 0.0
        assert state.yaw == 0.0

    def test_zero_linear_traction_still_turns(self):
        params = RobotParams()
        state = step_bicycle(RobotState(1.0, 2.0, 0.3), ControlInput(1.0, 0.2),
                             TraversabilitySample(0.0, 1.0, 0.0, 0.0), params)
        assert (state.x, state.y) == (1.0, 2.0)
        assert state.yaw > 0.3

    def test_yaw_increment_linear_in_angular_traction(self):
        params = RobotParams()
        start = RobotState(0.0, 0.0, 0.0)
        full = step_bicycle(start, ControlInput(1.0, 0.2), FULL, params)
        half = step_bicycle(start, ControlInput(1.0, 0.2), TraversabilitySample(1.0, 0.5, 0.0, 0.0), params)
        assert half.yaw == pytest.approx(0.5 * full.yaw)

    def test_reduces_to_kinematic_bicycle(self, rng):
        params = RobotParams()
        x, y, yaw = rng.normal(size=3)
        v, steer = rng.uniform(0, 2), rng.uniform(-0.5, 0.5)
        nx, ny, nyaw = bicycle_update(x, y, yaw, v, steer, 1.0, 1.0, params.wheelbase, params.dt)
        assert nx == pytest.approx(x + params.dt * v * np.cos(yaw), abs=1e-12)
        assert ny == pytest.approx(y + params.dt * v * np.sin(yaw), abs=1e-12)
        assert nyaw == pytest.approx(yaw + params.dt * v * np.tan(steer) / params.wheelbase, abs=1e-12)

    def test_steering_clamped_below_ninety_degrees(self):
        _, _, yaw = bicycle_update(0.0, 0.0, 0.0, 1.0, np.pi, 1.0, 1.0, 1.5, 0.1)
        assert np.isfinite(yaw)

    def test_control_clamping(self):
        params = RobotParams(max_speed=2.0, max_steer=0.5)
        clamped = ControlInput(5.0, -1.0).clamped(params)
        assert clamped == ControlInput(2.0, -0.5)

    def test_body_to_world(self):
        wx, wy = body_to_world([1.0], [1.0], [np.pi / 2], np.array([1.0]), np.array([0.0]))
        assert wx[0, 0] == pytest.approx(1.0)
        assert wy[0, 0] == pytest.approx(2.0)

    def test_wheel_contacts_on_ramp(self):
        terrain = ramp_map(0.2)
        params = RobotParams()
        uphill = sample_wheel_contacts(terrain, [5.0], [5.0], [0.0], params)
        across = sample_wheel_contacts(terrain, [5.0], [5.0], [np.pi / 2], params)
        np.testing.assert_allclose(uphill.slopes, 0.2, atol=1e-9)
        np.testing.assert_allclose(across.slopes, 0.0, atol=1e-9)
        assert uphill.veg_ratio[0] == 0.0


class TestGroundTruth:
    def test_flat_dirt_statistics(self, flat_terrain, rng):
        n = 10_000
        psi = ground_truth_batch(flat_terrain, np.full(n, 5.0), np.full(n, 5.0), rng.uniform(-np.pi, np.pi, n),
                                 RobotParams(), GroundTruthConfig(), rng)
        assert psi[:, 0].mean() >= 0.95
        assert psi[:, 1].mean() >= 0.95
        assert psi[:, 2].mean() <= 0.01
        assert psi[:, 3].mean() <= 0.01

    def test_slope_at_true_maximum_stops_traction(self, rng):
        cfg = GroundTruthConfig()
        terrain = ramp_map(cfg.true_s_max_linear)
        n = 2000
        psi = ground_truth_batch(terrain, np.full(n, 5.0), np.full(n, 5.0), np.zeros(n), RobotParams(), cfg, rng)
        assert psi[:, 0].mean() <= 0.05

    def test_noise_off_equals_mean_laws(self):
        cfg = GroundTruthConfig(noise=False)
        terrain = ramp_map(0.2)
        params = RobotParams()
        sample = ground_truth_traversability(terrain, RobotState(5.0, 5.0, 0.0), params, None, cfg)
        contacts = sample_wheel_contacts(terrain, [5.0], [5.0], [0.0], params)
        expected = traction_mean_law(contacts.slopes, contacts.veg_heights, contacts.veg_ratio,
                                     cfg.true_s_max_linear, cfg)[0]
        roll, pitch = attitude_law(contacts.heights, params)
        assert sample.psi1 == pytest.approx(expected)
        assert sample.psi3 == pytest.approx(abs(roll[0]))
        assert sample.psi4 == pytest.approx(abs(pitch[0]))
        assert sample.psi4 == pytest.approx(np.arctan(0.2), abs=1e-6)

    def test_deterministic_given_rng(self, flat_terrain):
        a = ground_truth_traversability(flat_terrain, RobotState(3, 3, 0), RobotParams(), np.random.default_rng(5))
        b = ground_truth_traversability(flat_terrain, RobotState(3, 3, 0), RobotParams(), np.random.default_rng(5))
        assert a == b

    def test_off_map(self, flat_terrain, rng):
        with pytest.raises(DomainError):
            ground_truth_traversability(flat_terrain, RobotState(-1.0, 3.0, 0.0), RobotParams(), rng)

    def test_vegetation_lowers_traction(self):
        cfg = GroundTruthConfig()
        slopes = np.zeros((1, 4))
        bare = traction_mean_law(slopes, np.zeros((1, 4)), np.array([1.0]), cfg.true_s_max_linear, cfg)
        grown = traction_mean_law(slopes, np.full((1, 4), 0.2), np.array([1.0]), cfg.true_s_max_linear, cfg)
        assert grown[0] < bare[0]


class TestCollection:
    def test_flat_map_never_rolls_over(self, flat_terrain, rng):
        cfg = CollectionConfig(max_steps=30)
        records = collect_episodes(flat_terrain, RobotParams(), 5, rng, cfg)
        assert all(r.target.psi3 < cfg.rollover_angle for r in records)

    def test_every_episode_records(self, flat_terrain):
        cfg = CollectionConfig(max_steps=5, start_margin=1.0)
        counts = [len(collect_episodes(flat_terrain, RobotParams(), n, np.random.default_rng(0), cfg))
                  for n in (1, 4, 8)]
        assert counts[0] >= 1
        assert counts[0] <= counts[1] <= counts[2]
        assert counts[2] >= 8

    def test_deterministic_across_worker_counts(self):
        terrain = generate_map(seed=2, size_m=10, resolution=0.5, scale=1.0)
        cfg = CollectionConfig(max_steps=10, start_margin=1.0)
        serial = collect_episodes(terrain, RobotParams(), 3, np.random.default_rng(9), cfg, n_workers=1)
        parallel = collect_episodes(terrain, RobotParams(), 3, np.random.default_rng(9), cfg, n_workers=2)
        assert len(serial) == len(parallel)
        for a, b in zip(serial, parallel):
            assert a.target == b.target
            np.testing.assert_array_equal(a.feature.elevation_patch, b.feature.elevation_patch)

    def test_episodes_end_within_one_cell_of_the_map(self, flat_terrain):
        cfg = CollectionConfig(max_steps=600, start_margin=0.0)
        width, height = flat_terrain.extent
        cell = flat_terrain.resolution
        terminations = set()
        for child in np.random.SeedSequence(5).spawn(12):
            batch, targets, summary = run_episode(flat_terrain, RobotParams(), cfg, GroundTruthConfig(),
                                                  FeatureConfig(), child)
            x, y, _ = summary.final_pose
            assert -cell <= x < width + cell
            assert -cell <= y < height + cell
            assert len(batch) == len(targets) == summary.steps
            terminations.add(summary.termination)
        assert "exit" in terminations

    def test_step_longer_than_a_cell(self, flat_terrain, rng):
        with pytest.raises(DomainError):
            collect_episodes(flat_terrain, RobotParams(), 1, rng, CollectionConfig(speed=5.0))

    def test_records_stack_into_a_batch(self):
        terrain = generate_map(seed=4, size_m=8, resolution=0.5, scale=1.0)
        records = collect_episodes(terrain, RobotParams(), 4, np.random.default_rng(1),
                                   CollectionConfig(max_steps=200, start_margin=1.0))
        batch, _ = records_to_batch(records)
        assert len(batch) == len(records)
        assert all(r.unevenness >= 0 for r in records)


def _record(unevenness, split, template):
    return DatasetRecord(template.feature, template.target, unevenness, 0, split)


@pytest.fixture
def template(flat_terrain, rng):
    return collect_episodes(flat_terrain, RobotParams(), 1, rng, CollectionConfig(max_steps=1))[0]


class TestSplit:
    def test_empty(self):
        with pytest.raises(DomainError):
            split_dataset([])
        with pytest.raises(DomainError):
            unevenness_threshold([])

    def test_identical_unevenness_is_all_id(self, template):
        records = [_record(0.1, "train", template) for _ in range(10)]
        train_id, _, _ = split_dataset(records)
        assert len(train_id) == 10

    def test_uniform_spread_halves(self, template):
        records = [_record(u, "train", template) for u in np.linspace(0, 1, 21)]
        train_id, _, _ = split_dataset(records, 50.0)
        assert abs(len(train_id) - 10.5) <= 1

    def test_percentile_100_is_all_id(self, template):
        records = [_record(u, "train", template) for u in np.linspace(0, 1, 9)]
        labeled, threshold = label_records(records, 100.0)
        assert threshold == pytest.approx(1.0)
        assert all(r.in_distribution for r in labeled)

    def test_threshold_comes_from_training_records(self, template):
        records = ([_record(u, "train", template) for u in (0.1, 0.2, 0.3)]
                   + [_record(u, "test", template) for u in (0.15, 0.5, 0.9)])
        train_id, val_id, test_all = split_dataset(records, 50.0)
        assert [r.unevenness for r in train_id] == [0.1, 0.2]
        assert val_id == []
        assert [r.in_distribution for r in test_all] == [True, False, False]


class TestDatasetFile:
    def test_round_trip(self, tmp_path):
        terrain = generate_map(seed=1, size_m=8, resolution=0.5, scale=1.0, veg_fraction=0.3)
        records = collect_episodes(terrain, RobotParams(), 2, np.random.default_rng(3),
                                   CollectionConfig(max_steps=5, start_margin=1.0), map_id=4, split="val")
        loaded = load_dataset(save_dataset(records, tmp_path / "dataset.jsonl"))
        assert len(loaded) == len(records)
        for a, b in zip(records, loaded):
            assert a.target == b.target
            assert a.unevenness == b.unevenness
            assert (a.map_id, a.split) == (b.map_id, b.split)
            np.testing.assert_array_equal(a.feature.elevation_patch, b.feature.elevation_patch)
            np.testing.assert_array_equal(a.feature.footprint.wheel_slopes, b.feature.footprint.wheel_slopes)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "absent.jsonl")

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "other.jsonl"
        path.write_text('{"format": "something-else", "version": 1, "count": 0}\n')
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_truncated(self, tmp_path, template):
        path = save_dataset([template, template], tmp_path / "d.jsonl")
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(FormatError):
            load_dataset(path)
