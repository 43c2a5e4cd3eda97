import numpy as np
import pytest
from pydantic import ValidationError

from evidential_nav.autodiff_nn import (
    Adam,
    AdamState,
    Dense,
    FlowDensity,
    Mlp,
    MlpConfig,
    Tensor,
    adam_step,
    assign_parameters,
    base_log_density,
    clip_grad_norm,
    flow_log_density,
    load_checkpoint,
    mlp_forward,
    save_checkpoint,
)
from evidential_nav.utils.errors import DomainError, FormatError


def _finite_difference_check(forward, tensors, h=1e-5):
    """Largest relative error between stored grads and central differences of forward()."""
    worst = 0.0
    for t in tensors:
        flat = t.values.reshape(-1)
        grad = t.grad.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + h
            up = forward()
            flat[k] = original - h
            down = forward()
            flat[k] = original
            numeric = (up - down) / (2 * h)
            worst = max(worst, abs(numeric - grad[k]) / max(abs(numeric), abs(grad[k]), 1e-6))
    return worst


class TestMlp:
    def test_config_needs_hidden_layer(self):
        with pytest.raises(ValidationError):
            MlpConfig(layer_widths=[3, 2])

    def test_config_rejects_zero_width(self):
        with pytest.raises(ValidationError):
            MlpConfig(layer_widths=[3, 0, 2])

    def test_zero_weights_give_zero_output(self):
        mlp = Mlp(MlpConfig(layer_widths=[3, 5, 2]), "zero")
        for p in mlp.parameters():
            p.values[...] = 0.0
        np.testing.assert_array_equal(mlp_forward(mlp, np.array([0.3, -1.0, 2.0])), np.zeros(2))

    def test_identity_dense_layer(self, rng):
        dense = Dense(4, 4, rng, "eye")
        dense.weight.values[...] = np.eye(4)
        x = rng.normal(size=4)
        np.testing.assert_allclose(mlp_forward(dense, x), x)

    def test_width_mismatch(self):
        mlp = Mlp(MlpConfig(layer_widths=[3, 5, 2]), "m")
        with pytest.raises(DomainError):
            mlp_forward(mlp, np.zeros(4))

    def test_same_seed_same_initialization(self):
        a = Mlp(MlpConfig(layer_widths=[3, 5, 2], seed=7), "m")
        b = Mlp(MlpConfig(layer_widths=[3, 5, 2], seed=7), "m")
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.values, pb.values)

    @pytest.mark.parametrize("activation, head", [("tanh", None), ("relu", None), ("tanh", "softmax"),
                                                  ("tanh", "sigmoid")])
    def test_backward_matches_finite_differences(self, rng, activation, head):
        mlp = Mlp(MlpConfig(layer_widths=[4, 8, 6, 3], activation=activation, seed=3), "m", head=head)
        x = rng.normal(size=(5, 4))
        weights = rng.normal(size=(5, 3))

        def forward():
            return float(np.sum(mlp.forward(x, record=False) * weights))

        out = mlp.forward(x)
        for p in mlp.parameters():
            p.zero_grad()
        grad_input = mlp.backward(weights)
        assert out.shape == (5, 3)
        assert _finite_difference_check(forward, mlp.parameters()) < 1e-4

        numeric = np.zeros_like(x)
        for idx in np.ndindex(*x.shape):
            original = x[idx]
            x[idx] = original + 1e-5
            up = forward()
            x[idx] = original - 1e-5
            down = forward()
            x[idx] = original
            numeric[idx] = (up - down) / 2e-5
        np.testing.assert_allclose(grad_input, numeric, rtol=1e-4, atol=1e-8)

    def test_softmax_head_rows_sum_to_one(self, rng):
        mlp = Mlp(MlpConfig(layer_widths=[4, 8, 12]), "m", head="softmax")
        out = mlp_forward(mlp, rng.normal(size=(6, 4)))
        np.testing.assert_allclose(out.sum(axis=1), 1.0)
        assert np.all(out > 0)


class TestFlow:
    def test_identity_at_origin(self):
        flow = FlowDensity(latent_dim=2, n_layers=4, hidden=8, seed=0)
        assert flow_log_density(flow, np.zeros(2)) == pytest.approx(np.log(1.0 / (2.0 * np.pi)), abs=1e-9)

    def test_identity_matches_base(self, rng):
        flow = FlowDensity(latent_dim=5, n_layers=3, hidden=8, seed=1)
        z = rng.normal(size=(20, 5)) * 2.0
        np.testing.assert_allclose(flow.log_density(z, record=False), base_log_density(z), atol=1e-9)

    def test_rejects_non_finite(self):
        flow = FlowDensity(latent_dim=2)
        with pytest.raises(DomainError):
            flow_log_density(flow, np.array([np.nan, 0.0]))

    def test_rejects_wrong_dimension(self):
        flow = FlowDensity(latent_dim=2)
        with pytest.raises(DomainError):
            flow_log_density(flow, np.zeros(3))

    @staticmethod
    def _randomize(flow, rng, scale=0.5):
        for p in flow.parameters():
            p.values[...] = rng.normal(scale=scale, size=p.shape)

    def test_inverse_round_trip(self, rng):
        flow = FlowDensity(latent_dim=4, n_layers=4, hidden=8, seed=2)
        self._randomize(flow, rng)
        z = rng.normal(size=(50, 4))
        u, _ = flow.forward(z)
        np.testing.assert_allclose(flow.inverse(u), z, atol=1e-8)

    def test_integrates_to_one(self, rng):
        flow = FlowDensity(latent_dim=2, n_layers=4, hidden=8, seed=3)
        self._randomize(flow, rng, scale=0.3)
        # importance sampling with a wide Gaussian proposal
        sigma = 3.0
        z = rng.normal(scale=sigma, size=(200_000, 2))
        log_q = base_log_density(z / sigma) - 2.0 * np.log(sigma)
        weights = np.exp(flow.log_density(z, record=False) - log_q)
        assert weights.mean() == pytest.approx(1.0, abs=5e-2)

    def test_backward_matches_finite_differences(self, rng):
        flow = FlowDensity(latent_dim=3, n_layers=2, hidden=4, seed=4)
        self._randomize(flow, rng, scale=0.4)
        z = rng.normal(size=(6, 3))
        weights = rng.normal(size=6)

        def forward():
            return float(np.sum(flow.log_density(z, record=False) * weights))

        flow.log_density(z, record=True)
        for p in flow.parameters():
            p.zero_grad()
        grad_z = flow.backward(weights)
        assert _finite_difference_check(forward, flow.parameters()) < 1e-4

        numeric = np.zeros_like(z)
        for idx in np.ndindex(*z.shape):
            original = z[idx]
            z[idx] = original + 1e-5
            up = forward()
            z[idx] = original - 1e-5
            down = forward()
            z[idx] = original
            numeric[idx] = (up - down) / 2e-5
        np.testing.assert_allclose(grad_z, numeric, rtol=1e-4, atol=1e-8)


class TestAdam:
    def test_first_step_moves_by_lr(self):
        params, _ = adam_step([np.array([1.0])], [np.array([2.0])], None, lr=0.1)
        assert params[0][0] == pytest.approx(0.9, abs=1e-6)

    def test_zero_gradient_leaves_params(self):
        w = np.array([0.5, -2.0])
        params, state = adam_step([w], [np.zeros(2)], AdamState(), lr=0.1)
        np.testing.assert_array_equal(params[0], w)
        assert state.step == 1

    def test_quadratic_bowl(self):
        w = Tensor(np.array([1.0, -0.5, 0.25]), "w")
        opt = Adam([w], lr=0.1, max_grad_norm=None)
        norms = []
        for _ in range(100):
            opt.zero_grad()
            w.grad[...] = 2.0 * w.values
            opt.step()
            norms.append(np.linalg.norm(w.values))
        assert norms[-1] < 1e-2
        assert norms[5] < norms[0]

    def test_mismatched_lists(self):
        with pytest.raises(ValueError):
            adam_step([np.zeros(2)], [], None, lr=0.1)

    def test_clip_grad_norm(self):
        a = Tensor(np.zeros(2), "a")
        b = Tensor(np.zeros(1), "b")
        a.grad[...] = [3.0, 0.0]
        b.grad[...] = [4.0]
        assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
        total = np.sqrt(np.sum(a.grad ** 2) + np.sum(b.grad ** 2))
        assert total == pytest.approx(1.0, rel=1e-9)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        mlp = Mlp(MlpConfig(layer_widths=[3, 4, 2]), "m")
        for p in mlp.parameters():
            p.values[...] = rng.normal(size=p.shape) * 1e3 / 7.0
        path = save_checkpoint(tmp_path / "ckpt.npz", mlp.parameters(), {"method": "PIETRA"})

        arrays, meta = load_checkpoint(path)
        assert meta == {"method": "PIETRA"}
        fresh = Mlp(MlpConfig(layer_widths=[3, 4, 2], seed=99), "m")
        assign_parameters(fresh.parameters(), arrays)
        for a, b in zip(mlp.parameters(), fresh.parameters()):
            np.testing.assert_array_equal(a.values, b.values)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent.npz")

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "bad.npz"
        path.write_text("not a checkpoint")
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_shape_mismatch(self, tmp_path):
        small = Mlp(MlpConfig(layer_widths=[3, 4, 2]), "m")
        path = save_checkpoint(tmp_path / "ckpt.npz", small.parameters())
        arrays, _ = load_checkpoint(path)
        big = Mlp(MlpConfig(layer_widths=[3, 5, 2]), "m")
        with pytest.raises(FormatError):
            assign_parameters(big.parameters(), arrays)

    def test_duplicate_names(self, tmp_path):
        with pytest.raises(FormatError):
            save_checkpoint(tmp_path / "dup.npz", [Tensor([1.0], "x"), Tensor([2.0], "x")])
