"""
Affine-coupling normalizing flow used as the latent density estimator.

The flow maps a latent z to a base-space u through a stack of couplings; the
density of z is the standard-normal density of u times |det du/dz|. Each
coupling keeps one half of the coordinates, feeds it to a small conditioner
MLP, and rescales/shifts the other half. The scale head starts at zero so a
freshly built flow is the identity map.
"""

from __future__ import annotations

import numpy as np

from evidential_nav.autodiff_nn.layers import Activation, Layer, Mlp, MlpConfig, Tensor
from evidential_nav.utils.errors import DomainError

LOG_2PI = float(np.log(2.0 * np.pi))


class AffineCoupling(Layer):
    def __init__(self, dim: int, hidden: int, flip: bool, rng: np.random.Generator, name: str,
                 scale_clamp: float = 3.0):
        self.dim = dim
        n_pass = dim // 2
        order = np.arange(dim)
        if flip:
            order = order[::-1]
        self.pass_idx = np.sort(order[:n_pass])
        self.trans_idx = np.sort(order[n_pass:])
        self.scale_clamp = scale_clamp
        n_trans = len(self.trans_idx)
        self.conditioner = Mlp(
            MlpConfig(layer_widths=[max(n_pass, 1), hidden, 2 * n_trans], activation=Activation.TANH),
            name=f"{name}.conditioner",
            rng=rng,
            zero_last=True,
        )
        self._cache = None

    def _conditioner_input(self, x):
        if len(self.pass_idx) == 0:
            return np.zeros((x.shape[0], 1))
        return x[:, self.pass_idx]

    def _scale_shift(self, x, record):
        h = self.conditioner.forward(self._conditioner_input(x), record=record)
        n_trans = len(self.trans_idx)
        raw, shift = h[:, :n_trans], h[:, n_trans:]
        squashed = np.tanh(raw / self.scale_clamp)
        return self.scale_clamp * squashed, shift, squashed

    def forward(self, x, record=True):
        log_scale, shift, squashed = self._scale_shift(x, record)
        xb = x[:, self.trans_idx]
        scale = np.exp(log_scale)
        out = x.copy()
        out[:, self.trans_idx] = xb * scale + shift
        if record:
            self._cache = (xb, scale, squashed)
        return out, log_scale.sum(axis=1)

    def backward(self, grad_output, grad_logdet):
        xb, scale, squashed = self._cache
        g_ub = grad_output[:, self.trans_idx]
        g_xb = g_ub * scale
        g_log_scale = g_ub * xb * scale + grad_logdet[:, None]
        g_raw = g_log_scale * (1.0 - squashed ** 2)
        g_h = np.concatenate([g_raw, g_ub], axis=1)
        g_cond_in = self.conditioner.backward(g_h)
        grad_input = np.zeros_like(grad_output)
        grad_input[:, self.trans_idx] = g_xb
        if len(self.pass_idx):
            grad_input[:, self.pass_idx] = grad_output[:, self.pass_idx] + g_cond_in
        return grad_input

    def inverse(self, u):
        log_scale, shift, _ = self._scale_shift(u, record=False)
        out = u.copy()
        out[:, self.trans_idx] = (u[:, self.trans_idx] - shift) * np.exp(-log_scale)
        return out

    def parameters(self):
        return self.conditioner.parameters()


class FlowDensity:
    """Standard-normal base density pushed through alternating affine couplings."""

    def __init__(self, latent_dim: int = 8, n_layers: int = 4, hidden: int = 16, seed: int = 0,
                 name: str = "flow", rng: np.random.Generator | None = None):
        if latent_dim < 1:
            raise DomainError(f"latent_dim must be positive, got {latent_dim}")
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.latent_dim = latent_dim
        self.layers = [
            AffineCoupling(latent_dim, hidden, flip=bool(i % 2), rng=rng, name=f"{name}.{i}")
            for i in range(n_layers)
        ]
        self._base = None

    def forward(self, z, record=False):
        """Map latent z to base space u; returns (u, log|det du/dz|)."""
        u = z
        logdet = np.zeros(z.shape[0])
        for layer in self.layers:
            u, ld = layer.forward(u, record=record)
            logdet = logdet + ld
        return u, logdet

    def inverse(self, u):
        z = u
        for layer in reversed(self.layers):
            z = layer.inverse(z)
        return z

    def log_density(self, z: np.ndarray, record: bool = True) -> np.ndarray:
        u, logdet = self.forward(z, record=record)
        if record:
            self._base = u
        return -0.5 * np.sum(u * u, axis=1) - 0.5 * self.latent_dim * LOG_2PI + logdet

    def backward(self, grad_log_density: np.ndarray) -> np.ndarray:
        """Back-propagate d loss / d log_density to parameters; returns d loss / d z."""
        grad = -self._base * grad_log_density[:, None]
        for layer in reversed(self.layers):
            grad = layer.backward(grad, grad_log_density)
        return grad

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


def base_log_density(z: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(z)
    return -0.5 * np.sum(z * z, axis=1) - 0.5 * z.shape[1] * LOG_2PI


def flow_log_density(flow: FlowDensity, z) -> float:
    """Log density of a single latent vector under the flow."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (flow.latent_dim,):
        raise DomainError(f"Expected a latent vector of length {flow.latent_dim}, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise DomainError(f"Latent vector must be finite: {z}")
    return float(flow.log_density(z[None, :], record=False)[0])
