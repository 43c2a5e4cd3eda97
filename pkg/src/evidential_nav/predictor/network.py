"""
The evidential traversability network.

    h      = encoder(standardized features)              shared latent, width 32
    z      = h @ projection                              fixed random map to d dims
    u      = (z - latent_mean) / latent_std             latent standardized on the training set
    log q  = flow_log_density(u) - sum(log latent_std)    density of z
    n_j    = N * exp(log q(z)) * g_j(h)                  evidence per parameter j
    p_j    = softmax(decoder_j(h))                       predicted PMF
    beta_j = n_phys * p_prior_j + n_j * p_j              posterior concentrations

The expected PMF beta_j / sum(beta_j) falls back to the prior as the flow
density, and with it the evidence, collapses away from the training data.
The flow is fit to the training latents by maximum likelihood alongside the
task loss; that likelihood term updates the flow only, never the encoder.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from evidential_nav.autodiff_nn import (
    Activation,
    FlowDensity,
    Mlp,
    MlpConfig,
    Tensor,
    assign_parameters,
    load_checkpoint,
    save_checkpoint,
)
from evidential_nav.distributions import dirichlet_entropy_array, dirichlet_entropy_grad_array
from evidential_nav.losses import emd2_array, upi_loss_array, upi_loss_grad_array
from evidential_nav.utils.errors import DomainError, FormatError, TrainingDivergedError

logger = logging.getLogger(__name__)

NUM_PARAMS = 4
LOG_DENSITY_CAP = 30.0
MIN_LATENT_STD = 1e-4


class EvidentialConfig(BaseModel):
    latent_dim: int = Field(default=8, ge=1)
    certainty_budget: float | None = Field(default=None, gt=0, description="None means e ** latent_dim")
    n_phys: float = Field(default=12.0, gt=0)
    kappa: float = Field(default=0.5, ge=0)
    entropy_weight: float = Field(default=1e-4, ge=0)
    entropy_sign: str = Field(default="bonus", pattern="^(bonus|penalty)$")
    learning_rate: float = Field(default=1e-4, gt=0)
    epochs: int = Field(default=40, ge=1)
    batch_size: int = Field(default=128, ge=1)
    num_bins: int = Field(default=12, ge=2)
    encoder_widths: list[int] = Field(default_factory=lambda: [64, 32])
    decoder_hidden: int = Field(default=32, ge=1)
    head_hidden: int = Field(default=16, ge=1)
    flow_layers: int = Field(default=4, ge=1)
    flow_hidden: int = Field(default=16, ge=1)
    max_grad_norm: float = Field(default=10.0, gt=0)
    density_weight: float = Field(default=1.0, ge=0, description="Weight of the flow negative log-likelihood")
    density_epochs: int = Field(default=10, ge=0, description="Flow-only fitting epochs after the task loss")
    # Switches that turn the same network into the baseline configurations.
    learned_evidence: bool = True
    fixed_evidence: float = Field(default=1e6, gt=0)
    ood_percentile: float = Field(default=5.0, ge=0, le=100)

    @property
    def budget(self) -> float:
        return self.certainty_budget if self.certainty_budget is not None else float(np.exp(self.latent_dim))

    @property
    def entropy_coefficient(self) -> float:
        """Coefficient of H(Dir(beta)) in the loss."""
        return -self.entropy_weight if self.entropy_sign == "bonus" else self.entropy_weight


@dataclass
class ForwardPass:
    """Batched outputs; per-parameter arrays have shape (N, 4[, B])."""

    predicted: np.ndarray
    evidence: np.ndarray
    density: np.ndarray
    log_density: np.ndarray
    scale: np.ndarray
    beta: np.ndarray
    latent: np.ndarray | None = None

    @property
    def expected(self) -> np.ndarray:
        return self.beta / self.beta.sum(axis=-1, keepdims=True)

    @property
    def ood_score(self) -> np.ndarray:
        """One score per input: the learned evidence before the downscaling head, N * exp(log q(z)).

        The per-parameter evidence n_j multiplies this by g_j in [0, 1], so a
        single threshold on the shared factor flags an input for all four
        parameters at once.
        """
        return self.density


def posterior_beta(prior_masses: np.ndarray, predicted: np.ndarray, evidence: np.ndarray, n_phys: float) -> np.ndarray:
    return n_phys * prior_masses + evidence[..., None] * predicted


class EvidentialNetwork:
    def __init__(self, input_dim: int, cfg: EvidentialConfig, seed: int = 0):
        self.cfg = cfg
        self.input_dim = input_dim
        rng = np.random.default_rng(seed)
        widths = [input_dim, *cfg.encoder_widths]
        if len(widths) < 3:
            raise DomainError(f"Encoder needs at least one hidden layer, got widths {widths}")
        latent = widths[-1]
        self.encoder = Mlp(MlpConfig(layer_widths=widths, activation=Activation.TANH), "encoder", rng=rng)
        self.projection = Tensor(rng.normal(0.0, 1.0 / np.sqrt(latent), size=(latent, cfg.latent_dim)), "projection")
        self.flow = FlowDensity(cfg.latent_dim, cfg.flow_layers, cfg.flow_hidden, name="flow", rng=rng)
        self.decoders = [
            Mlp(MlpConfig(layer_widths=[latent, cfg.decoder_hidden, cfg.num_bins]), f"decoder{j}", head="softmax", rng=rng)
            for j in range(NUM_PARAMS)
        ]
        self.head = Mlp(MlpConfig(layer_widths=[latent, cfg.head_hidden, NUM_PARAMS]), "downscale", head="sigmoid", rng=rng)
        self.input_mean = Tensor(np.zeros(input_dim), "input_mean")
        self.input_std = Tensor(np.ones(input_dim), "input_std")
        self.latent_mean = Tensor(np.zeros(cfg.latent_dim), "latent_mean")
        self.latent_std = Tensor(np.ones(cfg.latent_dim), "latent_std")
        self.ood_threshold = 0.0
        self._cache = None

    # -- parameters -------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        """Trainable tensors."""
        params = self.encoder.parameters() + self.head.parameters()
        for decoder in self.decoders:
            params += decoder.parameters()
        if self.cfg.learned_evidence:
            params += self.flow.parameters()
        return params

    def state_tensors(self) -> list[Tensor]:
        """Everything a checkpoint must hold, trainable or not."""
        frozen = [self.projection, self.input_mean, self.input_std, self.latent_mean, self.latent_std]
        if not self.cfg.learned_evidence:
            frozen += self.flow.parameters()
        return self.parameters() + frozen

    def fit_normalization(self, inputs: np.ndarray):
        self.input_mean.values[...] = inputs.mean(axis=0)
        std = inputs.std(axis=0)
        self.input_std.values[...] = np.where(std > 1e-8, std, 1.0)

    def latents(self, inputs: np.ndarray) -> np.ndarray:
        """Projected encoder outputs z, shape (N, d)."""
        x = (inputs - self.input_mean.values) / self.input_std.values
        return self.encoder.forward(x, record=False) @ self.projection.values

    def fit_latent_normalization(self, inputs: np.ndarray):
        z = self.latents(inputs)
        self.latent_mean.values[...] = z.mean(axis=0)
        self.latent_std.values[...] = np.maximum(z.std(axis=0), MIN_LATENT_STD)

    def standardize_latents(self, z: np.ndarray) -> np.ndarray:
        return (z - self.latent_mean.values) / self.latent_std.values

    def latent_log_density(self, z: np.ndarray, record: bool = False) -> np.ndarray:
        """log q(z): the flow density of the standardized latent plus the standardization's log-determinant."""
        u = self.standardize_latents(z)
        return self.flow.log_density(u, record=record) - np.log(self.latent_std.values).sum()

    # -- forward / backward ----------------------------------------------

    def forward(self, inputs: np.ndarray, prior_masses: np.ndarray, record: bool = False) -> ForwardPass:
        """Forward pass for inputs (N, D) and posterior prior masses (N, 4, B)."""
        x = (inputs - self.input_mean.values) / self.input_std.values
        h = self.encoder.forward(x, record=record)
        z = h @ self.projection.values
        log_density = self.latent_log_density(z, record=record)
        capped = np.minimum(log_density, LOG_DENSITY_CAP)
        density = self.cfg.budget * np.exp(capped)
        scale = self.head.forward(h, record=record)
        predicted = np.stack([d.forward(h, record=record) for d in self.decoders], axis=1)
        if self.cfg.learned_evidence:
            evidence = density[:, None] * scale
        else:
            evidence = np.full(scale.shape, self.cfg.fixed_evidence)
        beta = posterior_beta(prior_masses, predicted, evidence, self.cfg.n_phys)
        out = ForwardPass(predicted, evidence, density, log_density, scale, beta, z)
        if record:
            self._cache = out
        return out

    def loss(self, out: ForwardPass, targets: np.ndarray, loss_priors: np.ndarray) -> np.ndarray:
        """Per-record loss summed over parameters, shape (N,)."""
        per = upi_loss_array(out.beta, targets, loss_priors, self.cfg.kappa)
        per = per + self.cfg.entropy_coefficient * dirichlet_entropy_array(out.beta)
        return per.sum(axis=1)

    def backward(self, targets: np.ndarray, loss_priors: np.ndarray) -> None:
        """Accumulate gradients of the mean loss over records and parameters."""
        out = self._cache
        n_records = out.beta.shape[0]
        g_beta = upi_loss_grad_array(out.beta, targets, loss_priors, self.cfg.kappa)
        g_beta = g_beta + self.cfg.entropy_coefficient * dirichlet_entropy_grad_array(out.beta)
        g_beta /= n_records * NUM_PARAMS

        g_predicted = out.evidence[..., None] * g_beta
        g_h = sum(decoder.backward(g_predicted[:, j]) for j, decoder in enumerate(self.decoders))

        if self.cfg.learned_evidence:
            g_evidence = np.sum(g_beta * out.predicted, axis=-1)
            g_h = g_h + self.head.backward(g_evidence * out.density[:, None])
            g_log_density = np.sum(g_evidence * out.evidence, axis=1)
            g_log_density = np.where(out.log_density < LOG_DENSITY_CAP, g_log_density, 0.0)
            g_z = self.flow.backward(g_log_density) / self.latent_std.values
            g_h = g_h + g_z @ self.projection.values.T
        self.encoder.backward(g_h)

    def density_backward(self, z: np.ndarray, weight: float = 1.0) -> float:
        """Accumulate flow gradients of weight * mean(-log q(z)).

        The latents are treated as data: the encoder receives no gradient from
        this term. Returns the mean negative log-likelihood.
        """
        log_q = self.latent_log_density(z, record=True)
        self.flow.backward(np.full(len(z), -weight / len(z)))
        return float(-log_q.mean())

    def mean_loss(self, inputs, prior_masses, targets, loss_priors, record: bool = False) -> float:
        out = self.forward(inputs, prior_masses, record=record)
        return float(self.loss(out, targets, loss_priors).mean() / NUM_PARAMS)

    def zero_grad(self):
        for t in self.parameters():
            t.zero_grad()


def record_errors(expected: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-record EMD2 of expected PMFs to one-hot targets, summed over the four parameters."""
    return emd2_array(expected, targets).sum(axis=-1)


def check_finite(out: ForwardPass, loss_value: float, epoch: int, batch: int):
    if np.isfinite(loss_value) and np.all(np.isfinite(out.beta)):
        return
    raise TrainingDivergedError(
        "Non-finite loss or posterior",
        epoch,
        batch,
        {
            "loss": loss_value,
            "max_log_density": float(np.nanmax(out.log_density)),
            "min_beta": float(np.nanmin(out.beta)),
        },
    )


def save_network(network: EvidentialNetwork, path, metadata: dict | None = None):
    meta = {
        "input_dim": network.input_dim,
        "ood_threshold": network.ood_threshold,
        "config": network.cfg.model_dump(),
        **(metadata or {}),
    }
    return save_checkpoint(path, network.state_tensors(), meta)


def load_network(path) -> tuple[EvidentialNetwork, dict]:
    arrays, meta = load_checkpoint(path)
    try:
        cfg = EvidentialConfig(**meta["config"])
        network = EvidentialNetwork(int(meta["input_dim"]), cfg)
    except (KeyError, ValueError) as e:
        raise FormatError(f"Checkpoint {path} has unusable metadata: {e}") from e
    assign_parameters(network.state_tensors(), arrays, source=str(path))
    network.ood_threshold = float(meta.get("ood_threshold", 0.0))
    return network, meta
