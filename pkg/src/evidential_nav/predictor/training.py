"""
Training loop for the evidential network.

Minibatch Adam on the mean UPI loss plus the Dirichlet entropy term, with a
flow negative log-likelihood on the same batch anchoring the latent density to
the training data. The parameters with the lowest validation error are
restored at the end, the flow is then refit alone on the final training
latents, and the OOD threshold is calibrated on the training inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from evidential_nav.autodiff_nn import Adam
from evidential_nav.distributions import Discretization, TraversabilityParam, one_hot_array
from evidential_nav.physics_prior import PriorConfig
from evidential_nav.predictor.features import FeatureBatch
from evidential_nav.predictor.methods import MethodSpec
from evidential_nav.predictor.network import EvidentialConfig, EvidentialNetwork, check_finite, record_errors
from evidential_nav.simulator.episodes import DatasetRecord, records_to_batch
from evidential_nav.utils.errors import DomainError, TrainingDivergedError

logger = logging.getLogger(__name__)


@dataclass
class TrainingData:
    inputs: np.ndarray
    posterior_priors: np.ndarray
    loss_priors: np.ndarray
    targets: np.ndarray
    batch: FeatureBatch

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass
class TrainingResult:
    network: EvidentialNetwork
    curves: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_error: float = float("inf")
    density_nll: list[float] = field(default_factory=list)


def encode_targets(targets: np.ndarray, discs: dict[TraversabilityParam, Discretization]) -> np.ndarray:
    """One-hot PMFs of shape (N, 4, B) for raw targets of shape (N, 4)."""
    return np.stack([one_hot_array(targets[:, p], discs[p]) for p in TraversabilityParam], axis=1)


def prepare_training_data(records: list[DatasetRecord], spec: MethodSpec, prior_cfg: PriorConfig,
                          discs: dict[TraversabilityParam, Discretization]) -> TrainingData:
    if not records:
        raise DomainError("Training data needs at least one record")
    batch, raw_targets = records_to_batch(records)
    physics = batch.all_prior_masses(prior_cfg, discs)
    if spec.physics_posterior:
        posterior = physics
    else:
        num_bins = next(iter(discs.values())).num_bins
        posterior = np.full_like(physics, 1.0 / num_bins)
    return TrainingData(batch.inputs(), posterior, physics, encode_targets(raw_targets, discs), batch)


def evaluate_error(network: EvidentialNetwork, data: TrainingData) -> float:
    out = network.forward(data.inputs, data.posterior_priors, record=False)
    return float(record_errors(out.expected, data.targets).mean())


def calibrate_ood_threshold(network: EvidentialNetwork, data: TrainingData) -> float:
    out = network.forward(data.inputs, data.posterior_priors, record=False)
    return float(np.percentile(out.ood_score, network.cfg.ood_percentile))


def _check_likelihood(nll: float, epoch: int, batch: int):
    if not np.isfinite(nll):
        raise TrainingDivergedError("Non-finite flow likelihood", epoch, batch, {"nll": nll})


def fit_density(network: EvidentialNetwork, inputs: np.ndarray, rng: np.random.Generator) -> list[float]:
    """Refit the latent standardization, then train the flow alone on the frozen training latents.

    Returns the mean negative log-likelihood per epoch.
    """
    cfg = network.cfg
    network.fit_latent_normalization(inputs)
    latents = network.latents(inputs)
    optimizer = Adam(network.flow.parameters(), lr=cfg.learning_rate, max_grad_norm=cfg.max_grad_norm)
    history = []
    for epoch in range(cfg.density_epochs):
        order = rng.permutation(len(latents))
        nlls = []
        for b, start in enumerate(range(0, len(latents), cfg.batch_size)):
            optimizer.zero_grad()
            nll = network.density_backward(latents[order[start:start + cfg.batch_size]])
            _check_likelihood(nll, epoch, b)
            optimizer.step()
            nlls.append(nll)
        history.append(float(np.mean(nlls)))
    if history:
        logger.debug("flow NLL %.4f -> %.4f over %d epochs", history[0], history[-1], len(history))
    return history


def train(train_data: TrainingData, val_data: TrainingData | None, network: EvidentialNetwork,
          seed: int = 0) -> TrainingResult:
    """Train in place with the settings in `network.cfg`; deterministic for a given seed."""
    cfg = network.cfg
    if len(train_data) == 0:
        raise DomainError("Cannot train on an empty dataset")
    val_data = val_data if val_data is not None and len(val_data) else train_data
    rng = np.random.default_rng(seed)
    network.fit_normalization(train_data.inputs)
    optimizer = Adam(network.parameters(), lr=cfg.learning_rate, max_grad_norm=cfg.max_grad_norm)
    anchored = cfg.learned_evidence and cfg.density_weight > 0

    result = TrainingResult(network=network)
    best_state = None
    n = len(train_data)
    for epoch in range(cfg.epochs):
        if cfg.learned_evidence:
            network.fit_latent_normalization(train_data.inputs)
        order = rng.permutation(n)
        losses, nlls = [], []
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            out = network.forward(train_data.inputs[idx], train_data.posterior_priors[idx], record=True)
            loss_value = float(network.loss(out, train_data.targets[idx], train_data.loss_priors[idx]).mean())
            check_finite(out, loss_value, epoch, b)
            network.backward(train_data.targets[idx], train_data.loss_priors[idx])
            if anchored:
                nll = network.density_backward(out.latent, cfg.density_weight)
                _check_likelihood(nll, epoch, b)
                nlls.append(nll)
            optimizer.step()
            losses.append(loss_value)

        train_error = evaluate_error(network, train_data)
        val_error = evaluate_error(network, val_data)
        result.curves.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "train_nll": float(np.mean(nlls)) if nlls else np.nan,
            "train_emd2": train_error,
            "val_emd2": val_error,
        })
        logger.debug("epoch %d loss %.5f train %.5f val %.5f", epoch, np.mean(losses), train_error, val_error)
        if val_error < result.best_val_error:
            result.best_val_error = val_error
            result.best_epoch = epoch
            best_state = [t.values.copy() for t in network.state_tensors()]

    if best_state is not None:
        for t, values in zip(network.state_tensors(), best_state):
            t.values[...] = values
    if cfg.learned_evidence:
        result.density_nll = fit_density(network, train_data.inputs, rng)
    network.ood_threshold = calibrate_ood_threshold(network, train_data)
    logger.info("Best epoch %d (val EMD2 %.4f), OOD threshold %.4g", result.best_epoch,
                result.best_val_error, network.ood_threshold)
    return result


def build_network(spec: MethodSpec, base_cfg: EvidentialConfig, input_dim: int, seed: int) -> EvidentialNetwork:
    return EvidentialNetwork(input_dim, spec.network_config(base_cfg), seed=seed)
