"""
Registry of the compared traversability models.

Every learned method is the same `EvidentialNetwork` with different switches:
which PMF backs the posterior (physics prior or uniform), whether the loss
pulls toward the physics prior (kappa > 0), and whether evidence is learned
from the flow density or fixed high so the decoder alone decides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evidential_nav.distributions import Discretization, TraversabilityParam
from evidential_nav.physics_prior import PriorConfig
from evidential_nav.predictor.features import FeatureBatch
from evidential_nav.predictor.network import EvidentialConfig, EvidentialNetwork
from evidential_nav.utils.errors import ConfigError

NEGLIGIBLE_PRIOR_EVIDENCE = 1e-6


@dataclass(frozen=True)
class MethodSpec:
    name: str
    description: str
    uses_network: bool = True
    physics_posterior: bool = True
    physics_loss: bool = True
    learned_evidence: bool = True
    prior_evidence_scale: float = 1.0
    physics_if_ood: bool = False
    avoid_ood: bool = False

    def network_config(self, base: EvidentialConfig) -> EvidentialConfig:
        """Apply this method's switches on top of the shared configuration."""
        return base.model_copy(update={
            "kappa": base.kappa if self.physics_loss else 0.0,
            "learned_evidence": self.learned_evidence,
            "n_phys": base.n_phys * self.prior_evidence_scale,
        })


METHODS: dict[str, MethodSpec] = {
    spec.name: spec
    for spec in (
        MethodSpec("PIETRA", "physics prior in the posterior and UPI loss"),
        MethodSpec("EVORA", "uniform prior, no physics loss", physics_posterior=False, physics_loss=False),
        MethodSpec("PI", "decoder only, trained with the physics-informed loss", physics_posterior=False,
                   learned_evidence=False, prior_evidence_scale=NEGLIGIBLE_PRIOR_EVIDENCE),
        MethodSpec("Vanilla", "decoder only, EMD2 loss", physics_posterior=False, physics_loss=False,
                   learned_evidence=False, prior_evidence_scale=NEGLIGIBLE_PRIOR_EVIDENCE),
        MethodSpec("PP", "EVORA with the physics prior in the posterior", physics_loss=False),
        MethodSpec("UPI", "EVORA trained with the UPI loss", physics_posterior=False),
        MethodSpec("EVORA+phys-if-OOD", "EVORA, physics prior below the OOD threshold",
                   physics_posterior=False, physics_loss=False, physics_if_ood=True),
        MethodSpec("Physics Prior", "closed-form physics prior", uses_network=False),
        MethodSpec("Uniform Prior", "uniform PMF", uses_network=False, physics_posterior=False),
    )
}

# Methods sharing a trained network with another entry.
TRAINED_AS = {"EVORA+phys-if-OOD": "EVORA"}

NAV_METHODS: dict[str, tuple[str, bool]] = {
    "PIETRA": ("PIETRA", False),
    "PIETRA+avoid-OOD": ("PIETRA", True),
    "EVORA+avoid-OOD": ("EVORA", True),
    "PI": ("PI", False),
    "Vanilla": ("Vanilla", False),
    "Physics Prior": ("Physics Prior", False),
}


def get_method(name: str) -> MethodSpec:
    if name not in METHODS:
        raise ConfigError(f"Unknown method '{name}'. Available methods: {', '.join(METHODS)}")
    return METHODS[name]


def trained_method_name(name: str) -> str:
    return TRAINED_AS.get(name, name)


@dataclass
class Prediction:
    expected: np.ndarray
    evidence: np.ndarray | None
    ood: np.ndarray
    score: np.ndarray | None = None


class TraversabilityModel:
    """A method bound to its (optional) trained network, ready to predict PMFs."""

    def __init__(self, spec: MethodSpec, prior_cfg: PriorConfig, discs: dict[TraversabilityParam, Discretization],
                 network: EvidentialNetwork | None = None):
        if spec.uses_network and network is None:
            raise ConfigError(f"Method '{spec.name}' needs a trained network")
        self.spec = spec
        self.prior_cfg = prior_cfg
        self.discs = discs
        self.network = network

    @property
    def num_bins(self) -> int:
        return next(iter(self.discs.values())).num_bins

    def physics_priors(self, batch: FeatureBatch) -> np.ndarray:
        return batch.all_prior_masses(self.prior_cfg, self.discs)

    def uniform(self, n: int) -> np.ndarray:
        return np.full((n, len(TraversabilityParam), self.num_bins), 1.0 / self.num_bins)

    def posterior_priors(self, batch: FeatureBatch, physics: np.ndarray | None = None) -> np.ndarray:
        if self.spec.physics_posterior:
            return physics if physics is not None else self.physics_priors(batch)
        return self.uniform(len(batch))

    def predict(self, batch: FeatureBatch) -> Prediction:
        """Expected PMFs (N, 4, B), evidence (N, 4) and OOD flags (N,)."""
        n = len(batch)
        physics = self.physics_priors(batch) if (self.spec.physics_posterior or self.spec.physics_if_ood) else None
        if not self.spec.uses_network:
            expected = physics if self.spec.physics_posterior else self.uniform(n)
            return Prediction(expected, None, np.zeros(n, dtype=bool))

        out = self.network.forward(batch.inputs(), self.posterior_priors(batch, physics), record=False)
        score = out.ood_score
        ood = score < self.network.ood_threshold if self.spec.learned_evidence else np.zeros(n, dtype=bool)
        expected = out.expected
        if self.spec.physics_if_ood:
            expected = np.where(ood[:, None, None], physics, expected)
        return Prediction(expected, out.evidence, ood, score)
