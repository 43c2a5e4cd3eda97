"""
Squared earth mover's distance losses for evidential traversability learning.

All quantities use the unweighted squared-cumulative-difference form
EMD2(p, y) = ||cs(p) - cs(y)||^2. UEMD2 is its expectation under a Dirichlet,
evaluated in closed form, and UPI adds a kappa-weighted UEMD2 to the physics
prior. Gradients are exact derivatives of the closed form with respect to the
Dirichlet concentrations.
"""

from __future__ import annotations

import numpy as np

from evidential_nav.distributions import DirichletParams, Pmf
from evidential_nav.utils.errors import DomainError


def _reverse_cumsum(values: np.ndarray) -> np.ndarray:
    return np.cumsum(values[..., ::-1], axis=-1)[..., ::-1]


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if kappa < 0.0:
        raise DomainError(f"Physics loss weight kappa must be >= 0, got {kappa}")
    return kappa


def _check_same_bins(a, b):
    if a.disc.num_bins != b.disc.num_bins:
        raise DomainError(f"Mismatched bin counts: {a.disc.num_bins} vs {b.disc.num_bins}")


# ---------------------------------------------------------------------------
# Array forms, bins on the last axis
# ---------------------------------------------------------------------------

def emd2_array(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = np.cumsum(p, axis=-1) - np.cumsum(y, axis=-1)
    return np.sum(diff * diff, axis=-1)


def uemd2_array(beta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Closed-form expected EMD2 under Dir(beta)."""
    beta = np.asarray(beta, dtype=np.float64)
    cs_beta = np.cumsum(beta, axis=-1)
    cs_y = np.cumsum(np.asarray(y, dtype=np.float64), axis=-1)
    beta0 = cs_beta[..., -1]
    cs_mean = cs_beta / beta0[..., None]
    second_moment = np.sum(cs_mean * (cs_beta + 1.0), axis=-1) / (beta0 + 1.0)
    return second_moment + np.sum((cs_y - 2.0 * cs_mean) * cs_y, axis=-1)


def uemd2_grad_array(beta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d uemd2 / d beta_b for beta of shape (..., B)."""
    beta = np.asarray(beta, dtype=np.float64)
    cs_beta = np.cumsum(beta, axis=-1)
    cs_y = np.cumsum(np.asarray(y, dtype=np.float64), axis=-1)
    beta0 = cs_beta[..., -1:]
    denom = beta0 * (beta0 + 1.0)
    quad = np.sum(cs_beta * cs_beta + cs_beta, axis=-1, keepdims=True)
    cross = np.sum(cs_beta * cs_y, axis=-1, keepdims=True)
    return (
        _reverse_cumsum(2.0 * cs_beta + 1.0) / denom
        - quad * (2.0 * beta0 + 1.0) / (denom * denom)
        - 2.0 * _reverse_cumsum(cs_y) / beta0
        + 2.0 * cross / (beta0 * beta0)
    )


def upi_loss_array(beta, y, p_phys, kappa: float) -> np.ndarray:
    kappa = _check_kappa(kappa)
    return uemd2_array(beta, y) + kappa * uemd2_array(beta, p_phys)


def upi_loss_grad_array(beta, y, p_phys, kappa: float) -> np.ndarray:
    kappa = _check_kappa(kappa)
    return uemd2_grad_array(beta, y) + kappa * uemd2_grad_array(beta, p_phys)


# ---------------------------------------------------------------------------
# Typed forms
# ---------------------------------------------------------------------------

def emd2(p: Pmf, y: Pmf) -> float:
    _check_same_bins(p, y)
    return float(emd2_array(p.masses, y.masses))


def uemd2(q: DirichletParams, y: Pmf) -> float:
    _check_same_bins(q, y)
    return float(uemd2_array(q.beta, y.masses))


def upi_loss(q: DirichletParams, y: Pmf, p_phys: Pmf, kappa: float) -> float:
    """UEMD2 to the target plus kappa times UEMD2 to the physics prior."""
    _check_same_bins(q, y)
    _check_same_bins(q, p_phys)
    return float(upi_loss_array(q.beta, y.masses, p_phys.masses, kappa))


def upi_loss_grad(q: DirichletParams, y: Pmf, p_phys: Pmf, kappa: float) -> np.ndarray:
    _check_same_bins(q, y)
    _check_same_bins(q, p_phys)
    return upi_loss_grad_array(q.beta, y.masses, p_phys.masses, kappa)
