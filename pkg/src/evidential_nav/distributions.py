"""
Discrete traversability distributions.

PMFs over B equal-width bins, Dirichlet distributions over those PMFs, and the
left/right tail risk statistics (VaR, CVaR) the planner consumes.

Every operation exists in two forms: a typed form working on `Pmf` /
`DirichletParams` values, and an array form (`*_array`) that accepts any
leading batch shape with the bins on the last axis. The typed forms delegate
to the array forms so both always agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from evidential_nav.utils.errors import DomainError

PMF_TOLERANCE = 1e-9
RENORMALIZE_TOLERANCE = 1e-6


class TraversabilityParam(IntEnum):
    """Index of each traversability parameter along the last axis of stacked arrays."""

    LINEAR_TRACTION = 0
    ANGULAR_TRACTION = 1
    ROLL = 2
    PITCH = 3

    @property
    def is_traction(self) -> bool:
        return self in (TraversabilityParam.LINEAR_TRACTION, TraversabilityParam.ANGULAR_TRACTION)

    @property
    def worst_tail(self) -> str:
        """Low traction and high attitude angles are the risky outcomes."""
        return "left" if self.is_traction else "right"


PARAMS = tuple(TraversabilityParam)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Discretization:
    """B equal-width cells spanning [bin_lo, bin_hi], represented by their midpoints."""

    num_bins: int
    bin_lo: float
    bin_hi: float
    bin_centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.num_bins) < 2:
            raise DomainError(f"Discretization needs at least 2 bins, got {self.num_bins}")
        if not self.bin_hi > self.bin_lo:
            raise DomainError(f"bin_hi ({self.bin_hi}) must exceed bin_lo ({self.bin_lo})")
        object.__setattr__(self, "num_bins", int(self.num_bins))
        width = (self.bin_hi - self.bin_lo) / self.num_bins
        object.__setattr__(self, "bin_centers", _frozen(self.bin_lo + (np.arange(self.num_bins) + 0.5) * width))

    @property
    def bin_width(self) -> float:
        return (self.bin_hi - self.bin_lo) / self.num_bins

    def bin_index(self, values) -> np.ndarray:
        """Index of the cell containing each (clamped) value."""
        values = np.asarray(values, dtype=np.float64)
        idx = np.floor((values - self.bin_lo) / self.bin_width).astype(np.int64)
        return np.clip(idx, 0, self.num_bins - 1)

    def uniform(self) -> "Pmf":
        return Pmf(np.full(self.num_bins, 1.0 / self.num_bins), self)


@dataclass(frozen=True)
class Pmf:
    """Normalized mass over the bins of a `Discretization`."""

    masses: np.ndarray
    disc: Discretization

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=np.float64)
        if masses.shape != (self.disc.num_bins,):
            raise DomainError(f"Pmf needs {self.disc.num_bins} masses, got shape {masses.shape}")
        if not np.all(np.isfinite(masses)) or np.any(masses < -PMF_TOLERANCE):
            raise DomainError(f"Pmf masses must be finite and non-negative: {masses}")
        masses = np.clip(masses, 0.0, None)
        total = masses.sum()
        if abs(total - 1.0) > RENORMALIZE_TOLERANCE:
            raise DomainError(f"Pmf masses sum to {total}, expected 1")
        if abs(total - 1.0) > 0.0:
            masses = masses / total
        object.__setattr__(self, "masses", _frozen(masses))

    @property
    def num_bins(self) -> int:
        return self.disc.num_bins


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector beta of a Dirichlet distribution over PMFs."""

    beta: np.ndarray
    disc: Discretization

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.shape != (self.disc.num_bins,):
            raise DomainError(f"DirichletParams needs {self.disc.num_bins} entries, got shape {beta.shape}")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0.0):
            raise DomainError(f"Dirichlet concentrations must be finite and > 0: {beta}")
        object.__setattr__(self, "beta", _frozen(beta))

    @property
    def total_evidence(self) -> float:
        return float(self.beta.sum())


def _masses(p) -> np.ndarray:
    return p.masses if isinstance(p, Pmf) else np.asarray(p, dtype=np.float64)


def cumsum(p) -> np.ndarray:
    """Cumulative sum over bins of a Pmf or a raw vector."""
    return np.cumsum(_masses(p), axis=-1)


def dirichlet_mean(d: DirichletParams) -> Pmf:
    """Expected PMF beta / beta0."""
    return Pmf(d.beta / d.beta.sum(), d.disc)


def pmf_mean(p: Pmf) -> float:
    return float(np.dot(p.masses, p.disc.bin_centers))


# ---------------------------------------------------------------------------
# Tail statistics
# ---------------------------------------------------------------------------

def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"Risk tolerance alpha must lie in (0, 1], got {alpha}")
    return alpha


def cvar_left_array(masses: np.ndarray, centers: np.ndarray, alpha: float) -> np.ndarray:
    """Left-tail CVaR for masses of shape (..., B); the boundary bin is split fractionally."""
    alpha = _check_alpha(alpha)
    masses = np.asarray(masses, dtype=np.float64)
    if alpha == 1.0:
        return masses @ centers
    before = np.cumsum(masses, axis=-1) - masses
    covered = np.clip(alpha - before, 0.0, masses)
    return (covered @ centers) / alpha


def cvar_right_array(masses: np.ndarray, centers: np.ndarray, alpha: float) -> np.ndarray:
    """Right-tail CVaR: mirror of `cvar_left_array` accumulating from the top bin."""
    return cvar_left_array(np.asarray(masses)[..., ::-1], np.asarray(centers)[::-1], alpha)


def var_left_array(masses: np.ndarray, centers: np.ndarray, alpha: float) -> np.ndarray:
    """Left-tail VaR: center of the lowest bin at which the cumulative mass reaches alpha."""
    alpha = _check_alpha(alpha)
    cum = np.cumsum(np.asarray(masses, dtype=np.float64), axis=-1)
    idx = np.argmax(cum >= alpha - PMF_TOLERANCE, axis=-1)
    return np.asarray(centers)[idx]


def var_right_array(masses: np.ndarray, centers: np.ndarray, alpha: float) -> np.ndarray:
    return var_left_array(np.asarray(masses)[..., ::-1], np.asarray(centers)[::-1], alpha)


def cvar_left(p: Pmf, alpha: float) -> float:
    """Expected value of the worst (lowest) alpha-fraction of the distribution."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return pmf_mean(p)
    return float(cvar_left_array(p.masses, p.disc.bin_centers, alpha))


def cvar_right(p: Pmf, alpha: float) -> float:
    """Expected value of the worst (highest) alpha-fraction of the distribution."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return pmf_mean(p)
    return float(cvar_right_array(p.masses, p.disc.bin_centers, alpha))


def var_left(p: Pmf, alpha: float) -> float:
    return float(var_left_array(p.masses, p.disc.bin_centers, alpha))


def var_right(p: Pmf, alpha: float) -> float:
    return float(var_right_array(p.masses, p.disc.bin_centers, alpha))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def one_hot_array(values, disc: Discretization) -> np.ndarray:
    """One-hot masses of shape (..., B) for clamped values of shape (...)."""
    idx = disc.bin_index(values)
    return np.eye(disc.num_bins)[idx]


def one_hot_encode(value: float, disc: Discretization) -> Pmf:
    """Mass 1 in the cell containing `value`; out-of-range values clamp to the boundary bins."""
    return Pmf(one_hot_array(value, disc), disc)


# ---------------------------------------------------------------------------
# Dirichlet entropy
# ---------------------------------------------------------------------------

def dirichlet_entropy_array(beta: np.ndarray) -> np.ndarray:
    """Differential entropy of Dir(beta) for beta of shape (..., B)."""
    beta = np.asarray(beta, dtype=np.float64)
    num_bins = beta.shape[-1]
    beta0 = beta.sum(axis=-1)
    log_beta_fn = gammaln(beta).sum(axis=-1) - gammaln(beta0)
    return (
        log_beta_fn
        + (beta0 - num_bins) * digamma(beta0)
        - ((beta - 1.0) * digamma(beta)).sum(axis=-1)
    )


def dirichlet_entropy_grad_array(beta: np.ndarray) -> np.ndarray:
    """Gradient of `dirichlet_entropy_array` with respect to each concentration."""
    beta = np.asarray(beta, dtype=np.float64)
    num_bins = beta.shape[-1]
    beta0 = beta.sum(axis=-1, keepdims=True)
    return (beta0 - num_bins) * polygamma(1, beta0) - (beta - 1.0) * polygamma(1, beta)


def dirichlet_entropy(d: DirichletParams) -> float:
    return float(dirichlet_entropy_array(d.beta))


def traversability_discretizations(num_bins: int = 12, max_angle: float = np.pi / 4) -> dict[TraversabilityParam, Discretization]:
    """Traction bins on [0, 1] and attitude bins on [0, max_angle] radians."""
    traction = Discretization(num_bins, 0.0, 1.0)
    attitude = Discretization(num_bins, 0.0, float(max_angle))
    return {param: traction if param.is_traction else attitude for param in PARAMS}


def tail_cvar_array(masses: np.ndarray, centers: np.ndarray, alpha: float, param: TraversabilityParam) -> np.ndarray:
    """CVaR on the risky tail of `param`: left for traction, right for roll and pitch."""
    if param.worst_tail == "left":
        return cvar_left_array(masses, centers, alpha)
    return cvar_right_array(masses, centers, alpha)
