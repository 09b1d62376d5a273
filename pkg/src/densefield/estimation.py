"""Linear MMSE estimation through the additive-noise test channel.

The channel observes U = X + Z with Z ~ N(0, p I) independent of X.  The
optimal estimate of X from U is linear, and both the estimate and its exact
error are evaluated on the covariance pack's cached eigendecomposition
(shift of the eigenvalues by p) rather than by forming an explicit inverse,
which stays stable for near-singular band-limited covariances across p sweeps.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError
from .field import CorrelationModel, CovariancePack


@dataclass(frozen=True)
class TestChannel:
    """Additive white Gaussian test channel with per-entry noise variance p."""

    p: float
    cov: CovariancePack

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("noise variance must be nonnegative")


@dataclass(frozen=True)
class MmseResult:
    per_sample_mse: np.ndarray
    avg_mse: float


def mmse_estimate(ch, u):
    """Best linear estimate of X given u = x + z.

    Accepts a length-N vector or an (m, N) batch of observations.  With p = 0
    the channel is noiseless and the estimate is u itself, which is only
    meaningful if the covariance did not need clamping.
    """
    cov, p = ch.cov, ch.p
    if p == 0.0 and cov.n_clamped:
        raise ConditioningError(
            f"p = 0 with {cov.n_clamped} clamped eigenvalue(s): "
            "the noiseless solve is not trustworthy"
        )
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != cov.n:
        raise ValueError(f"observation length {u.shape[-1]} != {cov.n}")
    gain = cov.eigvals / (cov.eigvals + p)
    return (u @ cov.eigvecs) * gain @ cov.eigvecs.T


def mmse_error(ch):
    """Exact per-sensor and average MSE of the optimal linear estimate.

    The error covariance is Sigma - Sigma (Sigma + pI)^-1 Sigma, whose
    eigenbasis form has mode errors lambda*p/(lambda+p); the diagonal is
    recovered through the eigenvectors.
    """
    cov, p = ch.cov, ch.p
    mode_mse = cov.eigvals * p / (cov.eigvals + p) if p > 0 else np.zeros(cov.n)
    per_sample = (cov.eigvecs ** 2) @ mode_mse
    return MmseResult(per_sample_mse=per_sample, avg_mse=float(np.mean(per_sample)))


def avg_mmse_from_eigvals(eigvals, p):
    """Average MSE of the optimal estimate, O(N) from eigenvalues alone."""
    if p == 0.0:
        return 0.0
    return float(np.mean(eigvals * p / (eigvals + p)))


def averaging_estimator_mse_bound(model: CorrelationModel, n_sensors, theta, p):
    """MSE bound for the window-averaging estimator with optimized scale.

    Averaging the ~N*theta noisy samples nearest a sensor, with the scale
    that minimizes the quadratic part of the error, achieves at most

        1 - rho(theta)^2 / (1 + p/(N theta)) * (1 - 2/(N theta)).

    This upper-bounds the optimal estimator's per-sensor MSE, since any
    linear estimator does.  Valid while rho is non-increasing and positive
    out to theta and the window holds more than two samples.
    """
    if theta <= 0 or theta > model.theta_mono:
        raise ValueError("theta must lie in (0, theta_mono]")
    n_theta = n_sensors * theta
    if n_theta <= 2:
        raise ValueError("window N*theta must exceed 2 for the bound to mean anything")
    r = model(theta)
    if r <= 0:
        raise ValueError("rho(theta) must be positive")
    return 1.0 - (r * r / (1.0 + p / n_theta)) * (1.0 - 2.0 / n_theta)
