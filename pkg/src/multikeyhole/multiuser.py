"""Opportunistic scheduling throughput over keyhole/relay channels and feedback cost.

With ``K`` users whose capacities are i.i.d. Gaussian ``N(mu, sigma^2)``,
serving the best user yields on average about ``mu + sigma sqrt(2 ln K)``
(leading extreme-value term).  The relay form treats ``M`` ideal relay
nodes as keyholes with per-node SNR ``gamma1``, so ``gamma0 = M gamma1``.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .asymptotics import GaussianApprox, q_inverse, rdmk_moments
from .errors import DiagnosticWarning, DomainError
from .rng import TrialStream

__all__ = [
    "Throughput",
    "SchedulingSpec",
    "FeedbackSpec",
    "scheduled_throughput",
    "relay_throughput",
    "relay_throughput_low_snr",
    "relay_throughput_high_snr",
    "feedback_bits",
    "max_gaussian_oracle",
]


class Throughput(NamedTuple):
    mean: float
    gain: float


def _check_users(K):
    if int(K) != K or K < 1:
        raise DomainError(f"number of users must be a positive integer, got {K!r}")
    return int(K)


@dataclass(frozen=True)
class SchedulingSpec:
    """``K`` users sharing one per-user capacity law; ``relay_snr`` is ``gamma1``."""

    num_users: int
    approx: GaussianApprox = None
    relay_snr: float = None

    def __post_init__(self):
        _check_users(self.num_users)
        if self.relay_snr is not None and not self.relay_snr >= 0:
            raise DomainError(f"relay_snr must be >= 0, got {self.relay_snr!r}")


@dataclass(frozen=True)
class FeedbackSpec:
    """List granularity ``v`` (relative to the mean capacity) and outage target ``P0``."""

    granularity: float
    outage_target: float

    def __post_init__(self):
        if not self.granularity > 0:
            raise DomainError(f"granularity must be > 0, got {self.granularity!r}")
        if not 0 < self.outage_target < 1:
            raise DomainError(f"outage_target must lie in (0, 1), got {self.outage_target!r}")


def scheduled_throughput(mu, sigma, K):
    """Average per-user throughput ``mu + sigma sqrt(2 ln K)`` and its gain over round robin.

    >>> round(scheduled_throughput(2.0, 0.5, 100).mean, 4)
    3.5174
    """
    K = _check_users(K)
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma!r}")
    gain = float(sigma * np.sqrt(2 * np.log(K)))
    return Throughput(float(mu) + gain, gain)


def relay_throughput(gains, psi_t, psi_r, relay_snr, K, regime="exact", as_printed=False):
    """Scheduled throughput over ``M`` relay nodes acting as keyholes.

    The per-user capacity law comes from :func:`rdmk_moments` at
    ``gamma0 = M * relay_snr``.
    """
    M = np.atleast_1d(gains).size
    approx = rdmk_moments(gains, psi_t, psi_r, M * relay_snr, regime, as_printed)
    return scheduled_throughput(approx.mu, approx.sigma, K)


def relay_throughput_low_snr(M, n_t, n_r, relay_snr, K):
    """Equal gains, uncorrelated: ``M g1 + g1 sqrt(2 M (1/n_t + 1/n_r) ln K)``."""
    K = _check_users(K)
    return float(M * relay_snr + relay_snr * np.sqrt(2 * M * (1 / n_t + 1 / n_r) * np.log(K)))


def relay_throughput_high_snr(M, n_t, n_r, relay_snr, K):
    """Equal gains, uncorrelated: ``M ln g1 + sqrt(2 M (1/n_t + 1/n_r) ln K)``."""
    K = _check_users(K)
    if relay_snr <= 0:
        raise DomainError("high-SNR throughput needs relay_snr > 0")
    return float(M * np.log(relay_snr) + np.sqrt(2 * M * (1 / n_t + 1 / n_r) * np.log(K)))


def feedback_bits(mu, sigma, spec):
    """Feedback estimate ``b = ln((2 sigma / (v mu)) Q^{-1}(P0))`` in nats.

    A negative ``b`` (very coarse list) is returned with a warning.

    Raises
    ------
    DomainError
        If ``P0 >= 1/2`` or the log argument is otherwise not positive.
    """
    if spec.outage_target >= 0.5:
        raise DomainError(f"outage_target must be < 1/2 for a positive log argument, got {spec.outage_target}")
    arg = 2 * sigma / (spec.granularity * mu) * q_inverse(spec.outage_target)
    if not arg > 0:
        raise DomainError(f"feedback log argument must be positive, got {arg!r} (mu={mu}, sigma={sigma})")
    b = float(np.log(arg))
    if b < 0:
        warnings.warn(f"feedback estimate is negative ({b:.4g} nats)", DiagnosticWarning, stacklevel=2)
    return b


def max_gaussian_oracle(mu, sigma, K, n_reps, seed, tag="max-gaussian"):
    """Monte Carlo mean and standard error of the max of ``K`` i.i.d. ``N(mu, sigma^2)``."""
    K = _check_users(K)
    stream = TrialStream(seed, tag)
    best = np.empty(n_reps)
    for t in range(n_reps):
        best[t] = stream.generator(t).standard_normal(K).max()
    best = mu + sigma * best
    return float(best.mean()), float(best.std(ddof=1) / np.sqrt(n_reps))
