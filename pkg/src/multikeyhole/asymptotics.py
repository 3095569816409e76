"""Gaussian approximations of the keyhole capacity and the outage formulas built on them.

Two channel classes are covered.  FRMK (full-rank multi-keyhole) channels
have many keyholes with equal gains and shared correlations; RDMK
(rank-deficient multi-keyhole) channels have a few keyholes, each with its
own gain and correlation pair.  Both capacities are asymptotically Gaussian
in the number of antennas; this module returns the mean and variance of the
limit law and evaluates outage probabilities and outage capacities from it.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .corr_models import check_corr, frob_norm
from .errors import DomainError, NegativeCapacityWarning

__all__ = [
    "REGIMES",
    "GaussianApprox",
    "OutageQuery",
    "frmk_moments",
    "rdmk_moments",
    "q_function",
    "q_inverse",
    "gaussian_outage_prob",
    "frmk_fraction_outage",
    "rdmk_fraction_outage",
    "rdmk_spread",
    "outage_capacity_eps",
    "frmk_low_snr_outage_capacity",
    "rdmk_low_snr_outage_capacity",
]

REGIMES = ("exact", "low_snr", "high_snr")
CLASSES = ("FRMK", "RDMK")


@dataclass(frozen=True)
class GaussianApprox:
    """Mean ``mu`` (nats) and variance ``sigma2`` (nats^2) of the limiting Gaussian."""

    mu: float
    sigma2: float
    regime: str
    channel_class: str

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.channel_class not in CLASSES:
            raise DomainError(f"unknown channel class {self.channel_class!r}")
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma2)):
            raise DomainError("moments must be finite")
        if self.sigma2 < 0:
            raise DomainError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.regime != "high_snr" and self.mu < 0:
            raise DomainError(f"mu must be >= 0 in the {self.regime} regime, got {self.mu}")

    @property
    def sigma(self):
        return float(np.sqrt(self.sigma2))


@dataclass(frozen=True)
class OutageQuery:
    """Exactly one of a target rate (nats), an outage level ``epsilon`` or a multiplexing fraction."""

    rate: float = None
    epsilon: float = None
    fraction: float = None

    def __post_init__(self):
        given = [k for k in ("rate", "epsilon", "fraction") if getattr(self, k) is not None]
        if len(given) != 1:
            raise DomainError(f"exactly one of rate, epsilon, fraction must be set, got {given}")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.fraction is not None and self.fraction < 0:
            raise DomainError(f"multiplexing fraction must be >= 0, got {self.fraction}")

    @property
    def kind(self):
        if self.rate is not None:
            return "rate"
        return "epsilon" if self.epsilon is not None else "fraction"


def _check_snr(snr):
    snr = float(snr)
    if not np.isfinite(snr) or snr < 0:
        raise DomainError(f"snr must be finite and >= 0, got {snr!r}")
    return snr


def _check_regime(regime):
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def _psi(R):
    return float(frob_norm(R) ** 2 / R.shape[0] ** 2)


def frmk_moments(R_t, R_r, snr, regime="exact"):
    """Mean and variance of the FRMK capacity.

    Parameters
    ----------
    R_t, R_r : ndarray
        Normalized Tx and Rx correlation matrices, shared by every keyhole.
    snr : float
        Average SNR ``gamma0`` (linear).
    regime : {'exact', 'low_snr'}
        ``'exact'`` gives ``mu = ln det(I + snr/n_r R_r)`` and
        ``sigma2 = Psi_t * sum_k (x_k / (1 + x_k))**2`` with
        ``x_k = snr lambda_k / n_r``; ``'low_snr'`` gives ``mu = snr`` and
        ``sigma2 = snr**2 Psi_t Psi_r``.  ``Psi = ||R||^2 / n^2``.

    Examples
    --------
    >>> R = np.array([[1, 0.5], [0.5, 1]])
    >>> round(frmk_moments(np.eye(2), R, 10.0).mu, 4)
    3.3928
    """
    R_t = check_corr(R_t, "R_t")
    R_r = check_corr(R_r, "R_r")
    snr = _check_snr(snr)
    _check_regime(regime)
    if regime == "high_snr":
        raise DomainError("FRMK channels have no high-SNR form; use 'exact' or 'low_snr'")
    psi_t, psi_r = _psi(R_t), _psi(R_r)
    if regime == "low_snr":
        return GaussianApprox(snr, snr ** 2 * psi_t * psi_r, regime, "FRMK")
    n_r = R_r.shape[0]
    x = snr * np.clip(np.linalg.eigvalsh(R_r), 0.0, None) / n_r
    mu = float(np.sum(np.log1p(x)))
    sigma2 = float(psi_t * np.sum((x / (1 + x)) ** 2))
    return GaussianApprox(mu, sigma2, regime, "FRMK")


def _gain_power(gains):
    a = np.atleast_1d(np.asarray(gains, dtype=complex))
    if a.ndim != 1 or a.size == 0:
        raise DomainError("gains must be a non-empty vector")
    return np.abs(a) ** 2


def _psi_list(psi, M, name):
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    if psi.shape != (M,):
        raise DomainError(f"{name} must have length {M}, got shape {psi.shape}")
    if np.any(psi <= 0) or np.any(psi > 1 + 1e-12):
        raise DomainError(f"{name} values must lie in (0, 1]")
    return psi


def rdmk_moments(gains, psi_t, psi_r, snr, regime="exact", as_printed=False):
    """Mean and variance of the RDMK capacity.

    Parameters
    ----------
    gains : array_like, shape (M,)
        Keyhole gains ``a_k``.
    psi_t, psi_r : array_like, shape (M,)
        Per-keyhole ``||R_tk||^2 / n_t^2`` and ``||R_rk||^2 / n_r^2``.
    snr : float
    regime : {'exact', 'low_snr', 'high_snr'}
    as_printed : bool
        Low-SNR variance only.  The default weights ``Psi_tk + Psi_rk`` by
        ``|a_k|**4``, which is what expanding the exact variance gives;
        ``True`` uses ``|a_k|**2`` instead.

    Returns
    -------
    GaussianApprox
    """
    p = _gain_power(gains)
    M = p.size
    s = _psi_list(psi_t, M, "psi_t") + _psi_list(psi_r, M, "psi_r")
    snr = _check_snr(snr)
    _check_regime(regime)
    if regime == "exact":
        x = p * snr
        mu = float(np.sum(np.log1p(x)))
        sigma2 = float(np.sum((x / (1 + x)) ** 2 * s))
    elif regime == "low_snr":
        w = p if as_printed else p ** 2
        mu = snr
        sigma2 = float(snr ** 2 * np.sum(w * s))
    else:
        if np.any(p == 0):
            raise DomainError("high-SNR mean diverges for a zero keyhole gain")
        if snr == 0:
            raise DomainError("high-SNR mean diverges at snr = 0")
        mu = float(M * np.log(snr) + np.sum(np.log(p)))
        sigma2 = float(np.sum(s))
    return GaussianApprox(mu, sigma2, regime, "RDMK")


def q_function(x):
    """Standard normal right tail ``Q(x) = erfc(x / sqrt(2)) / 2``."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2))
    return float(out) if np.ndim(out) == 0 else out


def q_inverse(p):
    """Inverse of :func:`q_function` on ``(0, 1)``.

    Bisection on the monotone ``Q`` followed by one Newton step.  For
    ``p > 1/2`` the reflection ``Q^{-1}(p) = -Q^{-1}(1 - p)`` is used; ``1 - p``
    is exact there and keeps the tail resolution.

    >>> round(q_inverse(0.05), 5)
    1.64485
    """
    p = float(p)
    if not 0 < p < 1:
        raise DomainError(f"q_inverse needs p in (0, 1), got {p!r}")
    if p > 0.5:
        return -q_inverse(1.0 - p)
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q_function(mid) > p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    x = 0.5 * (lo + hi)
    dens = np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)
    if dens > 0:
        step = (q_function(x) - p) / dens
        if abs(step) < hi - lo + 1e-12:
            x += step
    return float(x)


def rdmk_spread(gains, psi_t, psi_r, as_printed=False):
    """``sum_k |a_k|**4 (Psi_tk + Psi_rk)``, or ``|a_k|**2`` weights when ``as_printed``."""
    p = _gain_power(gains)
    M = p.size
    s = _psi_list(psi_t, M, "psi_t") + _psi_list(psi_r, M, "psi_r")
    w = p if as_printed else p ** 2
    return float(np.sum(w * s))


def frmk_fraction_outage(fraction, n_t, n_r, psi_t, psi_r):
    """Low-SNR FRMK outage at rate ``R = (r / min(n_t, n_r)) * mean``; independent of the SNR."""
    if fraction < 0:
        raise DomainError(f"multiplexing fraction must be >= 0, got {fraction}")
    spread = np.sqrt(psi_t * psi_r)
    if spread <= 0:
        raise DomainError("Psi_t * Psi_r must be positive")
    return q_function((1 - fraction / min(n_t, n_r)) / spread)


def rdmk_fraction_outage(fraction, gains, psi_t, psi_r, n_t=None, n_r=None, as_printed=False):
    """Low-SNR RDMK outage at rate ``R = (r / min(n_t, n_r, M)) * mean``.

    Without ``n_t`` and ``n_r`` the denominator is ``M``.
    """
    if fraction < 0:
        raise DomainError(f"multiplexing fraction must be >= 0, got {fraction}")
    M = _gain_power(gains).size
    dof = min(d for d in (n_t, n_r, M) if d is not None)
    spread = rdmk_spread(gains, psi_t, psi_r, as_printed)
    return q_function((1 - fraction / dof) / np.sqrt(spread))


def gaussian_outage_prob(approx, query, context=None):
    """Outage probability ``Pr{C < R}`` under the Gaussian approximation.

    A rate query returns ``Q((mu - R) / sigma)``; with ``sigma = 0`` the
    law is a point mass and the result is 0, 1/2 or 1.  A multiplexing
    fraction query uses the SNR-free low-SNR forms and needs ``context``:
    ``n_t``, ``n_r``, ``psi_t``, ``psi_r`` for FRMK, ``gains``, ``psi_t``,
    ``psi_r`` (lists) and optionally ``n_t``, ``n_r``, ``as_printed`` for
    RDMK.  An epsilon query is the inverse problem, see
    :func:`outage_capacity_eps`.
    """
    if query.kind == "epsilon":
        raise DomainError("an epsilon query asks for a rate; use outage_capacity_eps")
    if query.kind == "rate":
        R = float(query.rate)
        if approx.sigma2 == 0:
            return 0.5 if R == approx.mu else float(R > approx.mu)
        return q_function((approx.mu - R) / approx.sigma)
    ctx = dict(context or {})
    try:
        if approx.channel_class == "FRMK":
            return frmk_fraction_outage(
                query.fraction, ctx["n_t"], ctx["n_r"], ctx["psi_t"], ctx["psi_r"]
            )
        return rdmk_fraction_outage(
            query.fraction,
            ctx["gains"],
            ctx["psi_t"],
            ctx["psi_r"],
            ctx.get("n_t"),
            ctx.get("n_r"),
            ctx.get("as_printed", False),
        )
    except KeyError as exc:
        raise DomainError(f"fraction query needs {exc.args[0]!r} in context") from None


def _floor(value, what):
    if value < 0:
        warnings.warn(
            f"{what} is negative ({value:.6g}); floored at 0",
            NegativeCapacityWarning,
            stacklevel=3,
        )
        return 0.0
    return float(value)


def outage_capacity_eps(approx, eps):
    """``C_eps = mu - sigma Q^{-1}(eps)``, floored at 0 with a warning.

    >>> round(outage_capacity_eps(GaussianApprox(2.0, 0.25, 'exact', 'FRMK'), 0.1), 4)
    1.3592
    """
    if not 0 < eps < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {eps!r}")
    return _floor(approx.mu - approx.sigma * q_inverse(eps), "outage capacity")


def frmk_low_snr_outage_capacity(snr, psi_t, psi_r, eps):
    """``snr (1 - sqrt(Psi_t Psi_r) Q^{-1}(eps))``, floored at 0."""
    if not 0 < eps < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {eps!r}")
    snr = _check_snr(snr)
    return _floor(snr * (1 - np.sqrt(psi_t * psi_r) * q_inverse(eps)), "outage capacity")


def rdmk_low_snr_outage_capacity(snr, gains, psi_t, psi_r, eps, as_printed=False):
    """``snr (1 - sqrt(sum |a_k|^4 (Psi_tk + Psi_rk)) Q^{-1}(eps))``, floored at 0."""
    if not 0 < eps < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {eps!r}")
    snr = _check_snr(snr)
    spread = rdmk_spread(gains, psi_t, psi_r, as_printed)
    return _floor(snr * (1 - np.sqrt(spread) * q_inverse(eps)), "outage capacity")
