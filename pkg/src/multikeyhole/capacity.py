"""Instantaneous capacity, Monte Carlo outage distributions and KS distances.

Capacities are in nats and always come from Hermitian eigenvalues of a PSD
Gram matrix, never from the determinant of a non-Hermitian product.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .channel import (
    ChannelSpec,
    EquivalentRayleighSpec,
    RayleighSpec,
    assemble,
    chunks,
    sample_equivalent_batch,
    sample_keyhole_factors,
    sample_keyhole_wishart_batch,
    sample_rayleigh_batch,
)
from .corr_models import psd_sqrt
from .errors import DomainError

__all__ = [
    "instantaneous_capacity",
    "keyhole_capacity_factored",
    "equivalent_rayleigh_capacity",
    "CapacitySamples",
    "EmpiricalCdf",
    "capacity_samples",
    "monte_carlo_cdf",
    "ks_distance",
    "cdf_excess",
    "ks_std",
]


def _sum_log1p(gram, scale):
    w = np.linalg.eigvalsh(gram)
    return np.sum(np.log1p(scale * np.clip(w, 0.0, None)), axis=-1)


def _gram(X):
    """Smaller of ``X X^H`` / ``X^H X`` for stacks along the last two axes."""
    Xh = np.conj(np.swapaxes(X, -1, -2))
    return X @ Xh if X.shape[-2] <= X.shape[-1] else Xh @ X


def instantaneous_capacity(H, snr):
    """``ln det(I + snr/(n_t n_r) H H^H)`` in nats.

    ``H`` may be a single ``n_r x n_t`` matrix or a stack ``(..., n_r, n_t)``;
    the result has the stack shape.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim < 2:
        H = H.reshape(1, 1) if H.ndim == 0 else H.reshape(-1, 1)
    if not np.all(np.isfinite(H)):
        raise DomainError("channel matrix H has non-finite entries")
    if snr < 0 or not np.isfinite(snr):
        raise DomainError(f"snr must be finite and >= 0, got {snr!r}")
    n_r, n_t = H.shape[-2:]
    return _sum_log1p(_gram(H), snr / (n_t * n_r))


def keyhole_capacity_factored(H_t, H_r, gains, snr):
    """Capacity from the keyhole factors, ``ln det(I + snr B_r A B_t A^H)``.

    ``B_t = H_t^H H_t / n_t`` and ``B_r = H_r^H H_r / n_r`` are ``M x M``.
    The product is symmetrized as ``B_r^{1/2} (A B_t A^H) B_r^{1/2}`` before
    the eigen-decomposition.  ``gains`` is not normalization-checked.
    """
    H_t = np.asarray(H_t, dtype=complex)
    H_r = np.asarray(H_r, dtype=complex)
    a = np.atleast_1d(np.asarray(gains, dtype=complex))
    M = a.size
    if H_t.shape[-1] != M or H_r.shape[-1] != M:
        raise DomainError(
            f"dimension mismatch: H_t {H_t.shape}, H_r {H_r.shape}, {M} keyhole gains"
        )
    if H_t.shape[:-2] != H_r.shape[:-2]:
        raise DomainError(f"batch shape mismatch: H_t {H_t.shape} vs H_r {H_r.shape}")
    n_t, n_r = H_t.shape[-2], H_r.shape[-2]
    B_t = np.conj(np.swapaxes(H_t, -1, -2)) @ H_t / n_t
    B_r = np.conj(np.swapaxes(H_r, -1, -2)) @ H_r / n_r
    S = a[:, None] * B_t * np.conj(a)[None, :]
    w, V = np.linalg.eigh(B_r)
    root = (V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))
    T = root @ S @ root
    T = 0.5 * (T + np.conj(np.swapaxes(T, -1, -2)))
    return _sum_log1p(T, snr)


def equivalent_rayleigh_capacity(H_r, Q, snr):
    """``ln det(I + snr/n_r H_r Q H_r^H)`` with ``H_r`` of shape ``(..., n_r, M)``."""
    H_r = np.asarray(H_r, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    if Q.ndim != 2 or Q.shape != (H_r.shape[-1], H_r.shape[-1]):
        raise DomainError(f"Q must be {H_r.shape[-1]}x{H_r.shape[-1]}, got {Q.shape}")
    if not np.allclose(Q, Q.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise DomainError("Q is not Hermitian")
    G = H_r @ psd_sqrt(Q)
    return _sum_log1p(_gram(G), snr / H_r.shape[-2])


@dataclass
class CapacitySamples:
    """Monte Carlo capacities (nats) with the provenance needed to rerun them."""

    values: np.ndarray
    seed: int
    n_trials: int
    spec_digest: str
    tag: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n_trials,):
            raise ValueError(f"expected {self.n_trials} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("capacity samples must be finite and non-negative")

    def mean(self):
        return float(np.mean(self.values))

    def stderr(self):
        if self.n_trials < 2:
            return float("nan")
        return float(np.std(self.values, ddof=1) / np.sqrt(self.n_trials))

    def cdf(self):
        return EmpiricalCdf(self.values)


class EmpiricalCdf:
    """Right-continuous empirical CDF, ``F(x) = #{samples <= x} / N``."""

    def __init__(self, samples):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise DomainError("empirical CDF needs at least one sample")
        self.x = x

    def __len__(self):
        return self.x.size

    def __call__(self, t):
        return np.searchsorted(self.x, t, side="right") / self.x.size

    def quantile(self, p):
        """Smallest sample value ``x`` with ``F(x) >= p``."""
        p = np.asarray(p, dtype=float)
        idx = np.clip(np.ceil(p * self.x.size).astype(int) - 1, 0, self.x.size - 1)
        return self.x[idx]


def _capacity_chunk(spec, seed, trials, tag, method="direct"):
    if isinstance(spec, ChannelSpec) and method == "wishart":
        return instantaneous_capacity(sample_keyhole_wishart_batch(spec, seed, trials, tag), spec.snr)
    if isinstance(spec, ChannelSpec):
        H_t, H_r = sample_keyhole_factors(spec, seed, trials, tag)
        if spec.M < min(spec.n_t, spec.n_r):
            # rank-deficient: the M x M factored form is cheaper than n x n
            return keyhole_capacity_factored(H_t, H_r, spec.gains, spec.snr)
        return instantaneous_capacity(assemble(H_t, H_r, spec.gains), spec.snr)
    if isinstance(spec, RayleighSpec):
        return instantaneous_capacity(sample_rayleigh_batch(spec, seed, trials, tag), spec.snr)
    if isinstance(spec, EquivalentRayleighSpec):
        H_r = sample_equivalent_batch(spec, seed, trials, tag)
        return equivalent_rayleigh_capacity(H_r, spec.Q, spec.snr)
    raise TypeError(f"unsupported spec type {type(spec).__name__}")


def _per_trial_elems(spec, method="direct"):
    if isinstance(spec, ChannelSpec) and method == "wishart":
        return 4 * (spec.n_t + spec.n_r) * spec.n_t
    if isinstance(spec, ChannelSpec):
        return 3 * spec.M * (spec.n_t + spec.n_r) + spec.n_t * spec.n_r
    if isinstance(spec, RayleighSpec):
        return 3 * spec.n_t * spec.n_r
    return 3 * spec.M * spec.n_r


def _default_tag(spec, method="direct"):
    if method == "wishart":
        return "keyhole-wishart"
    return {
        ChannelSpec: "keyhole",
        RayleighSpec: "rayleigh",
        EquivalentRayleighSpec: "equivalent",
    }[type(spec)]


def capacity_samples(spec, n_trials, seed, tag=None, workers=1, method="direct"):
    """Monte Carlo capacities for trials ``0 .. n_trials-1``.

    Trials are split into memory-bounded chunks; with ``workers > 1`` the
    chunks run in a process pool.  Results are concatenated in trial order so
    the output does not depend on ``workers``.

    ``method='wishart'`` draws equal-gain keyhole channels through the
    Bartlett shortcut (see :func:`~multikeyhole.channel.sample_keyhole_wishart_batch`),
    which is much cheaper when ``M`` is large.
    """
    if int(n_trials) != n_trials or n_trials < 1:
        raise DomainError(f"n_trials must be a positive integer, got {n_trials!r}")
    if method not in ("direct", "wishart"):
        raise DomainError(f"unknown sampling method {method!r}")
    n_trials = int(n_trials)
    tag = _default_tag(spec, method) if tag is None else tag
    parts = list(chunks(np.arange(n_trials), _per_trial_elems(spec, method)))
    if workers is None or workers <= 1 or len(parts) == 1:
        values = [_capacity_chunk(spec, seed, p, tag, method) for p in parts]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_capacity_chunk, spec, seed, p, tag, method) for p in parts]
            values = [f.result() for f in futs]
    values = np.clip(np.concatenate(values), 0.0, None)
    return CapacitySamples(values, int(seed), n_trials, spec.digest(), str(tag))


def monte_carlo_cdf(spec, n_trials, seed, tag=None, workers=1, method="direct"):
    """Empirical outage CDF ``Pr{C <= R}`` of the channel's capacity."""
    return capacity_samples(spec, n_trials, seed, tag, workers, method).cdf()


def _as_cdf(obj, what):
    if isinstance(obj, EmpiricalCdf):
        return obj
    if isinstance(obj, CapacitySamples):
        return obj.cdf()
    if callable(obj):
        return obj
    arr = np.asarray(obj, dtype=float)
    if arr.size == 0:
        raise DomainError(f"{what} is empty")
    return EmpiricalCdf(arr)


def _signed_gaps(samples, reference):
    """``(F_s - F_ref)`` at right limits and ``(F_ref - F_s)`` at left limits."""
    s = _as_cdf(samples, "samples")
    if not isinstance(s, EmpiricalCdf):
        raise DomainError("samples must be data, not a CDF function")
    ref = _as_cdf(reference, "reference")
    if isinstance(ref, EmpiricalCdf):
        # both are step functions, the supremum sits at a pooled sample point
        pts = np.concatenate([s.x, ref.x])
        d = s(pts) - ref(pts)
        return d, -d
    n = s.x.size
    F = np.asarray(ref(s.x), dtype=float)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return upper, lower


def ks_distance(samples, reference):
    """Kolmogorov-Smirnov sup-distance between an empirical CDF and a reference.

    ``reference`` is either a CDF callable (evaluated on both sides of every
    sample step) or another sample set / :class:`EmpiricalCdf`.
    """
    up, low = _signed_gaps(samples, reference)
    return float(max(0.0, up.max(), low.max()))


def cdf_excess(samples, reference):
    """One-sided gap ``sup_x (F_samples(x) - F_ref(x))``, floored at 0."""
    up, _ = _signed_gaps(samples, reference)
    return float(max(0.0, up.max()))


def ks_std(n1, n2=None):
    """Standard deviation of the KS statistic under the null, large-sample form.

    One-sample if ``n2`` is None, otherwise two-sample with the usual
    effective size ``n1 n2 / (n1 + n2)``.
    """
    n_eff = n1 if n2 is None else n1 * n2 / (n1 + n2)
    return float(stats.kstwobign.std() / np.sqrt(n_eff))
