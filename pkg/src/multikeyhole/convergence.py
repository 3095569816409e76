"""Numerical checks of the large-array limits and the exact second-moment identities.

The sweeps compare Monte Carlo capacity distributions of multi-keyhole
channels with their limiting Rayleigh counterparts and report KS distances;
the identity checks compare Monte Carlo second moments of random Gram
matrices with their closed forms and report standard errors.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .capacity import capacity_samples, cdf_excess, ks_distance, ks_std
from .channel import (
    ChannelSpec,
    EquivalentRayleighSpec,
    RayleighSpec,
    check_gains,
    equal_gains,
    _corr_list,
)
from .corr_models import check_corr, frob_norm, make_corr, psd_sqrt
from .errors import DiagnosticWarning, DomainError
from .rng import TrialStream, complex_normal

__all__ = [
    "gain_diagnostics",
    "average_corr_singularity",
    "quadratic_form_check",
    "gram_deviation",
    "kronecker_gram_deviation",
    "SweepResult",
    "antenna_sweep",
    "keyhole_sweep",
    "active_antenna_sweep",
    "active_covariance",
]

SINGULAR_RTOL = 1e-10
_BATCH = 4096


def gain_diagnostics(gains):
    """Sufficient and necessary convergence diagnostics of the keyhole gains.

    ``cube_sum = sum |a_k|**3`` must vanish for the capacity distribution to
    approach its Rayleigh limit as ``M`` grows; ``max_gain = max |a_k|``
    vanishing is necessary.

    >>> gain_diagnostics(equal_gains(4))["cube_sum"]
    0.5
    """
    a = np.abs(check_gains(gains))
    return {"cube_sum": float(np.sum(a ** 3)), "max_gain": float(a.max())}


def average_corr_singularity(gains, tx_corr, rx_corr):
    """Smallest eigenvalue of ``C = sum_k |a_k|^2 (R_tk^T kron R_rk)``.

    Also returns the Weyl lower bound ``sum_k |a_k|^2 l(R_tk) l(R_rk)`` (``l``
    the smallest eigenvalue) and its restriction to keyholes whose
    correlation matrices are both nonsingular,
    ``min_k l(R_tk) l(R_rk) * sum_k |a_k|^2``.
    """
    a2 = np.abs(check_gains(gains)) ** 2
    M = a2.size
    tx = np.asarray(tx_corr, dtype=complex)
    rx = np.asarray(rx_corr, dtype=complex)
    n_t = tx.shape[-1]
    n_r = rx.shape[-1]
    tx, _ = _corr_list(tx, M, n_t, "tx_corr")
    rx, _ = _corr_list(rx, M, n_r, "rx_corr")
    C = np.zeros((n_t * n_r, n_t * n_r), dtype=complex)
    lmin = np.empty(M)
    lmax = np.empty(M)
    for k in range(M):
        C += a2[k] * np.kron(tx[k].T, rx[k])
        wt = np.linalg.eigvalsh(tx[k])
        wr = np.linalg.eigvalsh(rx[k])
        lmin[k] = max(wt[0], 0.0) * max(wr[0], 0.0)
        lmax[k] = wt[-1] * wr[-1]
    w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    regular = lmin > SINGULAR_RTOL * lmax
    pooled = float(lmin[regular].min() * a2[regular].sum()) if regular.any() else 0.0
    return {
        "C_min_eig": float(w[0]),
        "C_max_eig": float(w[-1]),
        "nonsingular": bool(w[0] > SINGULAR_RTOL * w[-1]),
        "weyl_bound": float(np.sum(a2 * lmin)),
        "regular_bound": pooled,
    }


def _batches(n_trials):
    for start in range(0, n_trials, _BATCH):
        yield np.arange(start, min(start + _BATCH, n_trials))


def _draw(stream, trials, shape):
    out = np.empty((trials.size,) + shape, dtype=complex)
    for i, t in enumerate(trials):
        out[i] = complex_normal(stream.generator(t), shape)
    return out


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def quadratic_form_check(R, n_trials, seed, tag="quadratic-form"):
    """Monte Carlo mean and variance of ``beta / n`` with ``beta = ||R^{1/2} g||^2``.

    Predictions are ``tr(R) / n`` and ``||R||^2 / n^2`` (exact for Gaussian
    ``g``).
    """
    R = check_corr(R)
    n = R.shape[0]
    root = psd_sqrt(R)
    stream = TrialStream(seed, tag)
    beta = np.empty(n_trials)
    for trials in _batches(n_trials):
        h = _draw(stream, trials, (n,)) @ root.T
        beta[trials] = np.sum(np.abs(h) ** 2, axis=1) / n
    return {
        "emp_mean": float(beta.mean()),
        "emp_var": float(beta.var(ddof=1)),
        "pred_mean": float(np.trace(R).real / n),
        "pred_var": float(frob_norm(R) ** 2 / n ** 2),
        "n_trials": int(n_trials),
    }


def gram_deviation(corrs, n_trials, seed, tag="gram-deviation"):
    """``E||H^H H / n - I||^2`` for ``H`` with independent columns ``h_k ~ CN(0, R_k)``.

    Parameters
    ----------
    corrs : array_like, shape (M, n, n)
        Column correlation matrices.

    Returns
    -------
    dict
        ``analytic = n^-2 sum_{m,k} tr(R_m R_k)``, Monte Carlo ``empirical``
        and its standard error ``stderr``.
    """
    corrs = np.asarray(corrs, dtype=complex)
    if corrs.ndim == 2:
        corrs = corrs[None]
    mats = [check_corr(R, f"R[{k}]") for k, R in enumerate(corrs)]
    M, n = len(mats), mats[0].shape[0]
    if any(R.shape[0] != n for R in mats):
        raise DomainError("all column correlations must have the same size")
    S = np.sum(mats, axis=0)
    analytic = float(np.trace(S @ S).real / n ** 2)
    roots = np.stack([psd_sqrt(R) for R in mats])
    stream = TrialStream(seed, tag)
    dev = np.empty(n_trials)
    for trials in _batches(n_trials):
        G = _draw(stream, trials, (M, n))
        H = np.einsum("kij,tkj->tik", roots, G)
        D = np.conj(np.swapaxes(H, 1, 2)) @ H / n - np.eye(M)
        dev[trials] = np.sum(np.abs(D) ** 2, axis=(1, 2))
    emp, se = _mean_se(dev)
    return {"analytic": analytic, "empirical": emp, "stderr": se, "n_trials": int(n_trials)}


def kronecker_gram_deviation(R_t, R_r, n_trials, seed, tag="kronecker-gram"):
    """``E||H H^H / n_t - R_r||^2`` for ``H = R_r^{1/2} X R_t^{1/2}``.

    The closed form is ``(n_r ||R_t|| / n_t)^2``.
    """
    spec = RayleighSpec(R_t, R_r, 0.0)
    n_t, n_r = spec.n_t, spec.n_r
    analytic = float((n_r * frob_norm(spec.tx_corr) / n_t) ** 2)
    stream = TrialStream(seed, tag)
    dev = np.empty(n_trials)
    for trials in _batches(n_trials):
        H = spec._rx_root @ _draw(stream, trials, (n_r, n_t)) @ spec._tx_root
        D = H @ np.conj(np.swapaxes(H, 1, 2)) / n_t - spec.rx_corr
        dev[trials] = np.sum(np.abs(D) ** 2, axis=(1, 2))
    emp, se = _mean_se(dev)
    return {"analytic": analytic, "empirical": emp, "stderr": se, "n_trials": int(n_trials)}


@dataclass
class SweepResult:
    """One metric per swept parameter value, plus per-point metadata."""

    parameter: str
    values: list
    metric_name: str
    metric: np.ndarray
    meta: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.metric = np.asarray(self.metric, dtype=float)
        if len(self.values) != self.metric.size:
            raise ValueError("one metric value per parameter value is required")
        if self.meta and len(self.meta) != len(self.values):
            raise ValueError("one metadata record per parameter value is required")

    def strictly_decreasing(self):
        return bool(np.all(np.diff(self.metric) < 0))

    def nonincreasing_within(self, slack):
        """Nonincreasing up to at most one rise no larger than ``slack[i+1]``."""
        slack = np.broadcast_to(np.asarray(slack, dtype=float), self.metric.shape)
        rises = np.diff(self.metric)
        bad = rises > 0
        return bool(bad.sum() <= 1 and np.all(rises[bad] <= slack[1:][bad]))

    def rows(self):
        for i, v in enumerate(self.values):
            row = {self.parameter: v, self.metric_name: float(self.metric[i])}
            if self.meta:
                row.update(self.meta[i])
            yield row


def _corr(kind, n, r):
    return make_corr(kind, n, r)


def antenna_sweep(
    n_t_list,
    n_r,
    gains,
    snr,
    n_trials,
    seed,
    corr_kind="exponential",
    r=0.5,
    workers=1,
    return_samples=False,
):
    """KS distance between the keyhole capacity law and its large-``n_t`` limit.

    Every keyhole gets the model correlation at both ends (``n_t`` and
    ``n_r`` sized).  The limit is the Rayleigh channel ``H_r`` with Tx
    covariance ``A A^H``, drawn once from its own stream.

    Per-point metadata holds the KS standard deviation and
    ``dominance_gap = sup (F_limit - F_keyhole)``, which is at most sampling
    noise when the limit stochastically dominates the keyhole capacity.
    """
    gains = check_gains(gains)
    R_r = _corr(corr_kind, n_r, r)
    ref_spec = EquivalentRayleighSpec(n_r, gains, R_r, snr)
    ref = capacity_samples(ref_spec, n_trials, seed, tag="equivalent", workers=workers)
    ks, meta, samples = [], [], {}
    for n_t in n_t_list:
        spec = ChannelSpec(n_t, n_r, gains, _corr(corr_kind, n_t, r), R_r, snr)
        s = capacity_samples(spec, n_trials, seed, tag="keyhole", workers=workers)
        ks.append(ks_distance(s, ref))
        meta.append({
            "ks_std": ks_std(n_trials, n_trials),
            "dominance_gap": cdf_excess(ref, s),
            "mean": s.mean(),
            "ref_mean": ref.mean(),
        })
        samples[n_t] = s
    out = SweepResult("n_t", list(n_t_list), "ks", ks, meta)
    if return_samples:
        out.extra["samples"] = samples
        out.extra["reference"] = ref
    return out


def keyhole_sweep(
    n_t,
    n_r,
    M_list,
    snr,
    n_trials,
    seed,
    tx_corr=None,
    rx_corr=None,
    workers=1,
    return_samples=False,
):
    """KS distance between equal-gain keyhole capacities and the Kronecker-Rayleigh limit.

    Per-point metadata reports ``cube_sum = 1/sqrt(M)``, so
    ``ks / cube_sum`` tracks the convergence rate.
    """
    R_t = np.eye(n_t) if tx_corr is None else tx_corr
    R_r = np.eye(n_r) if rx_corr is None else rx_corr
    ref = capacity_samples(RayleighSpec(R_t, R_r, snr), n_trials, seed, tag="rayleigh", workers=workers)
    ks, meta, samples = [], [], {}
    for M in M_list:
        spec = ChannelSpec(n_t, n_r, equal_gains(M), R_t, R_r, snr)
        s = capacity_samples(spec, n_trials, seed, tag="keyhole", workers=workers)
        d = ks_distance(s, ref)
        cube = gain_diagnostics(spec.gains)["cube_sum"]
        ks.append(d)
        meta.append({"cube_sum": cube, "ks_over_cube_sum": d / cube, "ks_std": ks_std(n_trials, n_trials)})
        samples[M] = s
    out = SweepResult("M", list(M_list), "ks", ks, meta)
    if return_samples:
        out.extra["samples"] = samples
        out.extra["reference"] = ref
    return out


def active_covariance(n_t, k):
    """Tx covariance ``(n_t / k) diag(1, .., 1, 0, .., 0)`` with ``k`` active antennas."""
    if int(k) != k or not 1 <= k <= n_t:
        raise DomainError(f"active antenna count must be in 1..{n_t}, got {k!r}")
    d = np.zeros(n_t)
    d[: int(k)] = n_t / k
    return np.diag(d).astype(complex)


def active_antenna_sweep(
    n_t,
    n_r,
    gains,
    snr,
    k_list,
    n_trials,
    seed,
    rate=None,
    eps=0.1,
    rx_corr=None,
    workers=1,
):
    """Monte Carlo outage probability versus the number of active Tx antennas.

    The Tx sub-channels are uncorrelated and the input covariance spreads
    the power evenly over ``k`` antennas; this is the keyhole channel with
    Tx correlation :func:`active_covariance`.  All ``k`` share one stream so
    the comparison uses common random numbers.

    When ``rate`` is None it is set to the empirical ``eps`` quantile of the
    capacity with all antennas active, estimated from a separate stream.
    """
    gains = check_gains(gains)
    R_r = np.eye(n_r) if rx_corr is None else rx_corr
    full = ChannelSpec(n_t, n_r, gains, np.eye(n_t), R_r, snr)
    if rate is None:
        calib = capacity_samples(full, n_trials, seed, tag="rate-calibration", workers=workers)
        rate = float(calib.cdf().quantile(eps))
    p_out, meta = [], []
    for k in k_list:
        spec = ChannelSpec(n_t, n_r, gains, active_covariance(n_t, k), R_r, snr)
        s = capacity_samples(spec, n_trials, seed, tag="keyhole", workers=workers)
        p = float(np.mean(s.values < rate))
        p_out.append(p)
        meta.append({
            "stderr": float(np.sqrt(p * (1 - p) / n_trials)),
            "tx_measure": float(frob_norm(spec.tx_corr[0]) / n_t),
        })
    full_k = [i for i, k in enumerate(k_list) if k == n_t]
    if full_k and p_out[full_k[0]] >= 0.5:
        warnings.warn(
            f"rate {rate:.6g} gives outage {p_out[full_k[0]]:.3g} >= 1/2 with all antennas active",
            DiagnosticWarning,
            stacklevel=2,
        )
    best = int(np.argmin(p_out))
    return SweepResult(
        "k", list(k_list), "p_out", p_out, meta,
        {"rate": rate, "argmin_k": k_list[best]},
    )
