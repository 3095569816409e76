"""Random channel matrices for multi-keyhole and Kronecker-Rayleigh channels.

A multi-keyhole channel with ``M`` independent keyholes is

    H = sum_k a_k h_rk h_tk^H = H_r A H_t^H,

with ``h_tk = R_tk^{1/2} g_tk`` and ``h_rk = R_rk^{1/2} g_rk`` built from
unit-variance circular Gaussian vectors.  All samplers are deterministic in
``(seed, tag, trial)`` through :class:`~multikeyhole.rng.TrialStream`.
"""

from dataclasses import dataclass, field
import hashlib

import numpy as np

from .corr_models import check_corr, psd_sqrt
from .errors import DomainError
from .rng import TrialStream, complex_normal

__all__ = [
    "check_gains",
    "equal_gains",
    "ChannelSpec",
    "RayleighSpec",
    "EquivalentRayleighSpec",
    "sample_keyhole",
    "sample_keyhole_factors",
    "sample_keyhole_batch",
    "sample_rayleigh",
    "sample_rayleigh_batch",
    "sample_equivalent_batch",
    "assemble",
    "chunks",
    "wishart_eligible",
    "sample_keyhole_wishart_batch",
]

GAIN_ATOL = 1e-9
# bound on complex entries drawn per chunk, keeps batches around 100 MB
_CHUNK_ELEMS = 4_000_000


def check_gains(a):
    """Return keyhole gains as a complex vector, checking ``sum |a_k|^2 == 1``."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    if a.ndim != 1 or a.size == 0:
        raise DomainError(f"gains must be a non-empty vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("gains have non-finite entries")
    power = np.sum(np.abs(a) ** 2)
    if abs(power - 1.0) > GAIN_ATOL:
        raise DomainError(f"gains must have unit total power, sum |a_k|^2 = {power!r}")
    return a


def equal_gains(M):
    """``M`` keyholes of gain ``1/sqrt(M)``."""
    if int(M) != M or M < 1:
        raise DomainError(f"number of keyholes must be a positive integer, got {M!r}")
    return np.full(int(M), 1.0 / np.sqrt(M), dtype=complex)


def _corr_list(corr, M, size, name):
    """Broadcast one matrix (or accept a list of M) and validate sizes."""
    arr = np.asarray(corr, dtype=complex)
    if arr.ndim == 2:
        mats = [check_corr(arr, name)] * M
        shared = True
    elif arr.ndim == 3:
        if arr.shape[0] != M:
            raise DomainError(f"{name} has {arr.shape[0]} matrices for {M} keyholes")
        mats = [check_corr(m, f"{name}[{k}]") for k, m in enumerate(arr)]
        shared = all(np.array_equal(mats[0], m) for m in mats[1:])
    else:
        raise DomainError(f"{name} must be a matrix or a list of matrices")
    for k, m in enumerate(mats):
        if m.shape[0] != size:
            raise DomainError(f"{name}[{k}] is {m.shape[0]}x{m.shape[0]}, expected {size}x{size}")
    return np.stack(mats), shared


def _roots(mats, shared):
    if shared:
        return psd_sqrt(mats[0]), None
    return None, np.stack([psd_sqrt(m) for m in mats])


def _digest(*parts):
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(str(p.shape).encode())
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(repr(p).encode())
    return h.hexdigest()[:16]


@dataclass(eq=False)
class ChannelSpec:
    """Full description of a multi-keyhole channel experiment.

    ``tx_corr``/``rx_corr`` accept either one matrix shared by all keyholes
    or a stack of ``M`` matrices.  Square roots are computed once here.
    """

    n_t: int
    n_r: int
    gains: np.ndarray
    tx_corr: np.ndarray
    rx_corr: np.ndarray
    snr: float
    _tx_root: np.ndarray = field(init=False, repr=False, default=None)
    _rx_root: np.ndarray = field(init=False, repr=False, default=None)
    _tx_roots: np.ndarray = field(init=False, repr=False, default=None)
    _rx_roots: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        for name in ("n_t", "n_r"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
            setattr(self, name, int(v))
        self.gains = check_gains(self.gains)
        M = self.gains.size
        if not np.isfinite(self.snr) or self.snr < 0:
            raise DomainError(f"snr must be finite and >= 0, got {self.snr!r}")
        self.snr = float(self.snr)
        self.tx_corr, tx_shared = _corr_list(self.tx_corr, M, self.n_t, "tx_corr")
        self.rx_corr, rx_shared = _corr_list(self.rx_corr, M, self.n_r, "rx_corr")
        self._tx_root, self._tx_roots = _roots(self.tx_corr, tx_shared)
        self._rx_root, self._rx_roots = _roots(self.rx_corr, rx_shared)

    @classmethod
    def uniform(cls, n_t, n_r, M, tx_corr=None, rx_corr=None, snr=1.0):
        """Equal-gain spec; ``None`` correlation means identity."""
        tx = np.eye(n_t) if tx_corr is None else tx_corr
        rx = np.eye(n_r) if rx_corr is None else rx_corr
        return cls(n_t, n_r, equal_gains(M), tx, rx, snr)

    @property
    def M(self):
        return self.gains.size

    @property
    def is_full_rank(self):
        """FRMK when ``M >= min(n_t, n_r)``, RDMK otherwise."""
        return self.M >= min(self.n_t, self.n_r)

    def digest(self):
        return _digest("keyhole", self.n_t, self.n_r, self.gains, self.tx_corr, self.rx_corr, self.snr)


@dataclass(eq=False)
class RayleighSpec:
    """Kronecker-correlated Rayleigh channel ``H = R_r^{1/2} X R_t^{1/2}``."""

    tx_corr: np.ndarray
    rx_corr: np.ndarray
    snr: float
    _tx_root: np.ndarray = field(init=False, repr=False, default=None)
    _rx_root: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.tx_corr = check_corr(self.tx_corr, "tx_corr")
        self.rx_corr = check_corr(self.rx_corr, "rx_corr")
        if not np.isfinite(self.snr) or self.snr < 0:
            raise DomainError(f"snr must be finite and >= 0, got {self.snr!r}")
        self.snr = float(self.snr)
        self._tx_root = psd_sqrt(self.tx_corr)
        self._rx_root = psd_sqrt(self.rx_corr)

    @property
    def n_t(self):
        return self.tx_corr.shape[0]

    @property
    def n_r(self):
        return self.rx_corr.shape[0]

    def digest(self):
        return _digest("rayleigh", self.tx_corr, self.rx_corr, self.snr)


@dataclass(eq=False)
class EquivalentRayleighSpec:
    """Rayleigh channel seen through the keyholes when ``n_t`` is large.

    ``H_r`` is ``n_r x M`` with columns ``R_rk^{1/2} g_rk`` and the Tx
    covariance is ``Q = A A^H``; capacity is
    ``ln det(I + snr/n_r H_r Q H_r^H)``.
    """

    n_r: int
    gains: np.ndarray
    rx_corr: np.ndarray
    snr: float
    _rx_root: np.ndarray = field(init=False, repr=False, default=None)
    _rx_roots: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if int(self.n_r) != self.n_r or self.n_r < 1:
            raise DomainError(f"n_r must be a positive integer, got {self.n_r!r}")
        self.n_r = int(self.n_r)
        self.gains = check_gains(self.gains)
        if not np.isfinite(self.snr) or self.snr < 0:
            raise DomainError(f"snr must be finite and >= 0, got {self.snr!r}")
        self.snr = float(self.snr)
        self.rx_corr, shared = _corr_list(self.rx_corr, self.gains.size, self.n_r, "rx_corr")
        self._rx_root, self._rx_roots = _roots(self.rx_corr, shared)

    @classmethod
    def from_keyhole(cls, spec):
        return cls(spec.n_r, spec.gains, spec.rx_corr, spec.snr)

    @property
    def M(self):
        return self.gains.size

    @property
    def Q(self):
        return np.diag(np.abs(self.gains) ** 2).astype(complex)

    def digest(self):
        return _digest("equivalent", self.n_r, self.gains, self.rx_corr, self.snr)


def chunks(trials, per_trial_elems):
    """Split a trial range into consecutive sub-ranges bounded in memory."""
    trials = np.asarray(trials, dtype=np.int64)
    size = max(1, _CHUNK_ELEMS // max(1, per_trial_elems))
    for i in range(0, trials.size, size):
        yield trials[i:i + size]


def _apply_roots(shared, per_key, G):
    # G: (T, M, n) -> h vectors (T, n, M) as columns
    if shared is not None:
        return np.einsum("ij,tkj->tik", shared, G, optimize=True)
    return np.einsum("kij,tkj->tik", per_key, G, optimize=True)


def sample_keyhole_factors(spec, seed, trials, tag="keyhole"):
    """Draw the Tx/Rx sub-channel matrices for a batch of trials.

    Returns
    -------
    H_t : ndarray, shape (T, n_t, M)
        Columns are ``h_tk``.
    H_r : ndarray, shape (T, n_r, M)
        Columns are ``h_rk``.
    """
    trials = np.atleast_1d(np.asarray(trials, dtype=np.int64))
    stream = TrialStream(seed, tag)
    M, n_t, n_r = spec.M, spec.n_t, spec.n_r
    G = np.empty((trials.size, M, n_t + n_r), dtype=complex)
    for i, t in enumerate(trials):
        G[i] = complex_normal(stream.generator(t), (M, n_t + n_r))
    H_t = _apply_roots(spec._tx_root, spec._tx_roots, G[:, :, :n_t])
    H_r = _apply_roots(spec._rx_root, spec._rx_roots, G[:, :, n_t:])
    return H_t, H_r


def assemble(H_t, H_r, gains):
    """``H = H_r A H_t^H`` for stacks of factors."""
    return np.matmul(H_r * gains, np.conj(np.swapaxes(H_t, -1, -2)))


def sample_keyhole_batch(spec, seed, trials, tag="keyhole"):
    """Channel matrices ``(T, n_r, n_t)`` for the given trial indices."""
    H_t, H_r = sample_keyhole_factors(spec, seed, trials, tag)
    return assemble(H_t, H_r, spec.gains)


def sample_keyhole(spec, seed, trial, tag="keyhole"):
    """One multi-keyhole channel realization, an ``n_r x n_t`` matrix."""
    return sample_keyhole_batch(spec, seed, [trial], tag)[0]


def sample_rayleigh_batch(spec, seed, trials, tag="rayleigh"):
    trials = np.atleast_1d(np.asarray(trials, dtype=np.int64))
    stream = TrialStream(seed, tag)
    n_t, n_r = spec.n_t, spec.n_r
    X = np.empty((trials.size, n_r, n_t), dtype=complex)
    for i, t in enumerate(trials):
        X[i] = complex_normal(stream.generator(t), (n_r, n_t))
    return spec._rx_root @ X @ spec._tx_root


def sample_rayleigh(R_t, R_r, seed, trial, tag="rayleigh"):
    """One Kronecker-Rayleigh realization ``R_r^{1/2} X R_t^{1/2}``."""
    spec = RayleighSpec(R_t, R_r, 0.0)
    return sample_rayleigh_batch(spec, seed, [trial], tag)[0]


def sample_equivalent_batch(spec, seed, trials, tag="equivalent"):
    """``H_r`` stacks ``(T, n_r, M)`` for the equivalent Rayleigh channel."""
    trials = np.atleast_1d(np.asarray(trials, dtype=np.int64))
    stream = TrialStream(seed, tag)
    G = np.empty((trials.size, spec.M, spec.n_r), dtype=complex)
    for i, t in enumerate(trials):
        G[i] = complex_normal(stream.generator(t), (spec.M, spec.n_r))
    return _apply_roots(spec._rx_root, spec._rx_roots, G)


def wishart_eligible(spec):
    """True when the Bartlett shortcut reproduces the keyhole law exactly.

    Needs equal gains, one Tx and one Rx correlation shared by all keyholes
    and ``M >= n_t``.
    """
    return (
        spec._tx_root is not None
        and spec._rx_root is not None
        and spec.M >= spec.n_t
        and np.allclose(np.abs(spec.gains), 1.0 / np.sqrt(spec.M), rtol=0, atol=1e-15)
    )


def sample_keyhole_wishart_batch(spec, seed, trials, tag="keyhole-wishart"):
    """Equal-gain keyhole channels drawn in ``O(n_t n_r)`` per trial.

    With ``H_t = R_t^{1/2} G_t`` and ``H_r = R_r^{1/2} G_r``, conditioning on
    ``G_t`` makes every row of ``G_r G_t^H`` Gaussian with covariance
    ``W = G_t G_t^H``, a complex Wishart matrix with ``M`` degrees of freedom.
    Writing ``W = T T^H`` (Bartlett, ``T`` lower triangular) gives

        H = M^{-1/2} R_r^{1/2} X T^H R_t^{1/2}

    with ``X`` i.i.d.  This is the same distribution as
    :func:`sample_keyhole_batch` for Gaussian sub-channels, but the draws
    differ, so the two samplers use different stream tags.
    """
    if not wishart_eligible(spec):
        raise DomainError("wishart sampler needs equal gains, shared correlations and M >= n_t")
    trials = np.atleast_1d(np.asarray(trials, dtype=np.int64))
    stream = TrialStream(seed, tag)
    M, n_t, n_r = spec.M, spec.n_t, spec.n_r
    lower = np.tril_indices(n_t, -1)
    shape = M - np.arange(n_t)
    X = np.empty((trials.size, n_r, n_t), dtype=complex)
    T = np.zeros((trials.size, n_t, n_t), dtype=complex)
    for i, t in enumerate(trials):
        gen = stream.generator(t)
        X[i] = complex_normal(gen, (n_r, n_t))
        T[i][lower] = complex_normal(gen, (lower[0].size,))
        T[i][np.diag_indices(n_t)] = np.sqrt(gen.standard_gamma(shape))
    TH = np.conj(np.swapaxes(T, -1, -2))
    return spec._rx_root @ X @ TH @ spec._tx_root / np.sqrt(M)
