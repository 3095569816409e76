"""Spatial correlation matrices and their Hermitian square roots.

Every correlation matrix in this package is an ``n x n`` Hermitian positive
semi-definite ``numpy`` array normalized to ``trace(R) == n``.  The same
container holds the per-keyhole Tx/Rx correlation matrices, the Tx signal
covariance used by the active-antenna experiment and the equivalent Tx
covariance ``A A^H``.
"""

import numpy as np

from .errors import DomainError, NotPSDError

__all__ = [
    "KINDS",
    "make_corr",
    "check_corr",
    "psd_sqrt",
    "random_corr",
    "frob_norm",
]

KINDS = ("identity", "exponential", "quadratic_exponential", "uniform")

TRACE_RTOL = 1e-9
PSD_RTOL = 1e-10


def frob_norm(R):
    """Frobenius norm (works on stacks of matrices along the last two axes)."""
    return np.sqrt(np.sum(np.abs(R) ** 2, axis=(-2, -1)))


def _lags(n):
    # lag[k, m] = m - k
    idx = np.arange(n)
    return idx[None, :] - idx[:, None]


def make_corr(kind, n, r=0.0):
    """Build a normalized correlation matrix from a named model.

    Parameters
    ----------
    kind : {'identity', 'exponential', 'quadratic_exponential', 'uniform'}
        Correlation model.
    n : int
        Number of antennas.
    r : complex
        Model parameter (correlation between adjacent antennas for the
        exponential models, common correlation for ``'uniform'``). Ignored
        for ``'identity'``.

    Returns
    -------
    R : ndarray, shape (n, n), complex
        ``R[k, m] = r**(m-k)`` above the diagonal for the exponential model,
        ``r**((m-k)**2)`` for the quadratic-exponential one, the conjugate
        below the diagonal in both cases.

    Raises
    ------
    DomainError
        On ``n < 1``, ``|r| >= 1`` or an unknown model. A complex ``r`` can
        make the quadratic-exponential model indefinite; that case raises
        :class:`NotPSDError`.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if kind not in KINDS:
        raise DomainError(f"unknown correlation kind {kind!r}; expected one of {KINDS}")
    if kind == "identity":
        return np.eye(n, dtype=complex)

    r = complex(r)
    if abs(r) >= 1:
        raise DomainError(f"correlation parameter r must satisfy |r| < 1, got {r}")

    if kind == "uniform":
        if r.imag != 0 or r.real < 0:
            raise DomainError(f"uniform model needs a real r in [0, 1), got {r}")
        R = np.full((n, n), r.real, dtype=complex)
        np.fill_diagonal(R, 1.0)
        return R

    lag = _lags(n)
    expo = np.abs(lag) if kind == "exponential" else lag ** 2
    upper = np.triu(np.power(r, expo), 1)
    R = upper + upper.conj().T + np.eye(n)
    if kind == "quadratic_exponential" and r.imag != 0:
        w = np.linalg.eigvalsh(R)
        if w[0] < -PSD_RTOL * w[-1]:
            raise NotPSDError(
                f"quadratic_exponential model with r={r} and n={n} is not PSD "
                f"(smallest eigenvalue {w[0]:.3g})"
            )
    return R


def check_corr(R, name="R"):
    """Validate a correlation matrix and return it as a complex array.

    Checks squareness, exact Hermitian symmetry, ``trace == n`` to 1e-9
    relative and positive semi-definiteness with the relative clamp used by
    :func:`psd_sqrt`.
    """
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] == 0:
        raise DomainError(f"{name} must be a non-empty square matrix, got shape {R.shape}")
    n = R.shape[0]
    if not np.all(np.isfinite(R)):
        raise DomainError(f"{name} has non-finite entries")
    if not np.array_equal(R, R.conj().T):
        raise DomainError(f"{name} is not Hermitian")
    tr = np.trace(R).real
    if abs(tr - n) > TRACE_RTOL * n:
        raise DomainError(f"{name} is not normalized: trace {tr!r} != {n}")
    w = np.linalg.eigvalsh(R)
    if w[0] < -PSD_RTOL * max(w[-1], 0.0):
        raise NotPSDError(f"{name} is not positive semi-definite (smallest eigenvalue {w[0]:.3g})")
    return R


def psd_sqrt(R):
    """Hermitian square root of a PSD matrix.

    Eigenvalues in ``[-1e-10 * lambda_max, 0]`` are clamped to zero so that
    rank-deficient (fully correlated) matrices are accepted.

    >>> psd_sqrt(np.diag([4.0, 0.0])).real
    array([[2., 0.],
           [0., 0.]])
    """
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DomainError(f"psd_sqrt needs a square matrix, got shape {R.shape}")
    w, V = np.linalg.eigh(R)
    tol = PSD_RTOL * max(w[-1], 0.0)
    if w[0] < -tol:
        raise NotPSDError(f"matrix is not PSD (smallest eigenvalue {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def random_corr(n, rng, rank=None):
    """Random normalized correlation matrix ``G G^H`` rescaled to trace ``n``.

    ``rank`` sets the number of columns of ``G`` (default ``n``).
    """
    rank = n if rank is None else rank
    G = (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2)
    R = G @ G.conj().T
    R = 0.5 * (R + R.conj().T)
    return R * (n / np.trace(R).real)
