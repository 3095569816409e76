"""Scalar measures of spatial correlation and power imbalance.

A normalized correlation matrix splits as ``R = K + P`` with
``P = diag(R) - I`` (power imbalance) and ``K = R - P`` (correlation).  The
split is orthogonal in the Frobenius inner product, so
``||R||^2 = ||K||^2 + ||P||^2`` and each part can be ranked on its own.
"""

from dataclasses import dataclass

import numpy as np

from .corr_models import check_corr, frob_norm
from .errors import DomainError

__all__ = [
    "CorrDecomposition",
    "decompose",
    "psi",
    "more_correlated",
    "more_imbalanced",
    "majorizes",
    "exp_model_asymptotic_measure",
    "exp_model_exact_measure",
    "majorizing_pair",
    "random_unitary",
]

MAJORIZATION_TOL = 1e-12


def psi(R):
    """``||R||^2 / n^2``, the squared normalized Frobenius norm."""
    R = np.asarray(R)
    n = R.shape[-1]
    return float(frob_norm(R) ** 2 / n ** 2)


@dataclass(frozen=True)
class CorrDecomposition:
    k_part: np.ndarray
    p_part: np.ndarray

    @property
    def n(self):
        return self.k_part.shape[0]

    @property
    def r_norm(self):
        """``||R|| / n``, bounded by ``[1/sqrt(n), 1]``."""
        return float(frob_norm(self.k_part + self.p_part) / self.n)

    @property
    def k_norm(self):
        """Correlation measure ``||K|| / n``, bounded by ``[1/sqrt(n), 1]``."""
        return float(frob_norm(self.k_part) / self.n)

    @property
    def p_norm(self):
        """Power-imbalance measure ``||P|| / n``, bounded by ``[0, sqrt(1 - 1/n)]``."""
        return float(frob_norm(self.p_part) / self.n)

    @property
    def angle(self):
        """Polar angle ``atan(||P|| / ||K||)`` of the (K, P) vector."""
        return float(np.arctan2(self.p_norm, self.k_norm))

    def bounds(self):
        """Map of bound name to ``(low, value, high)`` for the three measures."""
        n = self.n
        return {
            "r_norm": (1 / np.sqrt(n), self.r_norm, 1.0),
            "k_norm": (1 / np.sqrt(n), self.k_norm, 1.0),
            "p_norm": (0.0, self.p_norm, np.sqrt(1 - 1 / n)),
        }

    def bounds_ok(self, rtol=1e-12):
        return all(
            lo * (1 - rtol) - rtol <= v <= hi * (1 + rtol) + rtol
            for lo, v, hi in self.bounds().values()
        )


def decompose(R):
    """Split a normalized correlation matrix into correlation and imbalance parts.

    >>> d = decompose(np.diag([2.0, 0.0]))
    >>> round(d.p_norm, 12), round(d.k_norm, 12)
    (0.707106781187, 0.707106781187)
    """
    R = check_corr(R)
    n = R.shape[0]
    P = np.diag(np.diag(R).real) - np.eye(n)
    # unit diagonal set directly: trace(K) == n exactly, K + P == R to one ulp
    K = R.copy()
    np.fill_diagonal(K, 1.0)
    return CorrDecomposition(K, P)


def _same_size(R1, R2):
    R1 = np.asarray(R1)
    R2 = np.asarray(R2)
    if R1.shape != R2.shape:
        raise DomainError(f"size mismatch: {R1.shape} vs {R2.shape}")
    return R1, R2


def _cmp(x1, x2, rtol=1e-12):
    if abs(x1 - x2) <= rtol * max(abs(x1), abs(x2)):
        return 0
    return 1 if x1 > x2 else -1


def more_correlated(R1, R2):
    """Compare ``||K_1||`` with ``||K_2||``: 1 if R1 is more correlated, 0 if equal, -1 if less."""
    R1, R2 = _same_size(R1, R2)
    return _cmp(decompose(R1).k_norm, decompose(R2).k_norm)


def more_imbalanced(R1, R2):
    """Compare ``||P_1||`` with ``||P_2||`` (same convention as :func:`more_correlated`)."""
    R1, R2 = _same_size(R1, R2)
    return _cmp(decompose(R1).p_norm, decompose(R2).p_norm)


def _desc_eigs(R):
    w = np.linalg.eigvalsh(np.asarray(R, dtype=complex))
    return w[::-1]


def majorizes(R1, R2, tol=MAJORIZATION_TOL):
    """True if the eigenvalues of ``R1`` majorize those of ``R2``.

    Partial sums of the descending eigenvalues of ``R1`` must dominate those
    of ``R2``; a shortfall up to ``tol * n`` counts as a tie.  The total sums
    are equal for normalized inputs and are not compared.
    """
    R1, R2 = _same_size(R1, R2)
    n = R1.shape[0]
    s1 = np.cumsum(_desc_eigs(R1))
    s2 = np.cumsum(_desc_eigs(R2))
    return bool(np.all(s1[:-1] >= s2[:-1] - tol * n))


def exp_model_asymptotic_measure(n, r):
    """Leading term ``(1/n)(1+|r|^2)/(1-|r|^2)`` of ``||R||^2/n^2`` for the exponential model."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n!r}")
    a2 = abs(complex(r)) ** 2
    if a2 >= 1:
        raise DomainError(f"|r| must be < 1, got {r!r}")
    return (1 + a2) / (1 - a2) / n


def exp_model_exact_measure(n, r):
    """Exact ``||R||^2/n^2`` of the exponential model, summed by lag."""
    a2 = abs(complex(r)) ** 2
    d = np.arange(1, n)
    return float((n + 2 * np.sum((n - d) * a2 ** d)) / n ** 2)


def random_unitary(n, rng):
    """Haar-distributed unitary via QR with phase correction."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def majorizing_pair(n, rng, transfers=None):
    """Random normalized ``(R1, R2)`` with ``R1`` majorizing ``R2`` by construction.

    ``R2`` gets a random spectrum summing to ``n``.  ``R1`` starts from the
    same spectrum and receives a sequence of reverse Robin-Hood transfers
    (mass moved from a smaller eigenvalue to a larger one), each of which
    preserves the trace and can only increase the majorization order.  Both
    spectra are rotated by independent Haar unitaries.
    """
    lam2 = rng.dirichlet(np.ones(n)) * n
    lam1 = np.sort(lam2)[::-1].copy()
    transfers = rng.integers(1, 2 * n + 1) if transfers is None else transfers
    for _ in range(transfers):
        i, j = sorted(rng.choice(n, size=2, replace=False))
        # lam1 stays sorted descending: i < j means lam1[i] >= lam1[j]
        amount = rng.uniform(0, lam1[j])
        lam1[i] += amount
        lam1[j] -= amount
        lam1 = np.sort(lam1)[::-1]
    lam1 *= n / lam1.sum()
    U1, U2 = random_unitary(n, rng), random_unitary(n, rng)
    R1 = (U1 * lam1) @ U1.conj().T
    R2 = (U2 * lam2) @ U2.conj().T
    R1 = 0.5 * (R1 + R1.conj().T)
    R2 = 0.5 * (R2 + R2.conj().T)
    return R1 * (n / np.trace(R1).real), R2 * (n / np.trace(R2).real)
