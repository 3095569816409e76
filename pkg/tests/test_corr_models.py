import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multikeyhole.corr_models import KINDS, check_corr, make_corr, psd_sqrt, random_corr
from multikeyhole.errors import DomainError, NotPSDError


def test_exponential_zero_r_is_identity():
    np.testing.assert_array_equal(make_corr("exponential", 3, 0.0), np.eye(3))


def test_exponential_real_two_by_two():
    np.testing.assert_array_equal(make_corr("exponential", 2, 0.5), [[1, 0.5], [0.5, 1]])


def test_exponential_complex_uses_conjugate_below_diagonal():
    R = make_corr("exponential", 2, 0.5j)
    np.testing.assert_array_equal(R, [[1, 0.5j], [-0.5j, 1]])


def test_quadratic_exponential_entries():
    R = make_corr("quadratic_exponential", 4, 0.5)
    assert R[0, 2] == 0.5 ** 4
    assert R[3, 0] == 0.5 ** 9


def test_uniform_entries():
    R = make_corr("uniform", 3, 0.3)
    assert np.all(R[~np.eye(3, dtype=bool)] == 0.3)
    assert np.all(np.diag(R) == 1)


@pytest.mark.parametrize("r", [1.0, 1.2, 0.8 + 0.8j])
def test_r_out_of_range_rejected(r):
    with pytest.raises(DomainError):
        make_corr("exponential", 4, r)


def test_n_zero_rejected():
    with pytest.raises(DomainError):
        make_corr("identity", 0)


def test_uniform_rejects_negative_and_complex():
    for r in (-0.1, 0.2j):
        with pytest.raises(DomainError):
            make_corr("uniform", 3, r)


def test_unknown_kind():
    with pytest.raises(DomainError):
        make_corr("toeplitz", 3, 0.1)


def test_indefinite_complex_quadratic_raises_not_psd():
    with pytest.raises(NotPSDError):
        make_corr("quadratic_exponential", 8, 0.5j)


@settings(max_examples=200, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    n=st.integers(1, 24),
    mag=st.floats(0, 0.99),
    phase=st.floats(0, 2 * np.pi),
)
def test_models_satisfy_invariants(kind, n, mag, phase):
    r = mag if kind in ("uniform", "quadratic_exponential") else mag * np.exp(1j * phase)
    R = make_corr(kind, n, r)
    check_corr(R)
    assert np.array_equal(R, R.conj().T)
    assert abs(np.trace(R).real - n) <= 1e-9 * n


def test_check_corr_rejects_bad_matrices():
    with pytest.raises(DomainError):
        check_corr(np.eye(3) * 2)
    with pytest.raises(DomainError):
        check_corr(np.array([[1, 0.5], [0.4, 1]]))
    with pytest.raises(NotPSDError):
        check_corr(np.array([[1, 2], [2, 1]]))
    with pytest.raises(DomainError):
        check_corr(np.ones((2, 3)))
    with pytest.raises(DomainError):
        check_corr(np.array([[np.nan, 0], [0, 1]]))


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.eye(4)), np.eye(4), atol=1e-15)
    np.testing.assert_allclose(psd_sqrt(np.diag([2.0, 0.0])), np.diag([np.sqrt(2), 0]), atol=1e-15)
    R = make_corr("exponential", 2, 0.5)
    S = psd_sqrt(R)
    np.testing.assert_allclose(S @ S.conj().T, R, atol=1e-12)


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(NotPSDError):
        psd_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_psd_sqrt_accepts_rank_one():
    R = np.ones((4, 4))
    S = psd_sqrt(R)
    np.testing.assert_allclose(S @ S, R, atol=1e-12)


def test_psd_sqrt_roundtrip_on_random_matrices():
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 17))
        R = random_corr(n, rng, rank=int(rng.integers(1, n + 1)))
        S = psd_sqrt(R)
        worst = max(worst, np.linalg.norm(S @ S.conj().T - R) / np.linalg.norm(R))
    assert worst < 1e-9
