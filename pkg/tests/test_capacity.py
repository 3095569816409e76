import numpy as np
import pytest
from scipy import stats

from multikeyhole.capacity import (
    CapacitySamples,
    EmpiricalCdf,
    capacity_samples,
    cdf_excess,
    equivalent_rayleigh_capacity,
    instantaneous_capacity,
    keyhole_capacity_factored,
    ks_distance,
    ks_std,
    monte_carlo_cdf,
)
from multikeyhole.channel import ChannelSpec, RayleighSpec, assemble, sample_keyhole_factors
from multikeyhole.corr_models import make_corr, random_corr
from multikeyhole.errors import DomainError


def test_zero_channel_has_zero_capacity():
    assert instantaneous_capacity(np.zeros((3, 2)), 10.0) == 0


def test_scalar_channel():
    assert np.isclose(instantaneous_capacity(np.array([[1.0]]), 1.0), np.log(2), atol=1e-15)


def test_nonfinite_channel_rejected():
    with pytest.raises(DomainError):
        instantaneous_capacity(np.array([[np.inf, 0]]), 1.0)


def test_capacity_matches_logdet_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n_r, n_t = rng.integers(1, 6, size=2)
        H = rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))
        snr = 10 ** rng.uniform(-1, 2)
        _, ref = np.linalg.slogdet(np.eye(n_r) + snr / (n_t * n_r) * H @ H.conj().T)
        assert np.isclose(instantaneous_capacity(H, snr), ref, rtol=1e-12)


def test_capacity_nondecreasing_in_snr():
    rng = np.random.default_rng(1)
    H = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    c = [instantaneous_capacity(H, s) for s in np.linspace(0, 100, 50)]
    assert np.all(np.diff(c) >= 0)


def test_factored_form_zero_gains():
    rng = np.random.default_rng(2)
    H_t = rng.standard_normal((3, 2)) + 0j
    H_r = rng.standard_normal((4, 2)) + 0j
    assert keyhole_capacity_factored(H_t, H_r, [0, 0], 10) == 0


def test_factored_form_single_keyhole_closed_form():
    rng = np.random.default_rng(3)
    h_t = rng.standard_normal((5, 1)) + 1j * rng.standard_normal((5, 1))
    h_r = rng.standard_normal((3, 1)) + 1j * rng.standard_normal((3, 1))
    a, snr = 0.7 + 0.1j, 4.0
    ref = np.log1p(snr * abs(a) ** 2 * np.sum(abs(h_t) ** 2) / 5 * np.sum(abs(h_r) ** 2) / 3)
    assert np.isclose(keyhole_capacity_factored(h_t, h_r, [a], snr), ref, rtol=1e-12)
    assert np.isclose(instantaneous_capacity(a * h_r @ h_t.conj().T, snr), ref, rtol=1e-12)


def test_factored_form_dimension_mismatch():
    with pytest.raises(DomainError):
        keyhole_capacity_factored(np.ones((3, 2)), np.ones((3, 3)), [1, 0], 1)


def test_factored_and_assembled_agree_on_random_draws():
    rng = np.random.default_rng(4)
    for i in range(200):
        M = int(rng.choice([1, 2, 4]))
        n_t, n_r = (int(x) for x in rng.integers(1, 9, size=2))
        g = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        spec = ChannelSpec(n_t, n_r, g / np.linalg.norm(g), random_corr(n_t, rng), random_corr(n_r, rng), 10.0)
        H_t, H_r = sample_keyhole_factors(spec, i, [0])
        for snr in (0.1, 1, 10, 100):
            a = instantaneous_capacity(assemble(H_t, H_r, spec.gains), snr)
            b = keyhole_capacity_factored(H_t, H_r, spec.gains, snr)
            assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_equivalent_rayleigh_capacity_cases():
    rng = np.random.default_rng(5)
    H_r = rng.standard_normal((3, 1)) + 1j * rng.standard_normal((3, 1))
    assert equivalent_rayleigh_capacity(H_r, np.zeros((1, 1)), 5) == 0
    ref = np.log1p(5 / 3 * np.sum(np.abs(H_r) ** 2))
    assert np.isclose(equivalent_rayleigh_capacity(H_r, np.eye(1), 5), ref)
    with pytest.raises(DomainError):
        equivalent_rayleigh_capacity(H_r, -np.eye(1), 5)


def test_empirical_cdf_convention():
    F = EmpiricalCdf([3.0, 1.0, 2.0, 2.0])
    np.testing.assert_array_equal(F([0.5, 1.0, 2.0, 2.5, 3.0]), [0, 0.25, 0.75, 0.75, 1.0])
    assert F.quantile(0.5) == 2.0
    with pytest.raises(DomainError):
        EmpiricalCdf([])


def test_capacity_samples_invariants():
    with pytest.raises(DomainError):
        CapacitySamples([-1.0], 0, 1, "x")
    with pytest.raises(ValueError):
        CapacitySamples([1.0, 2.0], 0, 3, "x")


def test_zero_snr_point_mass():
    F = monte_carlo_cdf(ChannelSpec.uniform(2, 2, 2, snr=0.0), 100, 1)
    assert F(0.0) == 1.0
    assert ks_distance(capacity_samples(ChannelSpec.uniform(2, 2, 1, snr=0.0), 10, 1), np.zeros(10)) == 0


def test_single_trial_cdf_is_one_step():
    F = monte_carlo_cdf(RayleighSpec(np.eye(2), np.eye(2), 10.0), 1, 3)
    assert len(F) == 1
    assert F(F.x[0]) == 1 and F(F.x[0] - 1e-9) == 0


def test_monte_carlo_reproducible_against_other_seed():
    spec = RayleighSpec(np.eye(2), np.eye(2), 10.0)
    a = capacity_samples(spec, 20_000, 1)
    b = capacity_samples(spec, 20_000, 2)
    se = np.hypot(a.stderr(), b.stderr())
    assert abs(a.mean() - b.mean()) < 3 * se
    np.testing.assert_array_equal(a.values, capacity_samples(spec, 20_000, 1).values)


def test_outage_cdf_nondecreasing():
    F = monte_carlo_cdf(ChannelSpec.uniform(2, 2, 2, make_corr("exponential", 2, 0.5), snr=10), 2000, 0)
    assert np.all(np.diff(F(np.linspace(0, 10, 500))) >= 0)


def test_ks_distance_basic_cases():
    x = np.linspace(0, 1, 50)
    assert ks_distance(x, x) == 0
    assert ks_distance(x - 10, stats.norm(100, 1).cdf) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        ks_distance([], x)


def test_ks_distance_matches_scipy():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(1000)
    y = rng.standard_normal(700) + 0.1
    assert np.isclose(ks_distance(x, stats.norm.cdf), stats.kstest(x, "norm").statistic, atol=1e-15)
    assert np.isclose(ks_distance(x, y), stats.ks_2samp(x, y).statistic, atol=1e-15)


def test_ks_of_normal_draws_is_small():
    x = np.random.default_rng(10).standard_normal(100_000)
    assert ks_distance(x, stats.norm.cdf) < 0.01


def test_cdf_excess_is_one_sided():
    x = np.arange(10.0)
    assert cdf_excess(x + 5, x) == 0
    assert cdf_excess(x, x + 5) == 0.5


def test_ks_std_scaling():
    assert np.isclose(ks_std(100), stats.kstwobign.std() / 10)
    assert np.isclose(ks_std(100, 100), ks_std(50))
