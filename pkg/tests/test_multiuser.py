import warnings

import numpy as np
import pytest

from multikeyhole.asymptotics import q_inverse, rdmk_moments
from multikeyhole.errors import DiagnosticWarning, DomainError
from multikeyhole.multiuser import (
    FeedbackSpec,
    SchedulingSpec,
    feedback_bits,
    max_gaussian_oracle,
    relay_throughput,
    relay_throughput_high_snr,
    relay_throughput_low_snr,
    scheduled_throughput,
)


def test_single_user_is_round_robin():
    t = scheduled_throughput(2.0, 0.5, 1)
    assert t.mean == 2.0 and t.gain == 0.0


def test_scheduled_throughput_value():
    t = scheduled_throughput(2.0, 0.5, 100)
    assert np.isclose(t.mean, 2 + 0.5 * np.sqrt(2 * np.log(100)))
    assert abs(t.mean - 3.5175) < 1e-4


def test_scheduled_throughput_validation():
    with pytest.raises(DomainError):
        scheduled_throughput(1.0, 0.1, 0)
    with pytest.raises(DomainError):
        scheduled_throughput(1.0, -0.1, 5)
    with pytest.raises(DomainError):
        SchedulingSpec(0)


def test_max_of_gaussians_oracle_close():
    m, _ = max_gaussian_oracle(2.0, 0.5, 1000, 10_000, 1)
    assert abs(scheduled_throughput(2.0, 0.5, 1000).mean / m - 1) < 0.10


def test_max_of_gaussians_oracle_brute_force():
    m, se = max_gaussian_oracle(0.0, 1.0, 2, 50_000, 2)
    assert abs(m - 1 / np.sqrt(np.pi)) < 3 * se


def test_relay_low_snr_closed_form():
    M, n_t, n_r, g1, K = 3, 8, 6, 1e-3, 50
    g = np.full(M, 1 / np.sqrt(M))
    exact = relay_throughput(g, np.full(M, 1 / n_t), np.full(M, 1 / n_r), g1, K).mean
    assert abs(exact / relay_throughput_low_snr(M, n_t, n_r, g1, K) - 1) < 0.01


def test_relay_high_snr_closed_form():
    M, n_t, n_r, g1, K = 2, 8, 8, 1e4, 50
    g = np.full(M, 1 / np.sqrt(M))
    hi = relay_throughput(g, np.full(M, 1 / n_t), np.full(M, 1 / n_r), g1, K, "high_snr").mean
    # M ln(M g1) + sum ln(1/M) collapses to M ln g1
    assert np.isclose(hi, relay_throughput_high_snr(M, n_t, n_r, g1, K), rtol=1e-12)


def test_relay_single_user_is_mean():
    M, g1 = 3, 0.5
    g = np.full(M, 1 / np.sqrt(M))
    t = relay_throughput(g, [0.2] * M, [0.2] * M, g1, 1)
    assert np.isclose(t.mean, M * np.log1p(g1))


def test_relay_gain_scales_as_sqrt_log_users():
    g = np.full(2, 1 / np.sqrt(2))
    mu = rdmk_moments(g, [0.1, 0.1], [0.1, 0.1], 2 * 0.5).mu
    for K in (10, 100, 1000):
        r1 = relay_throughput(g, [0.1, 0.1], [0.1, 0.1], 0.5, K).mean - mu
        r2 = relay_throughput(g, [0.1, 0.1], [0.1, 0.1], 0.5, K * K).mean - mu
        assert np.isclose(r2 / r1, np.sqrt(2))


def test_relay_throughput_increases_with_measures():
    g = np.full(2, 1 / np.sqrt(2))
    grid = np.linspace(0.05, 1, 12)
    for regime in ("exact", "low_snr", "high_snr"):
        v = [relay_throughput(g, [p, 0.1], [0.1, 0.1], 0.3, 20, regime).mean for p in grid]
        assert np.all(np.diff(v) > 0)


def test_relay_throughput_decreases_with_antennas():
    M, g1, K = 2, 0.01, 100
    g = np.full(M, 1 / np.sqrt(M))
    v = [relay_throughput(g, np.full(M, 1 / n), np.full(M, 1 / n), g1, K).mean for n in (2, 4, 8, 16, 32)]
    assert np.all(np.diff(v) < 0)


def test_relay_high_snr_zero_gain():
    with pytest.raises(DomainError):
        relay_throughput([1.0, 0.0], [0.1, 0.1], [0.1, 0.1], 10.0, 5, "high_snr")


def test_feedback_unit_argument():
    P0, mu, sigma = 0.05, 1.0, 0.2
    v = 2 * sigma * q_inverse(P0) / mu
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiagnosticWarning)
        assert abs(feedback_bits(mu, sigma, FeedbackSpec(v, P0))) < 1e-12


def test_feedback_example():
    b = feedback_bits(1.0, 0.1, FeedbackSpec(0.05, 0.01))
    assert np.isclose(b, np.log(4 * q_inverse(0.01)), rtol=1e-14)
    assert abs(b - 2.2306) < 1e-4


def test_feedback_monotone_grid():
    vs = np.linspace(0.01, 0.2, 10)
    ps = np.array([1e-4, 1e-3, 1e-2, 0.05, 0.2])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiagnosticWarning)
        B = np.array([[feedback_bits(2.0, 0.5, FeedbackSpec(v, p)) for v in vs] for p in ps])
    assert np.all(np.diff(B, axis=1) < 0)
    assert np.all(np.diff(B, axis=0) < 0)


def test_feedback_domain():
    with pytest.raises(DomainError):
        feedback_bits(1.0, 0.1, FeedbackSpec(0.05, 0.5))
    with pytest.raises(DomainError):
        FeedbackSpec(0.0, 0.1)
    with pytest.raises(DomainError):
        feedback_bits(1.0, 0.0, FeedbackSpec(0.05, 0.1))
    with pytest.warns(DiagnosticWarning):
        feedback_bits(1.0, 0.01, FeedbackSpec(1.0, 0.1))
