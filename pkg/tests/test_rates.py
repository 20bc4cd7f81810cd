import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decoherence.errors import DomainError, FitFailed
from decoherence.rates import extract_rate

T = np.linspace(0.0, 40.0, 4001)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.1, max_value=1.5),
    st.floats(min_value=0.05, max_value=5.0),
    st.floats(min_value=1.0, max_value=10.0),
)
def test_recovers_pure_exponential(gamma, amp, ms):
    delta = ms - amp * np.exp(-gamma * T)
    fit = extract_rate(T, delta, delta_ms=ms, t_lo=1.0)
    assert fit.method == "direct"
    assert fit.gamma_dec == pytest.approx(gamma, rel=1e-6)
    assert fit.amplitude == pytest.approx(amp, rel=1e-5)
    assert fit.residual < 1e-8


def test_reference_synthetic_case():
    delta = 4.0 - 0.7 * np.exp(-0.45 * T)
    fit = extract_rate(T, delta, delta_ms=4.0)
    assert fit.gamma_dec == pytest.approx(0.45, rel=1e-6)
    assert fit.fit_window[0] == pytest.approx(5.0)
    assert fit.delta_ms_used == 4.0


def test_oscillating_approach_uses_envelope():
    delta = 3.0 - 0.9 * np.exp(-0.3 * T) * np.cos(2.2 * T)
    fit = extract_rate(T, delta, delta_ms=3.0, t_lo=2.0)
    assert fit.method == "envelope"
    assert fit.gamma_dec == pytest.approx(0.3, rel=1e-2)
    assert fit.n_points >= 3


def test_auto_asymptote_from_tail():
    delta = 2.0 + 0.5 * np.exp(-0.8 * T)
    fit = extract_rate(T, delta, t_lo=1.0)
    assert fit.delta_ms_used == pytest.approx(2.0, abs=1e-8)
    assert fit.gamma_dec == pytest.approx(0.8, rel=1e-4)


def test_explicit_window_end():
    delta = 4.0 - 0.7 * np.exp(-0.45 * T)
    fit = extract_rate(T, delta, delta_ms=4.0, t_lo=2.0, t_hi=10.0)
    assert fit.fit_window == pytest.approx((2.0, 10.0))
    assert fit.gamma_dec == pytest.approx(0.45, rel=1e-8)


@pytest.mark.parametrize(
    "delta, kwargs, message",
    [
        (np.full(T.size, 2.0), {}, "constant"),
        (4.0 - 0.7 * np.exp(-0.45 * T), {"t_lo": 39.99}, "ends before"),
        (4.0 - 0.7 * np.exp(-0.01 * T), {"delta_ms": 4.0}, "e-folds"),
        (4.0 - 0.7 * np.exp(-0.45 * T), {"t_lo": 5.0, "t_hi": 5.02, "delta_ms": 4.0}, "four samples"),
    ],
)
def test_fit_failures(delta, kwargs, message):
    with pytest.raises(FitFailed, match=message):
        extract_rate(T, delta, **kwargs)


def test_growing_deviation_is_rejected():
    delta = 4.0 - 1e-3 * np.exp(0.2 * T)
    with pytest.raises(FitFailed):
        extract_rate(T, delta, delta_ms=4.0, t_lo=1.0, t_hi=30.0, min_efolds=0.0)


def test_noisy_series_rejected_by_residual():
    rng = np.random.default_rng(0)
    delta = 4.0 - np.exp(-0.45 * T) * (1 + 0.9 * rng.uniform(-1, 1, T.size))
    with pytest.raises(FitFailed, match="residual"):
        extract_rate(T, delta, delta_ms=4.0, t_lo=0.5, residual_tol=0.05)


@pytest.mark.parametrize(
    "t, delta",
    [(np.arange(3.0), np.ones(3)), (np.array([0.0, 2.0, 1.0, 3.0]), np.ones(4)), (T, np.ones(10))],
)
def test_input_validation(t, delta):
    with pytest.raises(DomainError):
        extract_rate(t, delta)
