import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from decoherence.errors import DomainError, HeisenbergViolation, UnstableModel
from decoherence.gaussian import entropy_from_area, free_thermal_area
from decoherence.oscillators import (
    OscillatorModel,
    build_model,
    entropy_decomposition,
    evolve_exact,
    evolve_master,
    initial_covariance,
    master_coefficients,
    model_from_config,
    run_qm,
    solve_master,
)


def _J(n):
    return np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])


@pytest.fixture(scope="module")
def small_model():
    return build_model(n_bath=8, coupling=0.1)


def test_reference_bath_layout():
    m = build_model()
    assert m.n_bath == 50
    assert m.omegas[0] == pytest.approx(1.01)
    assert m.omegas[-1] == pytest.approx(1.5)
    assert np.all(m.lambdas == pytest.approx(0.075))


def test_model_from_config_explicit_lists():
    m = model_from_config({"omegas": [1.2, 1.4], "lambdas": [0.1, 0.2], "beta": 1.0})
    assert m.n_bath == 2
    assert m.stiffness()[0, 2] == 0.2
    assert model_from_config({}).n_bath == 50


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(omega0=1.0, omegas=[1.0, 2.0], lambdas=[0.1], beta=1.0),
        dict(omega0=-1.0, omegas=[1.0], lambdas=[0.1], beta=1.0),
        dict(omega0=1.0, omegas=[0.0], lambdas=[0.1], beta=1.0),
        dict(omega0=1.0, omegas=[1.0], lambdas=[0.1], beta=0.0),
    ],
)
def test_invalid_models(kwargs):
    with pytest.raises(DomainError):
        OscillatorModel(**kwargs)


def test_overcoupled_bath_is_rejected():
    with pytest.raises(UnstableModel):
        build_model(n_bath=50, coupling=0.5)


def test_propagator_is_symplectic_group(small_model):
    ev = evolve_exact(small_model, initial_covariance(small_model), [0.0])
    n = small_model.n_bath + 1
    S1, S2, S12 = ev.propagator(0.7), ev.propagator(1.9), ev.propagator(2.6)
    assert np.allclose(ev.propagator(0.0), np.eye(2 * n))
    assert np.allclose(S1 @ _J(n) @ S1.T, _J(n), atol=1e-12)
    assert np.allclose(S2 @ S1, S12, atol=1e-12)


def test_batched_covariances_match_single(small_model):
    times = np.linspace(0, 20, 7)
    ev = evolve_exact(small_model, initial_covariance(small_model), times)
    stack = ev.sigma_stack(0, len(ev))
    for i, cov in enumerate(ev):
        assert np.allclose(stack[i], cov.sigma, atol=1e-13)


def test_initial_decomposition(small_model):
    cov = initial_covariance(small_model)
    d = entropy_decomposition(cov)
    expected_env = sum(
        entropy_from_area(free_thermal_area(small_model.beta, w)) for w in small_model.omegas
    )
    assert d.s_system == 0.0
    assert d.s_environment == pytest.approx(expected_env, rel=1e-12)
    assert d.s_correlation == pytest.approx(0.0, abs=1e-12)


def test_uncoupled_system_stays_pure():
    m = build_model(n_bath=4, coupling=0.0)
    series = run_qm(m, np.linspace(0, 30, 61))
    assert np.all(series.s_system == 0.0)
    assert np.all(series.s_master == 0.0)


def test_coefficients_vanish_initially(small_model):
    c = master_coefficients(small_model, 0.0)
    assert (c.shift, c.damping, c.d_xx, c.d_xp) == (0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("t", [0.3, 2.0, 17.5])
def test_coefficients_match_quadrature(small_model, t):
    m = small_model
    w0, w, lam = m.omega0, m.omegas, m.lambdas

    def eta(s):
        return float(np.sum(lam**2 * np.sin(w * s) / (2 * w)))

    def nu(s):
        return float(np.sum(lam**2 / np.tanh(m.beta * w / 2) * np.cos(w * s) / (2 * w)))

    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-11)
    ref = (
        quad(lambda s: eta(s) * math.cos(w0 * s), 0, t, **opts)[0],
        -quad(lambda s: eta(s) * math.sin(w0 * s), 0, t, **opts)[0] / w0,
        quad(lambda s: nu(s) * math.cos(w0 * s), 0, t, **opts)[0],
        -quad(lambda s: nu(s) * math.sin(w0 * s), 0, t, **opts)[0] / w0,
    )
    c = master_coefficients(m, t)
    assert np.allclose((c.shift, c.damping, c.d_xx, c.d_xp), ref, rtol=1e-8, atol=1e-13)


def test_determinant_variable_consistent(small_model):
    sol = solve_master(small_model, np.linspace(0, 20, 201))
    direct = sol.phi2 * sol.pi2 - sol.cross**2
    assert np.allclose(sol.det, direct, rtol=1e-8)
    assert sol.det[0] == 0.25
    assert len(evolve_master(small_model, [0.0, 1.0])) == 2


def test_times_validation(small_model):
    with pytest.raises(DomainError):
        evolve_exact(small_model, initial_covariance(small_model), [1.0, 0.5])
    with pytest.raises(DomainError):
        solve_master(small_model, [-1.0, 0.0])


@settings(max_examples=15, deadline=None)
@given(
    st.integers(min_value=1, max_value=6),
    st.floats(min_value=0.3, max_value=5.0),
    st.floats(min_value=0.0, max_value=0.2),
    st.floats(min_value=0.005, max_value=0.2),
)
def test_unitary_invariants_random_baths(n_bath, beta, coupling, spacing):
    try:
        m = build_model(n_bath=n_bath, beta=beta, coupling=coupling, spacing=spacing)
    except UnstableModel:
        assume(False)
    ev = evolve_exact(m, initial_covariance(m), np.linspace(0, 40, 21))
    parts = [entropy_decomposition(cov) for cov in ev]
    s_total = np.array([p.s_total for p in parts])
    assert np.ptp(s_total) < 1e-9
    assert all(p.s_system >= 0 for p in parts)
    # subadditivity: the mutual information S_S + S_E - S_total is non-negative
    assert all(p.s_correlation <= 1e-9 for p in parts)


def test_master_equation_positivity_loss_is_reported():
    # a single strongly coupled cold mode drives the perturbative generator
    # outside the physical set; the area check must catch it
    m = build_model(n_bath=1, beta=4.0, coupling=0.125, spacing=0.1875)
    sol = solve_master(m, np.linspace(0, 40, 401))
    assert sol.det.min() < 0.25 * (1 - 1e-6)
    with pytest.raises(HeisenbergViolation):
        sol.area
