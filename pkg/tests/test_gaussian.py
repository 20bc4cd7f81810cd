import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from decoherence.errors import DomainError, HeisenbergViolation
from decoherence.gaussian import (
    CorrelatorTriple,
    area_from_moments,
    entropy_from_area,
    entropy_from_symplectic,
    free_thermal_area,
    phase_space_area,
    symplectic_eigenvalues,
    triple_from_statistical,
)
from oracle_values import LN_4, S_AT_COTH_1

areas = st.floats(min_value=1.0, max_value=1e12, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e3)


def test_pure_state_has_zero_entropy():
    assert entropy_from_area(1.0) == 0.0


def test_known_values():
    assert entropy_from_area(3.0) == pytest.approx(LN_4, abs=1e-12)
    assert entropy_from_area(1.0 / math.tanh(1.0)) == pytest.approx(S_AT_COTH_1, abs=1e-14)


@pytest.mark.parametrize("delta", [1.0 + 1e-12, 1.5, 10.0, 1e8, 1e20, 1e100])
def test_matches_arbitrary_precision(delta):
    mp.mp.dps = 150
    d = mp.mpf(delta)
    a, b = (d + 1) / 2, (d - 1) / 2
    exact = a * mp.log(a) - b * mp.log(b)
    assert entropy_from_area(delta) == pytest.approx(float(exact), rel=1e-12)


@given(areas, areas)
def test_entropy_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    assert entropy_from_area(lo) <= entropy_from_area(hi)


@given(areas)
def test_large_area_asymptotics(d):
    # S -> ln(Delta/2) + 1 for a highly mixed state
    if d > 1e6:
        assert entropy_from_area(d) == pytest.approx(math.log(d / 2) + 1, rel=1e-9)


def test_array_input_keeps_shape():
    out = entropy_from_area(np.array([[1.0, 3.0], [2.0, 5.0]]))
    assert out.shape == (2, 2)
    assert out[0, 1] == pytest.approx(LN_4)


@pytest.mark.parametrize("bad", [0.999, -1.0, float("nan"), float("inf")])
def test_entropy_rejects_sub_unit_area(bad):
    with pytest.raises(DomainError):
        entropy_from_area(bad)


@given(positive, positive, st.floats(min_value=-10, max_value=10), positive)
def test_area_invariant_under_squeezing(phi2, pi2, cross, lam):
    # phi -> lam*phi, pi -> pi/lam keeps the commutator and the area
    if 4 * (phi2 * pi2 - cross**2) < 1:
        return
    a = area_from_moments(phi2, pi2, cross)
    b = area_from_moments(lam**2 * phi2, pi2 / lam**2, cross)
    assert b == pytest.approx(a, rel=1e-10)


def test_clamp_within_tolerance():
    phi2, pi2 = 0.5, 0.5 * (1 - 5e-10)
    assert area_from_moments(phi2, pi2, 0.0) == 1.0
    with pytest.raises(HeisenbergViolation):
        area_from_moments(phi2, 0.5 * (1 - 1e-6), 0.0)
    assert area_from_moments(phi2, 0.5 * (1 - 1e-6), 0.0, tol=1e-5) == 1.0


@given(positive, positive)
def test_ground_and_thermal_states(beta, omega):
    assert phase_space_area(CorrelatorTriple.ground_state(omega)) == pytest.approx(1.0, abs=1e-12)
    th = CorrelatorTriple.thermal(beta, omega)
    assert phase_space_area(th) == pytest.approx(free_thermal_area(beta, omega), rel=1e-12)


def test_triple_validation():
    with pytest.raises(DomainError):
        CorrelatorTriple(-1.0, 1.0)
    with pytest.raises(DomainError):
        CorrelatorTriple(1.0, float("nan"))
    t = triple_from_statistical(2.0, 0.25, 0.5)
    assert (t.phi2, t.pi2, t.cross) == (2.0, 0.5, 0.25)


def _random_symplectic(rng, n):
    """Product of a random orthogonal-symplectic rotation and a squeeze."""
    a = rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    h = np.block([[a + a.T, b + b.T], [b + b.T, -(a + a.T)]]) * 0.3
    j = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return expm(j @ h)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**31 - 1))
def test_symplectic_spectrum_invariant(n, seed):
    rng = np.random.default_rng(seed)
    nus = np.sort(0.5 + rng.exponential(size=n))
    sigma = np.diag(np.r_[nus, nus])
    S = _random_symplectic(rng, n)
    j = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    assert np.allclose(S @ j @ S.T, j, atol=1e-9)
    got = symplectic_eigenvalues(S @ sigma @ S.T)
    assert np.allclose(got, nus, rtol=1e-9)


def test_symplectic_batched_matches_single():
    rng = np.random.default_rng(3)
    stack = []
    for _ in range(4):
        S = _random_symplectic(rng, 3)
        nus = 0.5 + rng.exponential(size=3)
        stack.append(S @ np.diag(np.r_[nus, nus]) @ S.T)
    stack = np.array(stack)
    batched = symplectic_eigenvalues(stack)
    for sig, row in zip(stack, batched):
        assert np.allclose(symplectic_eigenvalues(sig), row, rtol=1e-12)


def test_single_mode_symplectic_matches_area():
    t = CorrelatorTriple(2.0, 3.0, 0.7)
    sigma = np.array([[t.phi2, t.cross], [t.cross, t.pi2]])
    assert 2 * symplectic_eigenvalues(sigma)[0] == pytest.approx(phase_space_area(t), rel=1e-12)


def test_entropy_from_symplectic():
    assert entropy_from_symplectic([0.5, 1.5]) == pytest.approx(LN_4)
    assert entropy_from_symplectic([]) == 0.0
    with pytest.raises(HeisenbergViolation):
        entropy_from_symplectic([0.4])


def test_symplectic_rejects_bad_shapes():
    with pytest.raises(DomainError):
        symplectic_eigenvalues(np.eye(3))
    with pytest.raises(HeisenbergViolation):
        symplectic_eigenvalues(-np.eye(2))
