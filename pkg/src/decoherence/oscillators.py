"""Exactly solvable oscillator-bath model and its perturbative master equation.

The system oscillator ``x`` (frequency ``omega0``) couples bilinearly to ``N``
bath oscillators ``q_n``. Covariance matrices use the ordering
``(x, q_1..q_N, p_x, p_1..p_N)``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, HeisenbergViolation, NumericalError, UnstableModel
from .gaussian import (
    DEFAULT_TOL,
    CorrelatorTriple,
    area_from_moments,
    entropy_from_area,
    entropy_from_symplectic,
    symplectic_eigenvalues,
)


@dataclass(frozen=True)
class OscillatorModel:
    """System oscillator plus a finite bath of thermal oscillators."""

    omega0: float
    omegas: np.ndarray
    lambdas: np.ndarray
    beta: float
    _eig: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float)).copy()
        lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=float)).copy()
        if omegas.shape != lambdas.shape or omegas.ndim != 1:
            raise DomainError("omegas and lambdas must be 1-d arrays of equal length")
        if not (np.isfinite(self.omega0) and self.omega0 > 0):
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"beta must be positive, got {self.beta}")
        if np.any(~np.isfinite(omegas)) or np.any(omegas <= 0):
            raise DomainError("bath frequencies must be positive")
        if np.any(~np.isfinite(lambdas)):
            raise DomainError("couplings must be finite")
        omegas.setflags(write=False)
        lambdas.setflags(write=False)
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "lambdas", lambdas)
        try:
            ev, vec = np.linalg.eigh(self.stiffness())
        except np.linalg.LinAlgError as exc:
            raise NumericalError("stiffness eigen-decomposition failed") from exc
        scale = max(self.omega0**2, float(np.max(omegas**2, initial=0.0)))
        if ev[0] <= 1e-12 * scale:
            raise UnstableModel(f"stiffness matrix not positive definite (smallest eigenvalue {ev[0]:.6g})")
        object.__setattr__(self, "_eig", (ev, vec))

    @property
    def n_bath(self) -> int:
        return int(self.omegas.size)

    def stiffness(self) -> np.ndarray:
        """The (N+1)x(N+1) potential matrix ``K``."""
        n = self.n_bath
        K = np.zeros((n + 1, n + 1))
        K[0, 0] = self.omega0**2
        K[np.arange(1, n + 1), np.arange(1, n + 1)] = self.omegas**2
        K[0, 1:] = self.lambdas
        K[1:, 0] = self.lambdas
        return K

    @property
    def normal_frequencies(self) -> np.ndarray:
        return np.sqrt(self._eig[0])


def build_model(
    n_bath: int = 50,
    omega0: float = 1.0,
    beta: float = 2.0,
    spacing: float = 0.01,
    coupling: float = 3.0 / 40.0,
) -> OscillatorModel:
    """Bath with ``omega_n = omega0*(1 + n*spacing)`` and uniform coupling.

    ``coupling`` is in units of ``omega0**2``. Defaults give the 50-mode
    reference configuration at ``beta*omega0 = 2``.
    """
    if n_bath < 0:
        raise DomainError(f"n_bath must be >= 0, got {n_bath}")
    n = np.arange(1, n_bath + 1)
    return OscillatorModel(
        omega0=omega0,
        omegas=omega0 * (1.0 + n * spacing),
        lambdas=np.full(n_bath, coupling * omega0**2),
        beta=beta,
    )


def model_from_config(cfg: Mapping[str, Any]) -> OscillatorModel:
    """Build a model from a mapping; explicit ``omegas``/``lambdas`` lists win."""
    if "omegas" in cfg or "lambdas" in cfg:
        return OscillatorModel(
            omega0=float(cfg.get("omega0", 1.0)),
            omegas=np.asarray(cfg["omegas"], dtype=float),
            lambdas=np.asarray(cfg["lambdas"], dtype=float),
            beta=float(cfg["beta"]),
        )
    return build_model(
        n_bath=int(cfg.get("n_bath", 50)),
        omega0=float(cfg.get("omega0", 1.0)),
        beta=float(cfg.get("beta", 2.0)),
        spacing=float(cfg.get("spacing", 0.01)),
        coupling=float(cfg.get("coupling", 3.0 / 40.0)),
    )


@dataclass(frozen=True)
class FullCovariance:
    """Symmetric second-moment matrix of all N+1 oscillators."""

    sigma: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.sigma.shape[0] // 2

    def system_triple(self) -> CorrelatorTriple:
        n = self.n_modes
        s = self.sigma
        return CorrelatorTriple(s[0, 0], s[n, n], s[0, n])

    def environment_block(self) -> np.ndarray:
        n = self.n_modes
        idx = np.r_[1:n, n + 1 : 2 * n]
        return self.sigma[np.ix_(idx, idx)]


@dataclass(frozen=True)
class EntropyDecomposition:
    s_system: float
    s_environment: float
    s_correlation: float
    s_total: float


def initial_covariance(model: OscillatorModel) -> FullCovariance:
    """System in its ground state, bath modes thermal, no cross-correlations."""
    n = model.n_bath + 1
    occ = 1.0 / np.tanh(0.5 * model.beta * model.omegas)
    x2 = np.r_[1.0 / (2.0 * model.omega0), occ / (2.0 * model.omegas)]
    p2 = np.r_[model.omega0 / 2.0, occ * model.omegas / 2.0]
    sigma = np.zeros((2 * n, 2 * n))
    sigma[np.arange(n), np.arange(n)] = x2
    sigma[n + np.arange(n), n + np.arange(n)] = p2
    return FullCovariance(sigma)


class ExactEvolution(Sequence):
    """Lazily evaluated sequence of covariances ``S(t) sigma0 S(t)^T``.

    The symplectic propagator comes from the normal-mode decomposition
    ``K = U diag(Omega^2) U^T``, so there is no time-stepping error.
    """

    def __init__(self, model: OscillatorModel, sigma0: FullCovariance, times: np.ndarray):
        self.model = model
        self.sigma0 = sigma0
        self.times = np.asarray(times, dtype=float)
        ev, self._U = model._eig
        self._freq = np.sqrt(ev)

    def __len__(self) -> int:
        return self.times.size

    def propagator(self, t: float) -> np.ndarray:
        U, w = self._U, self._freq
        c, s = np.cos(w * t), np.sin(w * t)
        A = (U * c) @ U.T
        B = (U * (s / w)) @ U.T
        C = (U * (-w * s)) @ U.T
        return np.block([[A, B], [C, A]])

    def sigma_stack(self, start: int, stop: int) -> np.ndarray:
        """Covariances for ``times[start:stop]`` as one ``(m, 2n, 2n)`` array."""
        U, w = self._U, self._freq
        wt = np.multiply.outer(self.times[start:stop], w)
        c, s = np.cos(wt), np.sin(wt)
        A = np.einsum("ik,tk,jk->tij", U, c, U)
        B = np.einsum("ik,tk,jk->tij", U, s / w, U)
        C = np.einsum("ik,tk,jk->tij", U, -w * s, U)
        S = np.concatenate([np.concatenate([A, B], axis=2), np.concatenate([C, A], axis=2)], axis=1)
        sigma = S @ self.sigma0.sigma @ np.swapaxes(S, 1, 2)
        return 0.5 * (sigma + np.swapaxes(sigma, 1, 2))

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        S = self.propagator(self.times[i])
        sigma = S @ self.sigma0.sigma @ S.T
        return FullCovariance(0.5 * (sigma + sigma.T))


def evolve_exact(model: OscillatorModel, sigma0: FullCovariance, times) -> ExactEvolution:
    """Exact covariance at each of ``times`` (ascending, starting at 0)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise DomainError("times must be a non-empty ascending array starting at t >= 0")
    return ExactEvolution(model, sigma0, times)


def entropy_decomposition(cov: FullCovariance, tol: float = DEFAULT_TOL) -> EntropyDecomposition:
    """Split the total Gaussian entropy into system, environment and correlation parts."""
    tr = cov.system_triple()
    s_sys = float(entropy_from_area(area_from_moments(tr.phi2, tr.pi2, tr.cross, tol)))
    s_env = entropy_from_symplectic(symplectic_eigenvalues(cov.environment_block()), tol)
    s_tot = entropy_from_symplectic(symplectic_eigenvalues(cov.sigma), tol)
    return EntropyDecomposition(s_sys, s_env, s_tot - s_sys - s_env, s_tot)


# ---------------------------------------------------------------------------
# Second-order time-convolutionless master equation


def _int_cos(a: np.ndarray, t: float) -> np.ndarray:
    """int_0^t cos(a s) ds, smooth through a = 0."""
    return t * np.sinc(a * t / np.pi)


def _int_sin(a: np.ndarray, t: float) -> np.ndarray:
    """int_0^t sin(a s) ds, smooth through a = 0."""
    return 0.5 * a * t * t * np.sinc(a * t / (2.0 * np.pi)) ** 2


@dataclass(frozen=True)
class MasterCoefficients:
    """Time-dependent coefficients at one instant.

    ``shift`` is the frequency renormalisation (the effective squared
    frequency is ``omega0**2 - 2*shift``), ``damping`` multiplies the momentum
    variance, and ``d_xx``/``d_xp`` are the two diffusion terms.
    """

    shift: float
    damping: float
    d_xx: float
    d_xp: float


def master_coefficients(model: OscillatorModel, t: float) -> MasterCoefficients:
    """Integrals of the bath noise and dissipation kernels against the free motion.

    With ``eta(s) = sum lambda^2 sin(w s)/(2w)`` and
    ``nu(s) = sum lambda^2 coth(beta w/2) cos(w s)/(2w)``::

        shift  = int_0^t eta(s) cos(w0 s) ds
        damping = -int_0^t eta(s) sin(w0 s) ds / w0
        d_xx   = int_0^t nu(s) cos(w0 s) ds
        d_xp   = -int_0^t nu(s) sin(w0 s) ds / w0
    """
    w0, w = model.omega0, model.omegas
    diss = model.lambdas**2 / (2.0 * w)
    noise = diss / np.tanh(0.5 * model.beta * w)
    lo, hi = w - w0, w + w0
    sin_cos = 0.5 * (_int_sin(hi, t) + _int_sin(lo, t))
    sin_sin = 0.5 * (_int_cos(lo, t) - _int_cos(hi, t))
    cos_cos = 0.5 * (_int_cos(lo, t) + _int_cos(hi, t))
    cos_sin = 0.5 * (_int_sin(hi, t) - _int_sin(lo, t))
    return MasterCoefficients(
        shift=float(diss @ sin_cos),
        damping=float(-(diss @ sin_sin) / w0),
        d_xx=float(noise @ cos_cos),
        d_xp=float(-(noise @ cos_sin) / w0),
    )


@dataclass(frozen=True)
class MasterSolution:
    times: np.ndarray
    phi2: np.ndarray
    pi2: np.ndarray
    cross: np.ndarray
    det: np.ndarray

    @property
    def area(self) -> np.ndarray:
        """Phase-space area from the directly integrated determinant."""
        if np.any(self.det < 0.25 * (1.0 - DEFAULT_TOL)):
            raise HeisenbergViolation(f"master-equation determinant {self.det.min():.12g} below 1/4")
        return 2.0 * np.sqrt(np.maximum(self.det, 0.25))

    def triples(self) -> list[CorrelatorTriple]:
        return [CorrelatorTriple(a, b, c) for a, b, c in zip(self.phi2, self.pi2, self.cross)]


def solve_master(model: OscillatorModel, times, rtol: float = 1e-10, atol: float = 1e-13) -> MasterSolution:
    """Integrate the moment equations of the perturbative master equation.

    The determinant ``phi2*pi2 - cross**2`` is carried as a fourth ODE
    variable so the area stays accurate when the variances grow secularly.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise DomainError("times must be a non-empty ascending array starting at t >= 0")
    w0sq = model.omega0**2

    def rhs(t: float, y: np.ndarray) -> list[float]:
        x2, p2, c, det = y
        co = master_coefficients(model, t)
        w2 = w0sq - 2.0 * co.shift
        return [
            2.0 * c,
            -2.0 * w2 * c + 4.0 * co.damping * p2 + 2.0 * co.d_xx,
            p2 - w2 * x2 + 2.0 * co.damping * c - co.d_xp,
            4.0 * co.damping * det + 2.0 * co.d_xx * x2 + 2.0 * co.d_xp * c,
        ]

    y0 = [1.0 / (2.0 * model.omega0), model.omega0 / 2.0, 0.0, 0.25]
    if times[-1] == times[0]:
        y = np.tile(np.asarray(y0)[:, None], times.size)
    else:
        sol = solve_ivp(rhs, (times[0], times[-1]), y0, t_eval=times, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"master-equation integration failed: {sol.message}")
        y = sol.y
    if not np.all(np.isfinite(y)):
        raise NumericalError("master-equation moments overflowed")
    return MasterSolution(times, y[0], y[1], y[2], y[3])


def evolve_master(model: OscillatorModel, times, rtol: float = 1e-10) -> list[CorrelatorTriple]:
    """Reduced system moments under the master equation, one triple per time."""
    return solve_master(model, times, rtol=rtol).triples()


@dataclass(frozen=True)
class QmSeries:
    """Entropy time series of the oscillator model (one row per time)."""

    t: np.ndarray
    delta_system: np.ndarray
    s_system: np.ndarray
    s_environment: np.ndarray
    s_correlation: np.ndarray
    s_total: np.ndarray
    s_master: np.ndarray
    delta_master: np.ndarray
    total_spectrum_drift: float

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t": self.t,
            "Delta_S": self.delta_system,
            "S_S": self.s_system,
            "S_E": self.s_environment,
            "S_SE": self.s_correlation,
            "S_total": self.s_total,
            "S_master": self.s_master,
        }


def run_qm(
    model: OscillatorModel, times, rtol: float = 1e-10, tol: float = DEFAULT_TOL, chunk: int = 256
) -> QmSeries:
    """Exact entropy decomposition alongside the master-equation entropy."""
    times = np.asarray(times, dtype=float)
    exact = evolve_exact(model, initial_covariance(model), times)
    n = model.n_bath + 1
    env = np.r_[1:n, n + 1 : 2 * n]
    nu0 = symplectic_eigenvalues(exact.sigma0.sigma)
    delta, s_sys, s_env, s_tot = (np.empty(times.size) for _ in range(4))
    drift = 0.0
    for lo in range(0, times.size, chunk):
        hi = min(lo + chunk, times.size)
        sig = exact.sigma_stack(lo, hi)
        delta[lo:hi] = area_from_moments(sig[:, 0, 0], sig[:, n, n], sig[:, 0, n], tol)
        s_sys[lo:hi] = entropy_from_area(delta[lo:hi])
        nu_env = symplectic_eigenvalues(sig[:, env][:, :, env])
        nu_all = symplectic_eigenvalues(sig)
        for dst, nus in ((s_env, nu_env), (s_tot, nu_all)):
            if np.any(2.0 * nus < 1.0 - tol):
                raise HeisenbergViolation(f"symplectic eigenvalue area {2 * nus.min():.12g} below 1 - tol")
            dst[lo:hi] = np.sum(entropy_from_area(np.maximum(2.0 * nus, 1.0)), axis=-1)
        drift = max(drift, float(np.max(np.abs(nu_all - nu0) / nu0)))
    master = solve_master(model, times, rtol=rtol)
    d_master = master.area
    return QmSeries(
        t=times,
        delta_system=delta,
        s_system=s_sys,
        s_environment=s_env,
        s_correlation=s_tot - s_sys - s_env,
        s_total=s_tot,
        s_master=np.asarray(entropy_from_area(d_master)),
        delta_master=d_master,
        total_spectrum_drift=drift,
    )
