"""Two-time evolution of one momentum mode coupled to a thermal bath.

The statistical propagator ``F(t, t')`` obeys

    (d_t^2 + omega^2) F(t,t') + int dt1 M_r(t-t1) F(t1,t')
        = int dt1 M_F(t-t1) rho_c(t1,t')

and the causal propagator ``rho_c`` the homogeneous retarded equation. With
a thermal bath ``rho_c(t, t') = g(t - t')`` is translation invariant, so only
``F`` needs a two-time grid. Time stepping is second-order central
differencing; memory integrals use the product-integration weights of
:class:`~decoherence.kernels.MemoryKernels`.

Two treatments of memory reaching before ``t = 0`` are available:
``"free"`` continues ``F`` backwards as the free pure state, ``"sharp"``
cuts every memory integral at ``t1 = 0``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kb_python
from .errors import DomainError, HeisenbergViolation, NumericalError
from .gaussian import entropy_from_area
from .kernels import MemoryKernels, build_kernels
from .selfmass import QftParams

try:
    from . import _kbcore  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build
    _kbcore = None

Prehistory = Literal["free", "sharp"]


def available_backends() -> list[str]:
    return (["compiled"] if _kbcore is not None else []) + ["python"]


def default_backend() -> str:
    forced = os.environ.get("DECOHERENCE_BACKEND", "").strip().lower()
    if forced:
        if forced not in available_backends():
            raise DomainError(f"backend {forced!r} not available (have {available_backends()})")
        return forced
    return available_backends()[0]


@dataclass(frozen=True)
class EqualTimeSeries:
    """Equal-time moments on the staggered times ``(i + 1/2) dt``."""

    t: np.ndarray
    phi2: np.ndarray
    pi2: np.ndarray
    cross: np.ndarray
    delta: np.ndarray
    entropy: np.ndarray


@dataclass(frozen=True)
class TwoTimeGrid:
    """Statistical and causal propagators on ``t_i = i*dt``, ``i = 0..n_t``.

    ``F`` is stored as a full symmetric matrix (each update writes both
    triangles). ``g[n]`` is ``rho_c(t + n dt, t)``.
    """

    dt: float
    n_t: int
    omega: float
    F: np.ndarray
    g: np.ndarray
    prehistory: str
    backend: str

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt

    def rho_c(self) -> np.ndarray:
        """Causal propagator matrix, antisymmetric by construction."""
        n = self.n_t + 1
        lag = np.subtract.outer(np.arange(n), np.arange(n))
        return np.sign(lag) * self.g[np.abs(lag)]

    def commutator_residual(self) -> float:
        """Largest deviation of ``d_t rho_c(t, t')`` at ``t' = t`` from 1, and of ``rho_c(t,t)`` from 0.

        Uses the central difference in the first argument, the stencil of the stepper.
        """
        g = self.g
        slope = (g[1] - (-g[1])) / (2.0 * self.dt)
        return float(max(abs(slope - 1.0), abs(g[0])))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.F - self.F.T)))

    def equal_time(self, heisenberg_tol: float = 1e-6) -> EqualTimeSeries:
        """Moments from the midpoint stencil, exact (Delta = 1) for free evolution.

        Raises:
            HeisenbergViolation: if the area drops below ``1 - heisenberg_tol``.
        """
        F, dt = self.F, self.dt
        diag = np.diagonal(F)
        off = np.diagonal(F, -1)
        phi2 = 0.5 * (diag[1:] + diag[:-1])
        pi2 = (diag[1:] - 2.0 * off + diag[:-1]) / dt**2
        cross = (diag[1:] - diag[:-1]) / (2.0 * dt)
        radicand = 4.0 * (phi2 * pi2 - cross**2)
        delta = np.sqrt(np.maximum(radicand, 0.0))
        if delta.size and delta.min() < 1.0 - heisenberg_tol:
            raise HeisenbergViolation(f"phase-space area fell to {delta.min():.9g}")
        delta = np.maximum(delta, 1.0)
        t = (np.arange(self.n_t) + 0.5) * dt
        return EqualTimeSeries(t, phi2, pi2, cross, delta, np.asarray(entropy_from_area(delta)))


def _retarded_history(weights: np.ndarray, omega: float, dt: float, length: int) -> np.ndarray:
    """``g[n] = rho_c(n dt, 0)`` with ``g[0] = 0`` and unit initial slope."""
    g = np.zeros(length)
    if length > 1:
        g[1] = dt
    n_mem = weights.size - 1
    rev = weights[::-1]
    for n in range(1, length - 1):
        span = min(n, n_mem)
        mem = float(rev[n_mem - span :] @ g[n - span : n + 1])
        g[n + 1] = 2.0 * g[n] - g[n - 1] + dt * dt * (-omega * omega * g[n] - mem)
    return g


def _noise_tables(kernels: MemoryKernels, g: np.ndarray, sharp: bool) -> tuple[np.ndarray, np.ndarray]:
    """Statistical-memory source terms indexed by ``lag + 1`` with ``lag = i - j >= -1``.

    ``full[lag + 1]`` integrates over all earlier times (window permitting);
    ``partial[q, lag + 1]`` stops at ``t1 = 0`` for rows ``q < n_mem``.
    """
    n_mem = kernels.n_mem
    sf = kernels.statistical
    dt = kernels.dt
    full = np.zeros(n_mem + 2)
    for lag in range(-1, n_mem + 1):
        lo = max(1, -lag)
        hi = n_mem - lag
        if hi >= lo:
            m = np.arange(lo, hi + 1)
            full[lag + 1] = -dt * float(sf[lag + m] @ g[m])
    local = -kernels.statistical_local * g[1]
    full[0] += local
    if not sharp:
        return full, np.zeros((1, 1))
    partial = np.zeros((n_mem, n_mem + 2))
    running = np.zeros(n_mem + 2)
    for q in range(n_mem):
        lags = np.arange(-1, q)
        running[lags + 1] += sf[q] * g[q - lags]
        lags_all = np.arange(-1, q + 1)
        endpoint = 0.5 * sf[q] * g[q - lags_all]
        partial[q, : q + 2] = -dt * (running[: q + 2] - endpoint)
        partial[q, 0] += local
    return full, partial


def evolve_kb(
    params: QftParams,
    kernels: MemoryKernels,
    n_t: int,
    prehistory: Prehistory = "free",
    backend: str | None = None,
    growth_bound: float = 1e8,
) -> TwoTimeGrid:
    """Evolve the pure initial state ``F(0,0) = 1/(2 omega)`` for ``n_t`` steps.

    Raises:
        NumericalError: if ``|F|`` grows beyond ``growth_bound / (2 omega)``.
    """
    if n_t < 2:
        raise DomainError("n_t must be at least 2")
    if prehistory not in ("free", "sharp"):
        raise DomainError(f"unknown prehistory treatment {prehistory!r}")
    if kernels.params != params:
        raise DomainError("kernels were built for different parameters")
    backend = backend or default_backend()
    if backend not in available_backends():
        raise DomainError(f"backend {backend!r} not available")
    sharp = prehistory == "sharp"
    w, dt = params.omega, kernels.dt
    n_mem = kernels.n_mem
    weights = np.ascontiguousarray(kernels.retarded_weights, dtype=float)
    g = _retarded_history(weights, w, dt, max(n_mem, n_t) + 3)
    noise_full, noise_partial = _noise_tables(kernels, g, sharp)
    phased = weights * np.exp(-1j * w * kernels.tau)
    suffix = np.r_[np.cumsum(phased[::-1])[::-1], 0.0]
    edge = kernels.sharp_edge_weights() if sharp else np.zeros(n_mem + 1)

    F = np.zeros((n_t + 1, n_t + 1))
    f00 = 1.0 / (2.0 * w)
    F[0, 0] = f00
    if sharp:
        force0 = 0.0
    else:
        force0 = -(weights[0] * f00 + (suffix[1].real / (2.0 * w) if n_mem >= 1 else 0.0)) + noise_full[1]
    F[1, 0] = F[0, 1] = f00 + 0.5 * dt * dt * (-w * w * f00 + force0)
    F[1, 1] = f00 + dt * dt * (-w * w * f00 + force0 + 0.5 * w)

    core = _kbcore if backend == "compiled" else _kb_python
    status = core.evolve_rows(
        F,
        weights,
        np.ascontiguousarray(noise_full),
        np.ascontiguousarray(noise_partial),
        np.ascontiguousarray(edge),
        np.ascontiguousarray(suffix.real),
        np.ascontiguousarray(suffix.imag),
        float(w),
        float(dt),
        int(n_mem),
        bool(sharp),
        float(growth_bound * f00),
    )
    if status < 0:
        raise NumericalError(f"statistical propagator unstable: |F| exceeded bound at step {-status}")
    grid = TwoTimeGrid(dt, n_t, w, F, g, prehistory, backend)
    if grid.commutator_residual() > 1e-3:
        raise NumericalError(f"canonical commutator drifted by {grid.commutator_residual():.3g}")
    return grid


def default_memory_window(params: QftParams) -> float:
    return 10.0 * params.beta


@dataclass(frozen=True)
class KbRun:
    params: QftParams
    kernels: MemoryKernels
    grid: TwoTimeGrid
    series: EqualTimeSeries


def run_kb(
    params: QftParams,
    dt: float = 0.05,
    n_t: int = 2000,
    t_mem: float | None | Literal["default"] = "default",
    prehistory: Prehistory = "free",
    taper_fraction: float = 0.1,
    decay_tol: float = 0.5,
    backend: str | None = None,
) -> KbRun:
    """Build kernels, evolve, and extract the entropy series in one call.

    ``t_mem="default"`` uses ten thermal times; ``None`` keeps the full memory.
    """
    if t_mem == "default":
        t_mem = default_memory_window(params)
    kernels = build_kernels(
        params, dt=dt, t_mem=t_mem, n_steps=n_t, taper_fraction=taper_fraction, decay_tol=decay_tol
    )
    grid = evolve_kb(params, kernels, n_t, prehistory=prehistory, backend=backend)
    return KbRun(params, kernels, grid, grid.equal_time())


def late_time_area(series: EqualTimeSeries, fraction: float = 0.4) -> float:
    """Mean phase-space area over the last ``fraction`` of the run."""
    n = max(int(math.ceil(fraction * series.t.size)), 1)
    return float(np.mean(series.delta[-n:]))
