"""Time-domain memory kernels of the one-loop self-mass.

With a thermal bath the self-mass depends on the time difference only, so the
kernels are Fourier transforms of ``Im M^r``:

* retarded ``(2/pi) int_0^inf Im M(w) sin(w tau) dw`` for ``tau > 0``;
* statistical ``(1/pi) int_0^inf coth(beta w/2) Im M(w) cos(w tau) dw``.

The vacuum pieces are known in closed form. The retarded one is a
``cos(k tau)/tau`` light-cone singularity; the renormalisation condition turns
it into a plus-distribution ``d ln(mu tau)/d tau`` with ``mu = m e^gamma``,
which is integrated against piecewise-linear data by product integration.
The thermal remainders are transformed numerically with Filon-type weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, WindowTooShort
from .selfmass import QftParams, SelfMassSpectrum, im_selfmass_closed, im_selfmass_vacuum

EULER_GAMMA = 0.5772156649015329


def filon_sin(x: np.ndarray, f: np.ndarray, tau: np.ndarray, block: int = 128) -> np.ndarray:
    """``int f(x) sin(tau x) dx`` over the nodes ``x`` with f piecewise linear."""
    return _filon(x, f, tau, block, odd=True)


def filon_cos(x: np.ndarray, f: np.ndarray, tau: np.ndarray, block: int = 128) -> np.ndarray:
    """``int f(x) cos(tau x) dx`` over the nodes ``x`` with f piecewise linear."""
    return _filon(x, f, tau, block, odd=False)


def _filon(x, f, tau, block, odd):
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    x1, x2 = x[:-1], x[1:]
    slope = (f[1:] - f[:-1]) / (x2 - x1)
    mid = 0.5 * (x1 + x2)
    half = 0.5 * (x2 - x1)
    out = np.empty(tau.size)
    for lo in range(0, tau.size, block):
        t = tau[lo : lo + block, None]
        small = np.abs(t) < 1e-300
        ts = np.where(small, 1.0, t)
        # integration by parts: boundary term plus the exact integral of the
        # piecewise-constant derivative
        if odd:
            edge = -(f[-1] * np.cos(ts[:, 0] * x[-1]) - f[0] * np.cos(ts[:, 0] * x[0])) / ts[:, 0]
            body = np.sum(slope * 2.0 * np.cos(ts * mid) * np.sin(ts * half), axis=1) / ts[:, 0] ** 2
            zero = 0.0
        else:
            edge = (f[-1] * np.sin(ts[:, 0] * x[-1]) - f[0] * np.sin(ts[:, 0] * x[0])) / ts[:, 0]
            body = -np.sum(slope * 2.0 * np.sin(ts * mid) * np.sin(ts * half), axis=1) / ts[:, 0] ** 2
            zero = float(np.sum((f[1:] + f[:-1]) * half))
        out[lo : lo + block] = np.where(small[:, 0], zero, edge + body)
    return out


def kernel_frequency_grid(params: QftParams, n: int = 6000, span_in_temperatures: float = 90.0) -> np.ndarray:
    """Nodes on ``[0, k + 90/beta]`` clustered geometrically toward the light cone."""
    k = params.k
    gap = 1e-12 * k
    top = k + span_in_temperatures / params.beta
    u = np.linspace(0.0, 1.0, n)
    below = np.sort(k - gap - (k - gap) * np.expm1(12.0 * (1.0 - u)) / math.expm1(12.0))
    above = k + gap + (top - k - gap) * np.expm1(14.0 * u) / math.expm1(14.0)
    return np.unique(np.r_[0.0, below, above])


def _thermal_integrands(params: QftParams, x: np.ndarray, im: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integrands for the retarded (odd) and statistical (even) thermal transforms."""
    vac = im_selfmass_vacuum(params, x)
    odd = im - vac
    with np.errstate(divide="ignore", invalid="ignore"):
        even = im / np.tanh(0.5 * params.beta * x) - vac
    if x[0] == 0.0:
        probe = 1e-7 * params.k
        slope = float(im_selfmass_closed(params, probe)) / probe
        even[0] = 2.0 * slope / params.beta
        odd[0] = 0.0
    return odd, even


def cosine_taper(n_mem: int, fraction: float = 0.1) -> np.ndarray:
    """Window equal to 1 up to ``(1-fraction)`` of the span, then a half-cosine to 0."""
    w = np.ones(n_mem + 1)
    if fraction <= 0 or n_mem == 0:
        return w
    start = int((1.0 - fraction) * n_mem)
    if start >= n_mem:
        return w
    z = (np.arange(start, n_mem + 1) - start) / (n_mem - start)
    w[start:] = 0.5 * (1.0 + np.cos(np.pi * z))
    return w


def log_cell_means(mu: float, dt: float, n: int) -> np.ndarray:
    """``(1/dt) int_{j dt}^{(j+1) dt} ln(mu tau) d tau`` for ``j = 0..n-1``."""
    edges = np.arange(n + 1) * dt
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(edges > 0, edges * np.log(mu * edges) - edges, 0.0)
    return np.diff(anti) / dt


@dataclass(frozen=True)
class MemoryKernels:
    """Discretised memory kernels on the evolution step.

    Attributes:
        dt: time step.
        t_mem: truncation window (``None`` for untruncated memory).
        n_mem: number of steps spanned by the window.
        taper: window weights on ``tau_l = l*dt``, ``l = 0..n_mem``.
        retarded_weights: quadrature weights ``K_l`` such that
            ``int_0^t_mem M_r(tau) f(t - tau) d tau ~ sum_l K_l f(t - tau_l)``,
            vacuum plus-distribution included.
        retarded_thermal: thermal part of ``M_r`` at the nodes.
        statistical: ``M_F(tau_l)`` without its local part, taper applied.
        statistical_local: coefficient ``c`` of the ``c*delta(tau)`` part of ``M_F``.
        vacuum_coefficient: ``c = -h^2/(32 pi)``.
        mu: renormalisation scale of the plus-distribution, ``m_phi e^gamma``.
    """

    params: QftParams
    dt: float
    t_mem: float | None
    n_mem: int
    taper: np.ndarray
    retarded_weights: np.ndarray
    retarded_thermal: np.ndarray
    statistical: np.ndarray
    statistical_local: float
    vacuum_coefficient: float
    mu: float

    @property
    def tau(self) -> np.ndarray:
        return np.arange(self.n_mem + 1) * self.dt

    def retarded_density(self) -> np.ndarray:
        """Effective ``M_r(tau_l)`` (weights divided by ``dt``); finite at ``tau = 0``."""
        return self.retarded_weights / self.dt

    def sharp_edge_weights(self) -> np.ndarray:
        """Weight of the node ``tau_l = t`` when memory is cut at ``t_1 = 0``.

        Index ``l`` is the current time step; entry 0 is zero (empty integral).
        """
        n = self.n_mem
        tau = self.tau
        cells = log_cell_means(self.mu, self.dt, n)
        edge = np.zeros(n + 1)
        if n == 0:
            return edge
        ln_end = np.log(self.mu * tau[1:])
        vac = (2.0 * self.vacuum_coefficient / math.pi) * (ln_end - cells[:n]) * np.cos(self.params.k * tau[1:])
        edge[1:] = (vac + 0.5 * self.dt * self.retarded_thermal[1:]) * self.taper[1:]
        return edge


def build_kernels(
    params: QftParams,
    spectrum: SelfMassSpectrum | None = None,
    dt: float = 0.05,
    t_mem: float | None = None,
    n_steps: int | None = None,
    taper_fraction: float = 0.1,
    decay_tol: float = 0.5,
    grid_points: int = 6000,
) -> MemoryKernels:
    """Tabulate the retarded and statistical kernels at multiples of ``dt``.

    Args:
        spectrum: if given, its tabulated ``Im M^r`` is transformed instead of
            the closed form on the dedicated kernel grid.
        t_mem: memory window; ``None`` keeps the full history, which needs
            ``n_steps`` (the run length).
        decay_tol: maximum allowed :func:`kernel_decay_ratio`. The massless
            bath gives ``1/tau`` light-cone tails, so the ratio falls only
            like ``beta/t_mem``.

    Raises:
        WindowTooShort: if the kernels have not decayed at ``t_mem``.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"dt must be positive, got {dt}")
    if params.k <= 0:
        raise DomainError("memory kernels require k > 0")
    if spectrum is not None and spectrum.params != params:
        raise DomainError("spectrum was tabulated for different parameters")
    if t_mem is None:
        if n_steps is None:
            raise DomainError("untruncated memory needs n_steps")
        n_mem = int(n_steps) + 2
        taper = np.ones(n_mem + 1)
    else:
        if t_mem <= 0:
            raise DomainError(f"t_mem must be positive, got {t_mem}")
        n_mem = max(int(round(t_mem / dt)), 1)
        taper = cosine_taper(n_mem, taper_fraction)
    tau = np.arange(n_mem + 1) * dt
    c = -(params.h**2) / (32.0 * math.pi)
    mu = params.m_phi * math.exp(EULER_GAMMA)
    if params.h == 0.0:
        zeros = np.zeros(n_mem + 1)
        return MemoryKernels(params, dt, t_mem, n_mem, taper, zeros, zeros.copy(), zeros.copy(), 0.0, 0.0, mu)

    if spectrum is not None:
        x = np.r_[0.0, spectrum.k0]
        im = np.r_[0.0, spectrum.im_M]
    else:
        x = kernel_frequency_grid(params, grid_points)
        im = im_selfmass_closed(params, x)
    odd, even = _thermal_integrands(params, x, im)
    if not (np.all(np.isfinite(odd)) and np.all(np.isfinite(even))):
        raise NumericalError("non-finite self-mass on the kernel grid")
    ret_th = (2.0 / math.pi) * filon_sin(x, odd, tau)
    stat_th = (1.0 / math.pi) * filon_cos(x, even, tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat_vac = np.where(tau > 0, -(c / math.pi) * np.sin(params.k * tau) / tau, -(c / math.pi) * params.k)
    cells = log_cell_means(mu, dt, n_mem + 1)
    plus = np.empty(n_mem + 1)
    plus[0] = cells[0]
    plus[1:] = cells[1:] - cells[:-1]
    trap = np.ones(n_mem + 1)
    trap[0] = 0.5
    weights = ((2.0 * c / math.pi) * plus * np.cos(params.k * tau) + dt * trap * ret_th) * taper
    kernels = MemoryKernels(
        params, dt, t_mem, n_mem, taper, weights, ret_th, (stat_th + stat_vac) * taper, c, c, mu,
    )
    if t_mem is not None:
        ratio = kernel_decay_ratio(kernels)
        if ratio > decay_tol:
            raise WindowTooShort(
                f"kernel at t_mem={t_mem:g} is still {ratio:.3g} of its peak (limit {decay_tol:g})"
            )
    return kernels


def kernel_decay_ratio(kernels: MemoryKernels) -> float:
    """Size of the untapered retarded kernel just before the taper, relative to its peak.

    The tail is the maximum of ``|M_r|`` over ``[0.8, 0.9]*t_mem``; the peak is
    the maximum over ``tau >= beta/2`` (the vacuum part is singular at 0).
    """
    p = kernels.params
    tau = kernels.tau
    c = kernels.vacuum_coefficient
    if c == 0.0 or tau[-1] <= 0.5 * p.beta:
        return 0.0 if c == 0.0 else 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        full = np.where(tau > 0, (2.0 * c / math.pi) * np.cos(p.k * tau) / tau, 0.0) + kernels.retarded_thermal
    head = np.abs(full[tau >= 0.5 * p.beta]).max()
    tail_sel = (tau >= 0.8 * tau[-1]) & (tau <= 0.9 * tau[-1])
    if not np.any(tail_sel):
        return 1.0
    return float(np.abs(full[tail_sel]).max() / head)
