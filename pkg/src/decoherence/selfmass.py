"""One-loop thermal self-mass of a scalar coupled to a massless thermal bath.

The interaction ``h phi chi^2 / 2`` with massless ``chi`` at inverse
temperature ``beta`` gives a retarded self-mass whose imaginary part has two
cuts: decay (``|k0| > k``) and Landau damping (``|k0| < k``). The real part
follows from a dispersion relation in ``s = k0**2`` with the vacuum piece
subtracted on shell, so the pole mass at zero temperature stays ``m_phi``.

The stationary statistical propagator then follows from the KMS condition,
giving the late-time mixed-state phase-space area ``delta_ms``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, ThermalInstability, UnderResolvedPeak
from .gaussian import CorrelatorTriple, entropy_from_area, free_thermal_area, phase_space_area

PERTURBATIVE_LIMIT = 4.0


@dataclass(frozen=True)
class QftParams:
    """Parameters of one momentum mode of the interacting scalar."""

    m_phi: float = 1.0
    h: float = 3.0
    beta: float = 0.5
    k: float = 1.0

    def __post_init__(self) -> None:
        for name in ("m_phi", "h", "beta", "k"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.m_phi <= 0 or self.beta <= 0:
            raise DomainError("m_phi and beta must be positive")
        if self.h < 0 or self.k < 0:
            raise DomainError("h and k must be non-negative")
        if self.h > PERTURBATIVE_LIMIT * self.m_phi:
            warnings.warn(f"h/m_phi = {self.h / self.m_phi:g} is beyond the perturbative range", stacklevel=3)

    @property
    def omega(self) -> float:
        return math.hypot(self.k, self.m_phi)

    @property
    def vacuum_tail(self) -> float:
        """Coefficient of the large-frequency fall-off ``rho ~ c/k0**4``."""
        return self.h**2 / (16.0 * math.pi)


def bose(x, beta: float):
    """Bose-Einstein occupation ``1/(exp(beta*x) - 1)``."""
    return 1.0 / np.expm1(beta * np.asarray(x, dtype=float))


def _log_one_minus_exp(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-x))


def im_selfmass_closed(params: QftParams, k0) -> np.ndarray:
    """Im M^r from the closed-form antiderivative of the radial loop integral.

    Vectorised and exact up to round-off; diverges logarithmically at the
    light cone ``|k0| = k`` (returned as +-inf there).
    """
    k0 = np.asarray(k0, dtype=float)
    a = np.abs(k0)
    p, k, beta = params, params.k, params.beta
    pref = -(p.h**2) / 4.0 * np.sign(k0)
    if k == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            loop = (1.0 + 2.0 * bose(0.5 * a, beta)) / (8.0 * math.pi)
        return np.where(a > 0, pref * loop, 0.0)
    logs = _log_one_minus_exp(0.5 * beta * (a + k)) - _log_one_minus_exp(0.5 * beta * np.abs(a - k))
    loop = (np.where(a > k, k, 0.0) + (2.0 / beta) * logs) / (8.0 * math.pi * k)
    return pref * loop


def im_selfmass_vacuum(params: QftParams, k0) -> np.ndarray:
    """Zero-temperature part: a constant on the decay cut."""
    k0 = np.asarray(k0, dtype=float)
    return np.where(np.abs(k0) > params.k, -(params.h**2) / (32.0 * math.pi) * np.sign(k0), 0.0)


def im_retarded_selfmass(params: QftParams, k0: float, epsrel: float = 1e-12) -> float:
    """Im M^r(k0, k) by adaptive quadrature over the loop energy.

    The integrand is the thermal weight ``1 + n(E) + n(k0 - E)`` on the decay
    cut and ``n(E) - n(E + k0)`` on the Landau cut.

    Raises:
        NumericalError: if the quadrature does not converge.
    """
    k0 = float(k0)
    a, k, beta = abs(k0), params.k, params.beta
    if a == 0.0 or params.h == 0.0:
        return 0.0
    pref = -(params.h**2) / 4.0 * math.copysign(1.0, k0)
    n = lambda x: math.exp(-beta * x) / -math.expm1(-beta * x)  # noqa: E731
    opts = dict(epsabs=0.0, epsrel=epsrel, limit=400, full_output=1)
    if k == 0.0:
        return pref * (1.0 + 2.0 * n(0.5 * a)) / (8.0 * math.pi)
    if a > k:
        res = quad(lambda e: 1.0 + n(e) + n(a - e), 0.5 * (a - k), 0.5 * (a + k), **opts)
        scale = 1.0
    elif a < k:
        res = quad(lambda e: n(e) - n(e + a), 0.5 * (k - a), np.inf, **opts)
        scale = 2.0
    else:
        raise NumericalError("Im M^r diverges on the light cone |k0| = k")
    value = res[0]
    if len(res) > 3 or not math.isfinite(value):
        raise NumericalError(f"self-mass quadrature did not converge at k0={k0}")
    return pref * scale * value / (8.0 * math.pi * k)


def decay_rate_closed_form(params: QftParams) -> float:
    """Single-particle decay rate of the on-shell mode (vacuum plus thermal)."""
    h, k, beta, w = params.h, params.k, params.beta, params.omega
    vac = h * h / (32.0 * math.pi * w)
    if k == 0.0:
        return vac * (1.0 + 2.0 / math.expm1(0.5 * beta * w))
    th = h * h / (16.0 * math.pi * k * beta * w)
    return vac + th * math.log(math.expm1(-0.5 * beta * (w + k)) / math.expm1(-0.5 * beta * (w - k)))


def kramers_kronig_linear(s_nodes: np.ndarray, f_nodes: np.ndarray, s_targets, block: int = 256) -> np.ndarray:
    """Principal value ``(1/pi) PV int f(s')/(s' - s) ds'`` for piecewise-linear f.

    Each segment integrates exactly to ``b*(s2 - s1) + f_lin(s)*ln|(s2-s)/(s1-s)|``
    where ``f_lin`` is the segment's linear extension. The logarithm is taken
    through ``log1p`` of ``(s2 - s1)/(s1 - s)`` because very short segments
    carry very large slopes. A target sitting on a node keeps only the finite
    logarithm of the two adjacent segments; the divergent ones cancel.
    """
    s1, s2 = s_nodes[:-1], s_nodes[1:]
    f1 = f_nodes[:-1]
    h = s2 - s1
    slope = (f_nodes[1:] - f1) / h
    const = float(np.sum(f_nodes[1:] - f1))
    targets = np.atleast_1d(np.asarray(s_targets, dtype=float))
    out = np.empty(targets.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        for lo in range(0, targets.size, block):
            s = targets[lo : lo + block, None]
            d1 = s1 - s
            f_lin = f1 + slope * (s - s1)
            x = h / d1
            ratio = np.where(np.abs(x) < 0.5, np.log1p(x), np.log(np.abs(1.0 + x)))
            at_left, at_right = d1 == 0.0, s2 == s
            ratio = np.where(at_left, np.log(h), np.where(at_right, -np.log(h), ratio))
            out[lo : lo + block] = const + (f_lin * ratio).sum(axis=1)
    return out / math.pi


def re_selfmass_vacuum(params: QftParams, k0) -> np.ndarray:
    """On-shell subtracted vacuum part, zero at ``k0**2 = omega**2``."""
    k0 = np.asarray(k0, dtype=float)
    with np.errstate(divide="ignore"):
        return params.h**2 / (32.0 * math.pi**2) * np.log(np.abs(k0 * k0 - params.k**2) / params.m_phi**2)


def _sinh_segment(center: float, end: float, scale: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes clustered at ``center`` running to ``end`` with Simpson weights."""
    span = math.asinh(abs(end - center) / scale)
    u = np.linspace(0.0, span, n)
    x = center + math.copysign(1.0, end - center) * scale * np.sinh(u)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (u[1] - u[0]) / 3.0 * scale * np.cosh(u)
    return x, w


def _assemble(parts) -> tuple[np.ndarray, np.ndarray]:
    x = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    nodes, inverse = np.unique(x, return_inverse=True)
    weights = np.zeros_like(nodes)
    np.add.at(weights, inverse, w)
    return nodes, weights


def frequency_grid(params: QftParams, peak: float, width: float, n_points: int, cutoff: float):
    """Positive-frequency nodes and weights, dense at 0, the light cone and the peak."""
    k = params.k
    n_seg = max(n_points // 5, 5) | 1
    eps = 1e-10 * k
    mid = 0.5 * (k + peak)
    parts = [
        _sinh_segment(0.0, 0.5 * k, 0.5 * k, n_seg),
        _sinh_segment(k, 0.5 * k, eps, n_seg),
        _sinh_segment(k, mid, eps, n_seg),
        _sinh_segment(peak, mid, width, n_seg),
        _sinh_segment(peak, cutoff, width, n_seg),
    ]
    x, w = _assemble(parts)
    near = np.abs(x - k) < 1e-13 * max(k, 1.0)
    x = np.where(near, k + np.where(x >= k, 1.0, -1.0) * 1e-13 * max(k, 1.0), x)
    x[0] = max(x[0], 1e-9 * params.omega)
    return x, w


@dataclass(frozen=True)
class SelfMassSpectrum:
    """Retarded self-mass tabulated on a positive-frequency grid.

    The full (symmetric) grid is obtained by reflection: ``re_M`` is even and
    ``im_M`` odd in ``k0``.
    """

    params: QftParams
    k0: np.ndarray
    weights: np.ndarray
    re_M: np.ndarray
    im_M: np.ndarray
    cutoff: float
    peak: float
    width: float

    def symmetric(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(k0, re_M, im_M)`` on the grid reflected to negative frequencies."""
        return (
            np.r_[-self.k0[::-1], self.k0],
            np.r_[self.re_M[::-1], self.re_M],
            np.r_[-self.im_M[::-1], self.im_M],
        )

    def re_at(self, k0) -> np.ndarray:
        """Re M^r at arbitrary frequencies from this tabulation."""
        return _re_from_table(self.params, self.k0, self.im_M, k0)


@dataclass(frozen=True)
class UnstablePole:
    """Pole of the retarded propagator at ``k0 = i*growth_rate``.

    ``weight`` is the share of the spectral sum rule carried by the pole
    pair instead of the real axis.
    """

    growth_rate: float
    weight: float


def _imag_axis_selfmass(spectrum: SelfMassSpectrum, y: float) -> tuple[float, float]:
    """M^r(i*y) and dM/d(y^2) from the dispersion integral (no principal value needed)."""
    p = spectrum.params
    thermal = spectrum.im_M - im_selfmass_vacuum(p, spectrum.k0)
    s = np.r_[0.0, spectrum.k0**2]
    f = np.r_[0.0, thermal]
    s1, s2, f1 = s[:-1], s[1:], f[:-1]
    slope = (f[1:] - f1) / (s2 - s1)
    Y = max(y * y, 1e-30 * float(s2[-1]))
    h = s2 - s1
    f_lin = f1 + slope * (-Y - s1)
    logs = np.log1p(h / (s1 + Y))
    c = p.h**2 / (32.0 * math.pi**2)
    value = c * math.log((p.k**2 + Y) / p.m_phi**2) + float(np.sum((f[1:] - f1) + f_lin * logs)) / math.pi
    inv_diff = -h / ((s2 + Y) * (s1 + Y))
    deriv = c / (p.k**2 + Y) + float(np.sum(-slope * logs + f_lin * inv_diff)) / math.pi
    return value, deriv


def static_mass_squared(spectrum: SelfMassSpectrum) -> float:
    """Effective static mass ``omega**2 + M^r(k0 -> 0)``; negative means tachyonic."""
    return spectrum.params.omega**2 + _imag_axis_selfmass(spectrum, 0.0)[0]


def unstable_pole(spectrum: SelfMassSpectrum) -> UnstablePole | None:
    """Locate an exponentially growing mode, if the static mass is negative."""
    if spectrum.params.h == 0.0 or static_mass_squared(spectrum) >= 0.0:
        return None
    w2 = spectrum.params.omega**2

    def inverse(y: float) -> float:
        return -y * y - w2 - _imag_axis_selfmass(spectrum, y)[0]

    hi = spectrum.params.omega
    while inverse(hi) > 0.0:
        hi *= 2.0
        if hi > spectrum.cutoff:
            raise NumericalError("could not bracket the unstable pole")
    y0 = brentq(inverse, 1e-12 * hi, hi, xtol=1e-14)
    slope = -2.0 * y0 * (1.0 + _imag_axis_selfmass(spectrum, y0)[1])
    return UnstablePole(growth_rate=y0, weight=-2.0 * y0 / slope)


def _re_from_table(params: QftParams, nodes: np.ndarray, im: np.ndarray, k0) -> np.ndarray:
    k0 = np.asarray(k0, dtype=float)
    thermal = im - im_selfmass_vacuum(params, nodes)
    s_nodes = np.r_[0.0, nodes**2]
    f_nodes = np.r_[0.0, thermal]
    re = re_selfmass_vacuum(params, k0) + kramers_kronig_linear(s_nodes, f_nodes, (k0**2).ravel()).reshape(k0.shape)
    return re


def _find_peak(params: QftParams, cutoff: float, n_points: int) -> tuple[float, float]:
    """Quasiparticle position (root of the real part of the inverse propagator) and half width."""
    w = params.omega
    guess_width = max(abs(float(im_selfmass_closed(params, w))) / (2.0 * w), 1e-3 * w)
    nodes, _ = frequency_grid(params, w, guess_width, n_points, cutoff)
    im = im_selfmass_closed(params, nodes)

    def dispersion(z):
        z = np.asarray(z, dtype=float)
        return z * z - w * w - _re_from_table(params, nodes, im, z)

    scan = np.unique(np.r_[np.linspace(params.k, min(4.0 * w, cutoff), 801)[1:], w])
    vals = dispersion(scan)
    ups = np.nonzero((vals[:-1] < 0) & (vals[1:] > 0))[0]
    if ups.size:
        j = ups[np.argmin(np.abs(scan[ups] - w))]
        peak = brentq(lambda z: float(dispersion(z)), scan[j], scan[j + 1], xtol=1e-14 * w)
    else:
        rho = -2.0 * im / (dispersion(nodes) ** 2 + im**2)
        sel = nodes > params.k
        peak = float(nodes[sel][np.argmax(rho[sel])])
    width = abs(float(im_selfmass_closed(params, peak))) / (2.0 * peak)
    return peak, max(width, 1e-12 * w)


def tabulate_selfmass(params: QftParams, n_points: int = 4096, cutoff_factor: float = 40.0) -> SelfMassSpectrum:
    """Tabulate Re/Im M^r on a grid adapted to the quasiparticle peak.

    Raises:
        DomainError: for ``k = 0`` (infrared-divergent statistical propagator).
        UnderResolvedPeak: if fewer than 8 nodes fall inside the peak width.
    """
    if params.k <= 0:
        raise DomainError("the stationary spectrum requires k > 0")
    if n_points < 64:
        raise DomainError("n_points must be at least 64")
    w = params.omega
    cutoff = cutoff_factor * max(w, 1.0 / params.beta)
    if params.h == 0.0:
        nodes, weights = frequency_grid(params, w, 1e-3 * w, n_points, cutoff)
        zeros = np.zeros_like(nodes)
        return SelfMassSpectrum(params, nodes, weights, zeros, zeros.copy(), cutoff, w, 0.0)
    peak, width = _find_peak(params, cutoff, max(n_points // 20, 64))
    nodes, weights = frequency_grid(params, peak, width, n_points, cutoff)
    inside = np.count_nonzero(np.abs(nodes - peak) <= width)
    if inside < 8:
        raise UnderResolvedPeak(f"only {inside} grid points inside the peak width {width:.3g}")
    im = im_selfmass_closed(params, nodes)
    if not np.all(np.isfinite(im)):
        raise NumericalError("non-finite Im M^r on the frequency grid")
    re = _re_from_table(params, nodes, im, nodes)
    return SelfMassSpectrum(params, nodes, weights, re, im, cutoff, peak, width)


def re_retarded_selfmass(params: QftParams, k0, spectrum: SelfMassSpectrum | None = None) -> np.ndarray | float:
    """Renormalised Re M^r(k0, k) via the dispersion relation.

    Args:
        spectrum: tabulation to integrate over; built with defaults if omitted.
    """
    if params.h == 0.0:
        return np.zeros_like(np.asarray(k0, dtype=float)) if np.ndim(k0) else 0.0
    spec = spectrum if spectrum is not None else tabulate_selfmass(params)
    re = spec.re_at(k0)
    if not np.all(np.isfinite(re)):
        raise NumericalError("principal-value integral produced non-finite values")
    return float(re) if np.ndim(k0) == 0 else re


@dataclass(frozen=True)
class StationarySolution:
    """Thermal equilibrium of the interacting mode."""

    params: QftParams
    k0: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    F: np.ndarray = field(default_factory=lambda: np.zeros(0))
    triple: CorrelatorTriple | None = None
    delta_ms: float = float("nan")
    s_ms: float = float("nan")
    sum_rule: float = float("nan")
    free: bool = False


def spectral_function(params: QftParams, spectrum: SelfMassSpectrum) -> StationarySolution:
    """Spectral function on the positive-frequency grid plus its sum rule.

    For ``h = 0`` the spectral function is a delta peak; the returned arrays
    are zero and ``free`` is set, with the sum rule exactly 1.
    """
    if params.h == 0.0:
        return StationarySolution(params, spectrum.k0, spectrum.weights, np.zeros_like(spectrum.k0), sum_rule=1.0, free=True)
    x = spectrum.k0
    D = x * x - params.omega**2 - spectrum.re_M
    rho = -2.0 * spectrum.im_M / (D * D + spectrum.im_M**2)
    c = params.vacuum_tail
    lam = spectrum.cutoff
    sum_rule = 2.0 * np.sum(spectrum.weights * x * rho) / (2.0 * math.pi) + c / (2.0 * lam**2) / math.pi
    return StationarySolution(params, x, spectrum.weights, rho, sum_rule=float(sum_rule))


def stationary_statistical(params: QftParams, solution: StationarySolution, tail_tol: float = 1e-3) -> StationarySolution:
    """Statistical propagator from the KMS condition and the equal-time moments.

    Raises:
        NumericalError: if the analytic tail beyond the cutoff is not small
            against the momentum variance (integrand not decaying on the grid).
    """
    if solution.free:
        area = free_thermal_area(params.beta, params.omega)
        triple = CorrelatorTriple.thermal(params.beta, params.omega)
        return StationarySolution(
            params, solution.k0, solution.weights, solution.rho, np.zeros_like(solution.rho),
            triple, area, float(entropy_from_area(area)), 1.0, True,
        )
    x, w, rho = solution.k0, solution.weights, solution.rho
    F = 0.5 / np.tanh(0.5 * params.beta * x) * rho
    lam = float(x[-1]) if x.size else 0.0
    c = params.vacuum_tail
    tail_phi2 = c / (3.0 * lam**3) / (2.0 * math.pi)
    tail_pi2 = c / lam / (2.0 * math.pi)
    phi2 = 2.0 * np.sum(w * F) / (2.0 * math.pi) + tail_phi2
    pi2 = 2.0 * np.sum(w * x * x * F) / (2.0 * math.pi) + tail_pi2
    if tail_pi2 > tail_tol * pi2:
        raise NumericalError(f"momentum variance tail {tail_pi2:.3g} not small against {pi2:.3g}")
    triple = CorrelatorTriple(float(phi2), float(pi2), 0.0)
    area = phase_space_area(triple)
    return StationarySolution(
        params, x, w, rho, F, triple, area, float(entropy_from_area(area)), solution.sum_rule, False,
    )


def solve_stationary(
    params: QftParams, n_points: int = 4096, cutoff_factor: float = 40.0, check_stability: bool = True
) -> StationarySolution:
    """Tabulate, build the spectral function and integrate the equal-time moments.

    Raises:
        ThermalInstability: if the mode is tachyonic (unless ``check_stability``
            is False, in which case the real-axis result is returned as is).

    If the momentum-variance tail is too heavy the cutoff is enlarged four-fold
    once before giving up.
    """
    for factor in (cutoff_factor, 4.0 * cutoff_factor):
        spectrum = tabulate_selfmass(params, n_points, factor)
        if check_stability:
            pole = unstable_pole(spectrum)
            if pole is not None:
                raise ThermalInstability(
                    f"static mass squared {static_mass_squared(spectrum):.4g} < 0: growing mode at rate "
                    f"{pole.growth_rate:.4g} carries {pole.weight:.4g} of the spectral sum rule"
                )
        try:
            return stationary_statistical(params, spectral_function(params, spectrum))
        except NumericalError:
            if factor != cutoff_factor:
                raise
    raise AssertionError("unreachable")
