"""Exponential-approach fits of the phase-space area to its stationary value."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import argrelextrema

from .errors import DomainError, FitFailed


@dataclass(frozen=True)
class RateFit:
    """Result of fitting ``|delta_ms - Delta(t)| ~ A exp(-gamma t)``.

    ``residual`` is the RMS deviation of ``ln|delta_ms - Delta|`` from the
    fitted line; ``method`` is ``"direct"`` or ``"envelope"``.
    """

    gamma_dec: float
    delta_ms_used: float
    fit_window: tuple[float, float]
    residual: float
    amplitude: float
    method: str
    n_points: int


def _future_envelope(x: np.ndarray) -> np.ndarray:
    """``max_{s >= t} |x(s)|`` for every ``t``."""
    return np.maximum.accumulate(np.abs(x)[::-1])[::-1]


def extract_rate(
    t,
    delta,
    delta_ms: float | str = "auto",
    t_lo: float = 5.0,
    t_hi: float | None = None,
    floor_rel: float = 1e-3,
    min_efolds: float = 2.0,
    residual_tol: float = 0.5,
    tail_fraction: float = 0.4,
) -> RateFit:
    """Fit the decoherence rate from a phase-space-area time series.

    Args:
        t, delta: the series ``Delta(t)``.
        delta_ms: asymptotic area; ``"auto"`` uses the mean over the last
            ``tail_fraction`` of the series.
        t_lo: start of the fit window (initial transient dropped before it).
        t_hi: end of the window; by default where the envelope of the
            deviation has dropped by ``floor_rel`` or reached the noise floor
            of the tail.

    Raises:
        FitFailed: fewer than ``min_efolds`` e-folds in the window, a
            non-decaying or non-monotone envelope, or a residual above
            ``residual_tol``.
    """
    t = np.asarray(t, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if t.shape != delta.shape or t.ndim != 1 or t.size < 4:
        raise DomainError("t and delta must be 1-d arrays of equal length (at least 4 points)")
    if not np.all(np.diff(t) > 0):
        raise DomainError("t must be strictly increasing")
    if delta_ms == "auto":
        n_tail = max(int(np.ceil(tail_fraction * t.size)), 1)
        ms = float(np.mean(delta[-n_tail:]))
    else:
        ms = float(delta_ms)
    dev = ms - delta
    env = _future_envelope(dev)
    start = int(np.searchsorted(t, t_lo))
    if start >= t.size - 3:
        raise FitFailed(f"series ends before the fit window starts at t={t_lo:g}")
    if env[start] <= 0:
        raise FitFailed("no deviation from the asymptote after t_lo (constant series)")
    if t_hi is None:
        tail = dev[-max(int(np.ceil(0.25 * t.size)), 2) :]
        floor = max(floor_rel * env[start], 3.0 * float(np.std(tail)), 1e-300)
        below = np.nonzero(env[start:] < floor)[0]
        stop = start + int(below[0]) if below.size else t.size - 1
    else:
        stop = int(np.searchsorted(t, t_hi, side="right")) - 1
    stop = min(stop, t.size - 1)
    if stop - start < 3:
        raise FitFailed("fit window holds fewer than four samples")
    if env[start] <= 0 or env[stop] <= 0:
        raise FitFailed("deviation from the asymptote vanishes inside the window")
    efolds = float(np.log(env[start] / env[stop]))
    if efolds < min_efolds:
        raise FitFailed(f"deviation spans only {efolds:.3g} e-folds in the window (need {min_efolds:g})")

    tw, dw = t[start : stop + 1], dev[start : stop + 1]
    if np.all(dw > 0) or np.all(dw < 0):
        method, ft, fy = "direct", tw, np.log(np.abs(dw))
    else:
        method = "envelope"
        peaks = argrelextrema(np.abs(dw), np.greater_equal, order=1)[0]
        peaks = peaks[(peaks > 0) & (peaks < dw.size - 1) & (np.abs(dw[peaks]) > 0)]
        if peaks.size < 3:
            raise FitFailed("too few envelope peaks in the fit window")
        amp = np.abs(dw[peaks])
        if np.any(np.diff(amp) >= 0) and np.count_nonzero(np.diff(amp) >= 0) > peaks.size // 4:
            raise FitFailed("envelope of the deviation is not monotone")
        ft, fy = tw[peaks], np.log(amp)
    slope, intercept = np.polyfit(ft, fy, 1)
    resid = float(np.sqrt(np.mean((fy - (slope * ft + intercept)) ** 2)))
    if not slope < 0:
        raise FitFailed(f"deviation does not decay (slope {slope:.3g})")
    if resid > residual_tol:
        raise FitFailed(f"fit residual {resid:.3g} above threshold {residual_tol:g}")
    return RateFit(
        gamma_dec=float(-slope),
        delta_ms_used=ms,
        fit_window=(float(tw[0]), float(tw[-1])),
        residual=resid,
        amplitude=float(np.exp(intercept)),
        method=method,
        n_points=int(ft.size),
    )
