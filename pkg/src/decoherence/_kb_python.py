"""Pure numpy implementation of the two-time row update (fallback backend)."""

from __future__ import annotations

import numpy as np


def evolve_rows(
    F: np.ndarray,
    weights: np.ndarray,
    noise_full: np.ndarray,
    noise_partial: np.ndarray,
    edge: np.ndarray,
    pre_re: np.ndarray,
    pre_im: np.ndarray,
    omega: float,
    dt: float,
    n_mem: int,
    sharp: bool,
    bound: float,
) -> int:
    """Fill rows ``2..n-1`` of the symmetric matrix ``F`` in place.

    Rows 0 and 1 must already hold the start values. Returns the number of
    completed rows, or ``-i`` if ``|F|`` exceeded ``bound`` while filling row ``i``.
    """
    n = F.shape[0]
    w2 = omega * omega
    dt2 = dt * dt
    for i in range(1, n - 1):
        span = min(i, n_mem)
        lags = weights[: span + 1].copy()
        if sharp and i <= n_mem:
            lags[i] = edge[i]
        lags_rev = lags[::-1]  # aligned with rows i-span, ..., i
        cols = np.arange(i + 1)
        mem = lags_rev @ F[i - span : i + 1, : i + 1]
        if not sharp and i + 1 <= n_mem:
            phase = omega * (i - cols) * dt
            mem += (np.cos(phase) * pre_re[i + 1] - np.sin(phase) * pre_im[i + 1]) / (2.0 * omega)
        lag = i - cols
        if sharp and i < n_mem:
            noise = noise_partial[i, lag + 1]
            noise_diag = noise_partial[i, 0]
        else:
            noise = np.where(lag <= n_mem, noise_full[np.minimum(lag, n_mem) + 1], 0.0)
            noise_diag = noise_full[0]
        new = 2.0 * F[i, : i + 1] - F[i - 1, : i + 1] + dt2 * (-w2 * F[i, : i + 1] - mem + noise)
        F[i + 1, : i + 1] = new
        F[: i + 1, i + 1] = new
        # diagonal: step in the second argument, using the row just written
        mem_d = lags_rev @ F[i - span : i + 1, i + 1]
        if not sharp and i + 1 <= n_mem:
            mem_d += (np.cos(-omega * dt) * pre_re[i + 1] - np.sin(-omega * dt) * pre_im[i + 1]) / (2.0 * omega)
        diag_force = -mem_d + noise_diag
        F[i + 1, i + 1] = 2.0 * F[i + 1, i] - F[i + 1, i - 1] + dt2 * (-w2 * F[i + 1, i] + diag_force)
        if not np.all(np.abs(F[i + 1, : i + 2]) <= bound):
            return -(i + 1)
    return n
