# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled two-time row update; same contract as ``_kb_python.evolve_rows``."""

import numpy as np

from libc.math cimport cos, sin, fabs


def evolve_rows(
    double[:, ::1] F,
    const double[::1] weights,
    const double[::1] noise_full,
    const double[:, ::1] noise_partial,
    const double[::1] edge,
    const double[::1] pre_re,
    const double[::1] pre_im,
    double omega,
    double dt,
    Py_ssize_t n_mem,
    bint sharp,
    double bound,
):
    cdef Py_ssize_t n = F.shape[0]
    cdef double[::1] acc = np.zeros(n, dtype=np.float64)
    cdef double w2 = omega * omega
    cdef double dt2 = dt * dt
    cdef Py_ssize_t i, j, l, span, lag
    cdef double wl, phase, noise, mem_d, value, pr, pim
    cdef bint prehist, partial
    cdef int status = <int>n
    with nogil:
        for i in range(1, n - 1):
            span = i if i < n_mem else n_mem
            prehist = (not sharp) and (i + 1 <= n_mem)
            partial = sharp and (i < n_mem)
            for j in range(i + 1):
                acc[j] = 0.0
            mem_d = 0.0
            for l in range(span + 1):
                if sharp and l == i and i <= n_mem:
                    wl = edge[i]
                else:
                    wl = weights[l]
                for j in range(i + 1):
                    acc[j] += wl * F[i - l, j]
            if prehist:
                pr = pre_re[i + 1]
                pim = pre_im[i + 1]
            for j in range(i + 1):
                lag = i - j
                if prehist:
                    phase = omega * lag * dt
                    acc[j] += (cos(phase) * pr - sin(phase) * pim) / (2.0 * omega)
                if partial:
                    noise = noise_partial[i, lag + 1]
                elif lag <= n_mem:
                    noise = noise_full[lag + 1]
                else:
                    noise = 0.0
                value = 2.0 * F[i, j] - F[i - 1, j] + dt2 * (-w2 * F[i, j] - acc[j] + noise)
                F[i + 1, j] = value
                F[j, i + 1] = value
            for l in range(span + 1):
                if sharp and l == i and i <= n_mem:
                    wl = edge[i]
                else:
                    wl = weights[l]
                mem_d += wl * F[i + 1, i - l]
            if prehist:
                mem_d += (cos(omega * dt) * pr + sin(omega * dt) * pim) / (2.0 * omega)
            if partial:
                noise = noise_partial[i, 0]
            else:
                noise = noise_full[0]
            F[i + 1, i + 1] = 2.0 * F[i + 1, i] - F[i + 1, i - 1] + dt2 * (-w2 * F[i + 1, i] - mem_d + noise)
            for j in range(i + 2):
                if not fabs(F[i + 1, j]) <= bound:
                    status = -<int>(i + 1)
                    break
            if status < 0:
                break
    return status
