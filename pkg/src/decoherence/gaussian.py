"""Phase-space area and von Neumann entropy of Gaussian states.

All quantities use natural units (hbar = k_B = 1) and entropies are in nats.
A single bosonic mode is characterised by its three equal-time second moments;
multi-mode states by their covariance matrix in the ordering
``(x_1, ..., x_n, p_1, ..., p_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError, HeisenbergViolation, NumericalError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class CorrelatorTriple:
    """Equal-time second moments of one mode.

    Attributes:
        phi2: ``<phi^2>``, field variance.
        pi2: ``<pi^2>``, conjugate-momentum variance.
        cross: symmetrised ``<{phi, pi}>/2``.
    """

    phi2: float
    pi2: float
    cross: float = 0.0

    def __post_init__(self) -> None:
        for name in ("phi2", "pi2", "cross"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.phi2 < 0 or self.pi2 < 0:
            raise DomainError(f"variances must be non-negative, got phi2={self.phi2}, pi2={self.pi2}")

    @classmethod
    def ground_state(cls, omega: float) -> "CorrelatorTriple":
        """Pure vacuum of a free oscillator with frequency ``omega``."""
        return cls(1.0 / (2.0 * omega), omega / 2.0, 0.0)

    @classmethod
    def thermal(cls, beta: float, omega: float) -> "CorrelatorTriple":
        """Free thermal mode at inverse temperature ``beta``."""
        occ = free_thermal_area(beta, omega)
        return cls(occ / (2.0 * omega), occ * omega / 2.0, 0.0)


def area_from_moments(phi2: ArrayLike, pi2: ArrayLike, cross: ArrayLike, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorised phase-space area ``2*sqrt(phi2*pi2 - cross**2)``.

    A squared area in ``[1 - tol, 1)`` is clamped to exactly 1 so that
    round-off in upstream integrators cannot produce NaN entropies.

    Raises:
        HeisenbergViolation: if any squared area is below ``1 - tol``.
    """
    phi2, pi2, cross = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (phi2, pi2, cross)))
    radicand = 4.0 * (phi2 * pi2 - cross * cross)
    if not np.all(np.isfinite(radicand)):
        raise NumericalError("non-finite second moments")
    bad = radicand < 1.0 - tol
    if np.any(bad):
        worst = float(radicand.min())
        raise HeisenbergViolation(f"squared phase-space area {worst:.12g} below 1 - tol (tol={tol:g})")
    return np.sqrt(np.where(radicand < 1.0, 1.0, radicand))


def phase_space_area(c: CorrelatorTriple, tol: float = DEFAULT_TOL) -> float:
    """Phase-space area of a single-mode Gaussian state (1 for a pure state)."""
    return float(area_from_moments(c.phi2, c.pi2, c.cross, tol))


def entropy_from_area(delta: ArrayLike) -> np.ndarray | float:
    """Gaussian von Neumann entropy as a function of the phase-space area.

    ``S = a ln a - b ln b`` with ``a = (delta+1)/2`` and ``b = (delta-1)/2``;
    ``b ln b`` is taken as 0 at ``delta = 1``. Evaluated as
    ``ln a + b ln(1 + 1/b)``, which avoids cancellation for large areas.
    Accepts scalars or arrays.

    Raises:
        DomainError: if any area is below 1 or not finite.
    """
    d = np.asarray(delta, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d < 1.0):
        raise DomainError(f"phase-space area must be finite and >= 1, got {d.min() if d.size else d}")
    a = 0.5 * (d + 1.0)
    b = 0.5 * (d - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.log(a) + np.where(b > 0, b * np.log1p(1.0 / b), 0.0)
    return float(s) if s.ndim == 0 else s


def free_thermal_area(beta: float, omega: float) -> float:
    """Area ``coth(beta*omega/2)`` of a free thermal mode."""
    if not (np.isfinite(beta) and np.isfinite(omega)) or beta <= 0 or omega <= 0:
        raise DomainError(f"beta and omega must be positive and finite, got beta={beta}, omega={omega}")
    return float(1.0 / np.tanh(0.5 * beta * omega))


def triple_from_statistical(F_equal: float, dF_equal: float, ddF_equal: float) -> CorrelatorTriple:
    """Map the statistical propagator at equal times onto the moment triple.

    Args:
        F_equal: ``F(t, t)``.
        dF_equal: ``d/dt' F(t, t')`` at ``t' = t``.
        ddF_equal: ``d/dt d/dt' F(t, t')`` at ``t' = t``.
    """
    return CorrelatorTriple(phi2=F_equal, pi2=ddF_equal, cross=dF_equal)


def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a covariance matrix ordered ``(x..., p...)``.

    Returns the ``n`` non-negative values ``nu_j`` (ascending) such that the
    Williamson normal form of ``sigma`` is ``diag(nu, nu)``. A pure mode has
    ``nu = 1/2``. Stacks of matrices (shape ``(..., 2n, 2n)``) are accepted.
    """
    sigma = np.asarray(sigma, dtype=float)
    dim = sigma.shape[-1]
    if sigma.ndim < 2 or dim != sigma.shape[-2] or dim % 2:
        raise DomainError(f"covariance must be square with even size, got shape {sigma.shape}")
    n = dim // 2
    if n == 0:
        return np.zeros(sigma.shape[:-2] + (0,))
    sym = 0.5 * (sigma + np.swapaxes(sigma, -1, -2))
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError as exc:
        raise HeisenbergViolation("covariance matrix is not positive definite") from exc
    # L^T J L is antisymmetric with eigenvalues +-i nu; its Gram matrix has
    # every nu^2 exactly twice, so a real symmetric solver suffices.
    cholT = np.swapaxes(chol, -1, -2)
    anti = np.concatenate([-cholT[..., n:], cholT[..., :n]], axis=-1) @ chol
    try:
        ev = np.linalg.eigvalsh(np.swapaxes(anti, -1, -2) @ anti)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("symplectic eigen-decomposition failed") from exc
    return np.sqrt(np.maximum(0.5 * (ev[..., 0::2] + ev[..., 1::2]), 0.0))


def entropy_from_symplectic(nus: ArrayLike, tol: float = DEFAULT_TOL) -> float:
    """Total entropy of a multi-mode state from its symplectic eigenvalues.

    Raises:
        HeisenbergViolation: if some ``2*nu`` falls below ``1 - tol``.
    """
    areas = 2.0 * np.asarray(nus, dtype=float)
    if areas.size == 0:
        return 0.0
    if np.any(areas < 1.0 - tol):
        raise HeisenbergViolation(f"symplectic eigenvalue area {areas.min():.12g} below 1 - tol")
    return float(np.sum(entropy_from_area(np.maximum(areas, 1.0))))
