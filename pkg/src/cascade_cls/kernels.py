"""Pairwise dipole-dipole decay (F) and shift (G) kernels.

Both kernels are dimensionless: the collective decay between atoms alpha and
beta is ``Gamma_3 * F / 2`` and the exchange shift is ``Gamma_3 * G``.  The
argument ``xi = k_3 * r`` is the scaled separation and ``cos_theta`` is the
projection of the dipole on the pair axis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import KernelDomainError

# Below this xi the closed form of F loses all digits to cancellation.
SMALL_XI = 0.05


class Averaging(str, enum.Enum):
    """How the dipole orientation enters the pair kernels.

    ``FIXED_ORIENTATION``
        A linear dipole; ``cos_theta`` is ``d . r_hat``.
    ``POLARIZATION_AVERAGED``
        Uniform average over all dipole directions (``F = sin(xi)/xi``).
    ``CIRCULAR``
        A circular dipole rotating about the cylinder axis, equivalently the
        average over linear dipoles transverse to that axis.  ``cos_theta`` is
        ``z_hat . r_hat`` and the effective overlap is ``(1 - cos^2)/2``.
        This is the radiation pattern behind the ``(1 + x^2)`` weight of the
        cylinder geometric constant.
    """

    FIXED_ORIENTATION = "fixed_orientation"
    POLARIZATION_AVERAGED = "polarization_averaged"
    CIRCULAR = "circular"


@dataclass(frozen=True)
class KernelArgs:
    xi: float
    cos_theta: float = 0.0
    averaging: Averaging = Averaging.FIXED_ORIENTATION

    def __post_init__(self):
        if abs(self.cos_theta) > 1.0:
            raise ValueError(f"|cos_theta| must be <= 1, got {self.cos_theta}")


def _check_xi(xi):
    if np.any(~(xi > 0)):
        raise KernelDomainError("pair kernels need xi > 0; coincident atoms must be excluded")


def _overlap_sq(cos_theta, averaging):
    c2 = np.square(cos_theta)
    if averaging is Averaging.CIRCULAR:
        return 0.5 * (1.0 - c2)
    return c2


def _sinc_terms(xi):
    """Return sin/xi, and the two radial combinations of F and G."""
    s, c = np.sin(xi), np.cos(xi)
    return s / xi, c / xi**2 - s / xi**3, s / xi**2 + c / xi**3


def decay_kernel(xi, cos_theta=0.0, averaging=Averaging.FIXED_ORIENTATION):
    """Vectorized F(xi, cos_theta).  See :func:`kernel_F`."""
    averaging = Averaging(averaging)
    xi = np.asarray(xi, dtype=float)
    _check_xi(xi)
    xi_safe = np.where(xi < SMALL_XI, 1.0, xi)
    sinc, radial, _ = _sinc_terms(xi_safe)
    if averaging is Averaging.POLARIZATION_AVERAGED:
        far = sinc
        x2 = xi * xi
        near = 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2**3 / 5040.0
        return np.where(xi < SMALL_XI, near, far)
    p = _overlap_sq(np.asarray(cos_theta, dtype=float), averaging)
    far = 1.5 * ((1.0 - p) * sinc + (1.0 - 3.0 * p) * radial)
    x2 = xi * xi
    near = (1.0 - (2.0 - p) * x2 / 10.0 + (3.0 - 2.0 * p) * x2 * x2 / 280.0
            - (4.0 - 3.0 * p) * x2**3 / 15120.0)
    return np.where(xi < SMALL_XI, near, far)


def shift_kernel(xi, cos_theta=0.0, averaging=Averaging.FIXED_ORIENTATION):
    """Vectorized G(xi, cos_theta).  See :func:`kernel_G`."""
    averaging = Averaging(averaging)
    xi = np.asarray(xi, dtype=float)
    _check_xi(xi)
    if averaging is Averaging.POLARIZATION_AVERAGED:
        return -0.5 * np.cos(xi) / xi
    p = _overlap_sq(np.asarray(cos_theta, dtype=float), averaging)
    _, _, radial = _sinc_terms(xi)
    return 0.75 * (-(1.0 - p) * np.cos(xi) / xi + (1.0 - 3.0 * p) * radial)


def kernel_F(args: KernelArgs) -> float:
    """Collective decay kernel ``F`` for one pair.

    ``(3/2){[1 - c^2] sin(xi)/xi + [1 - 3c^2](cos(xi)/xi^2 - sin(xi)/xi^3)}``
    with a four-term Taylor series below ``xi = 0.05``.

    Raises
    ------
    KernelDomainError
        If ``args.xi <= 0``; use :func:`kernel_F_limit_zero` for the limit.
    """
    return float(decay_kernel(args.xi, args.cos_theta, args.averaging))


def kernel_G(args: KernelArgs) -> float:
    """Dipole-dipole exchange kernel ``G`` for one pair.

    ``(3/4){-[1 - c^2] cos(xi)/xi + [1 - 3c^2](sin(xi)/xi^2 + cos(xi)/xi^3)}``.
    Diverges as ``1/xi^3``; there is deliberately no small-xi rescue.
    """
    return float(shift_kernel(args.xi, args.cos_theta, args.averaging))


def kernel_F_limit_zero() -> float:
    return 1.0
