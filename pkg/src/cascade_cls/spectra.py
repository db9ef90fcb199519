"""Coupling matrices in the bare and phased-symmetric bases.

Matrices are stored in units of ``Gamma_3 / 2``: the bare matrix has ``-1`` on
the diagonal and ``-(F + 2iG)`` off it.  Physical rates and shifts are only
formed in :func:`symmetric_mode_decay_and_shift`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import EigenSolverError
from .geometry import AtomCloud, pair_geometry
from .kernels import Averaging, decay_kernel, shift_kernel

UNITS = "gamma3/2"
DEFAULT_MAX_ATOMS = 5000


class Basis(str, enum.Enum):
    BARE = "bare"
    PHASED = "phased"


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CouplingMatrix:
    """Dense single-excitation coupling matrix, in units of ``Gamma_3/2``."""

    entries: np.ndarray
    basis: Basis = Basis.BARE
    kbar: Optional[np.ndarray] = None
    units: str = UNITS

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("coupling matrix must be square")
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.kbar is not None:
            object.__setattr__(self, "kbar", _frozen(np.asarray(self.kbar, dtype=float)))

    @property
    def N(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class PhasedBasis:
    S: np.ndarray
    f: np.ndarray
    kbar: np.ndarray

    def __post_init__(self):
        for name in ("S", "f", "kbar"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    U: np.ndarray
    U_inv: np.ndarray
    superradiant_index: int
    basis: Basis = Basis.BARE
    units: str = UNITS
    condition: float = field(default=1.0, compare=False)

    def __post_init__(self):
        for name in ("eigenvalues", "U", "U_inv"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def lambda_N(self) -> complex:
        return complex(self.eigenvalues[self.superradiant_index])


def _check_size(n, max_atoms):
    if n > max_atoms:
        gib = 16 * n * n / 2**30
        raise MemoryError(
            f"N={n} exceeds the dense-matrix cap of {max_atoms} (~{gib:.1f} GiB per matrix)")


def pair_kernels(cloud: AtomCloud, k3, orientation=(1.0, 0.0, 0.0),
                 averaging=Averaging.CIRCULAR):
    """Full ``F`` and ``G`` matrices with zero diagonal."""
    averaging = Averaging(averaging)
    pos = cloud.positions
    n = pos.shape[0]
    F = np.zeros((n, n))
    G = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    if iu.size:
        xi, cos = pair_geometry(pos[iu] - pos[ju], k3, orientation, averaging)
        f = decay_kernel(xi, cos, averaging)
        g = shift_kernel(xi, cos, averaging)
        F[iu, ju] = f
        F[ju, iu] = f
        G[iu, ju] = g
        G[ju, iu] = g
    return F, G


def build_bare_matrix(cloud: AtomCloud, k3, orientation=(1.0, 0.0, 0.0),
                      averaging=Averaging.CIRCULAR,
                      max_atoms=DEFAULT_MAX_ATOMS) -> CouplingMatrix:
    """Bare-basis matrix ``M / (Gamma_3/2) = -[I + (F + 2iG)]``.

    ``orientation`` is only used with ``Averaging.FIXED_ORIENTATION``.  Both
    triangles are filled from the same kernel values, so the result is
    exactly symmetric.
    """
    _check_size(cloud.N, max_atoms)
    F, G = pair_kernels(cloud, k3, orientation, averaging)
    M = -(np.eye(cloud.N) + F + 2j * G)
    return CouplingMatrix(M, Basis.BARE)


def f_coefficients(n: int) -> np.ndarray:
    """Real orthogonal ``f`` whose last row is the uniform vector."""
    if n < 1:
        raise ValueError("n must be >= 1")
    f = np.empty((n, n))
    f[-1] = 1.0 / math.sqrt(n)
    if n == 1:
        return f
    c = (1.0 + 1.0 / math.sqrt(n)) / (n - 1)
    f[:-1, :-1] = c - np.eye(n - 1)
    f[:-1, -1] = -1.0 / math.sqrt(n)
    return f


def build_phased_basis(cloud: AtomCloud, kbar) -> PhasedBasis:
    """``S_{l mu} = exp(i kbar . r_mu) f_{l mu}``."""
    if cloud.N < 2:
        raise ValueError("phased basis needs N >= 2")
    kbar = np.asarray(kbar, dtype=float)
    f = f_coefficients(cloud.N)
    S = f * np.exp(1j * (cloud.positions @ kbar))[None, :]
    return PhasedBasis(S=S, f=f, kbar=kbar)


def transform_matrix(M: CouplingMatrix, basis: PhasedBasis) -> CouplingMatrix:
    """Rotate a bare matrix: ``Abar_{l l'} = sum S*_{l mu} M_{mu nu} S_{l' nu}``."""
    if M.basis is not Basis.BARE:
        raise ValueError("transform_matrix expects a bare-basis matrix")
    if M.N != basis.S.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {M.N}, basis {basis.S.shape[0]}")
    S = basis.S
    Abar = S.conj() @ M.entries @ S.T
    return CouplingMatrix(Abar, Basis.PHASED, kbar=basis.kbar)


def symmetric_vector(cloud: AtomCloud, kbar) -> np.ndarray:
    """Phased symmetric state ``exp(i kbar . r_mu)/sqrt(N)`` in the bare basis."""
    kbar = np.asarray(kbar, dtype=float)
    return np.exp(1j * (cloud.positions @ kbar)) / math.sqrt(cloud.N)


def eigendecompose(M: CouplingMatrix, target=None) -> SpectralDecomposition:
    """Complex-general eigendecomposition with superradiant-mode selection.

    The superradiant mode is the eigenvector with the largest squared overlap
    with ``target``.  For a phased matrix the default target is the last basis
    vector; for a bare matrix a target (usually :func:`symmetric_vector`) must
    be given, otherwise the most strongly decaying mode is chosen.

    Raises
    ------
    EigenSolverError
        If LAPACK fails or the eigenvector matrix is numerically singular.
    """
    A = np.asarray(M.entries)
    if not np.all(np.isfinite(A)):
        raise EigenSolverError("matrix has non-finite entries")
    try:
        w, U = linalg.eig(A, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc
    cond = float(np.linalg.cond(U))
    if not np.isfinite(cond) or cond > 1e13:
        raise EigenSolverError(f"eigenvector matrix ill-conditioned (cond={cond:.3g})", cond)
    U_inv = linalg.inv(U)

    if target is None and M.basis is Basis.PHASED:
        target = np.zeros(M.N)
        target[-1] = 1.0
    if target is None:
        idx = int(np.argmin(w.real))
    else:
        t = np.asarray(target, dtype=complex)
        t = t / np.linalg.norm(t)
        norms = np.linalg.norm(U, axis=0)
        idx = int(np.argmax(np.abs(t.conj() @ U) ** 2 / norms**2))
    return SpectralDecomposition(w, U, U_inv, idx, M.basis, M.units, cond)


def decoupled_lambda_N(Abar: CouplingMatrix) -> complex:
    """``lambda_N`` with the cross couplings ``Abar_{lN}``, ``Abar_{Nl}`` dropped.

    Once row and column ``N`` are zeroed off the diagonal, ``Abar_NN`` is an
    eigenvalue with eigenvector ``e_N``; no decomposition is needed.
    """
    if Abar.basis is not Basis.PHASED:
        raise ValueError("decoupling needs a phased-basis matrix")
    return complex(Abar.entries[-1, -1])


def cross_coupling_ratio(Abar: CouplingMatrix) -> float:
    """``max_i |Abar_iN| / |Abar_NN|`` over the off-diagonal entries of column N."""
    A = Abar.entries
    return float(np.max(np.abs(A[:-1, -1])) / abs(A[-1, -1]))


def symmetric_mode_decay_and_shift(source, gamma3=1.0):
    """Intensity decay rate and frequency shift of the superradiant mode.

    ``source`` is a :class:`SpectralDecomposition`, a phased
    :class:`CouplingMatrix` (uses ``Abar_NN``) or a complex ``lambda_N`` in
    units of ``Gamma_3/2``.  Returns ``(rate, shift)`` with
    ``rate = -2 Re(lambda_N)`` and ``shift = Im(lambda_N)`` in the units of
    ``gamma3``.  Positive shift means a redshift of the emitted line.
    """
    if isinstance(source, SpectralDecomposition):
        lam = source.lambda_N
    elif isinstance(source, CouplingMatrix):
        if source.basis is not Basis.PHASED:
            raise ValueError("pass a phased-basis matrix or a decomposition")
        lam = complex(source.entries[-1, -1])
    else:
        lam = complex(source)
    half = 0.5 * gamma3
    return -2.0 * lam.real * half, lam.imag * half
