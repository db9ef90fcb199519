"""Cylindrical atom clouds and their collective geometric factors.

The cylinder axis is ``z``; the phased excitation wavevector ``kbar`` points
along ``+z`` with magnitude ``k_3``.  Lengths are in metres unless a name says
otherwise; ``H = k_3 h`` and ``A = k_3 a`` are the dimensionless sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .errors import PackingError
from .kernels import Averaging, decay_kernel
from .quadrature import gauss_kronrod

DEFAULT_WAVELENGTH = 794.978851e-9  # Rb D1
_RETRIES_PER_ATOM = 10_000
_MAX_PACKING_FRACTION = 0.3


@dataclass(frozen=True)
class CylinderSpec:
    """Uniform cylinder of atoms.

    Give either ``density`` (atoms per m^3) or ``n_atoms``; the other one is
    derived.  When both are given they must agree to within 50 %.
    """

    height: float
    radius: float
    wavelength: float = DEFAULT_WAVELENGTH
    density: Optional[float] = None
    n_atoms: Optional[int] = None

    def __post_init__(self):
        for name in ("height", "radius", "wavelength"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.density is None and self.n_atoms is None:
            raise ValueError("need density or n_atoms")
        if self.n_atoms is not None and self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.density is not None and self.n_atoms is not None:
            expected = self.density * self.volume
            if abs(self.n_atoms - expected) / self.n_atoms >= 0.5:
                raise ValueError(
                    f"n_atoms={self.n_atoms} inconsistent with density*volume={expected:.4g}")

    @classmethod
    def from_dimensionless(cls, H, A, n_atoms, wavelength=DEFAULT_WAVELENGTH):
        k3 = 2 * math.pi / wavelength
        return cls(height=H / k3, radius=A / k3, wavelength=wavelength, n_atoms=n_atoms)

    @property
    def k3(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def H(self) -> float:
        return self.k3 * self.height

    @property
    def A(self) -> float:
        return self.k3 * self.radius

    @property
    def volume(self) -> float:
        return math.pi * self.radius**2 * self.height

    @property
    def N(self) -> int:
        """Atom number; ``max(1, round(density * volume))`` when derived."""
        if self.n_atoms is not None:
            return int(self.n_atoms)
        return max(1, int(round(self.density * self.volume)))

    @property
    def rho(self) -> float:
        return self.density if self.density is not None else self.N / self.volume

    def with_radius(self, radius):
        return CylinderSpec(self.height, radius, self.wavelength,
                            self.density, None if self.density else self.n_atoms)


@dataclass(frozen=True)
class AtomCloud:
    """Atom positions in metres, shape ``(N, 3)``."""

    positions: np.ndarray
    seed: Optional[int] = None
    exclusion_radius: float = 0.0
    spec: Optional[CylinderSpec] = field(default=None, compare=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True).reshape(-1, 3)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    def min_separation(self) -> float:
        if self.N < 2:
            return math.inf
        best = math.inf
        for i in range(self.N - 1):
            d = np.linalg.norm(self.positions[i + 1:] - self.positions[i], axis=1)
            best = min(best, float(d.min()))
        return best


@dataclass(frozen=True)
class GeometryFactors:
    mu_bar: float
    enhancement: float
    n_atoms: int
    structure_factor: Optional[float] = None


def default_exclusion_radius(spec: CylinderSpec) -> float:
    return spec.wavelength / 50.0


def sample_cylinder(spec: CylinderSpec, seed: int, exclusion_radius=None) -> AtomCloud:
    """Draw ``spec.N`` uniform points in the cylinder with a hard core.

    Points are proposed i.i.d. and rejected if closer than
    ``exclusion_radius`` to any accepted point.  The result depends only on
    ``(spec, seed, exclusion_radius)``.

    Raises
    ------
    PackingError
        If the hard spheres would fill more than 30 % of the volume, or the
        ``10^4 N`` proposal budget runs out.
    """
    if exclusion_radius is None:
        exclusion_radius = default_exclusion_radius(spec)
    if not exclusion_radius > 0:
        raise ValueError("exclusion_radius must be positive")
    n = spec.N
    packing = n * (math.pi / 6) * exclusion_radius**3 / spec.volume
    if packing > _MAX_PACKING_FRACTION:
        raise PackingError(f"hard-core packing fraction {packing:.3g} is infeasible")

    rng = np.random.default_rng(seed)
    budget = _RETRIES_PER_ATOM * n
    accepted = np.empty((n, 3))
    count = 0
    tried = 0
    r2 = exclusion_radius**2
    while count < n:
        batch = min(4096, budget - tried)
        if batch <= 0:
            raise PackingError(f"placed {count}/{n} atoms after {tried} proposals")
        rad = spec.radius * np.sqrt(rng.random(batch))
        phi = 2 * math.pi * rng.random(batch)
        z = spec.height * rng.random(batch)
        cand = np.column_stack([rad * np.cos(phi), rad * np.sin(phi), z])
        for p in cand:
            tried += 1
            if count and np.min(np.sum((accepted[:count] - p) ** 2, axis=1)) < r2:
                continue
            accepted[count] = p
            count += 1
            if count == n:
                break
    return AtomCloud(accepted, seed=seed, exclusion_radius=exclusion_radius, spec=spec)


def bessel_j1(x):
    """Bessel function of the first kind, order one (scipy's Cephes ``j1``)."""
    return special.j1(x)


def _j1_over_arg(z):
    z = np.asarray(z, dtype=float)
    small = z < 1e-4
    zs = np.where(small, 1.0, z)
    return np.where(small, 0.5 - z * z / 16.0, bessel_j1(zs) / zs)


def mu_bar_integrand(x, H, A):
    """Integrand of the cylinder geometric constant, in sinc form.

    Equal to ``(1+x^2) sin^2(H(1-x)/2) J1^2(A sqrt(1-x^2)) / ((1-x)^2 (1-x^2))``
    divided by ``H^2 A^2 / 4``, which is regular on the closed interval
    (``1/2`` at ``x = 1``).
    """
    x = np.asarray(x, dtype=float)
    u = 1.0 - x
    v = 1.0 + x
    half_phase = 0.5 * H * u
    sinc = np.sinc(half_phase / math.pi)
    jz = _j1_over_arg(A * np.sqrt(np.clip(u * v, 0.0, None)))
    return (1.0 + x * x) * sinc**2 * jz**2


def _mu_bar_breakpoints(H, A, max_sin=512, max_j=8192):
    pts = [np.array([-1.0, 1.0])]
    # Seed panels at the sin(H u / 2) zeros and the J1 quarter periods, thinned
    # to a cap; adaptive bisection resolves the rest.  The J1 factor needs the
    # denser seed: with too few panels its aliasing fools the error estimate.
    n_sin = min(int(2 * H / math.pi), max_sin)
    if n_sin > 1:
        pts.append(np.linspace(-1.0, 1.0, n_sin + 1))
    n_j = int(2 * A / math.pi)
    if n_j > 1:
        s = np.linspace(0.0, 1.0, min(n_j, max_j) + 1)[1:-1]
        xs = np.sqrt(1.0 - s * s)
        pts += [xs, -xs]
    # Geometric grading towards the forward direction, where the weight sits.
    scale = min(1.0, 1.0 / max(H, A * A, 1.0))
    pts.append(1.0 - np.geomspace(scale * 1e-3, 1.0, 40))
    edges = np.concatenate(pts)
    return np.unique(np.clip(edges, -1.0, 1.0))


def mu_bar_dimensionless(H, A, N, rtol=1e-8, atol=1e-14):
    """Geometric constant ``mu_bar`` for scaled height ``H`` and radius ``A``.

    Raises
    ------
    ValueError
        If ``H`` or ``A`` is not positive.
    QuadratureError
        If the adaptive quadrature misses the tolerance.
    """
    if not (H > 0 and A > 0):
        raise ValueError("H and A must be positive")
    if N <= 1:
        return 0.0
    value, _ = gauss_kronrod(lambda x: mu_bar_integrand(x, H, A),
                             _mu_bar_breakpoints(H, A), rtol=rtol, atol=atol)
    return 1.5 * (N - 1) / N * value


def mu_bar(spec: CylinderSpec, **quad_opts) -> float:
    return mu_bar_k(1.0, spec, **quad_opts)


def mu_bar_k(k_rel, spec: CylinderSpec, **quad_opts) -> float:
    """``mu_bar`` at momentum ``k_rel * k_3``.

    Height and radius arguments are both rescaled, ``(k H, k A)``, which is
    the same as the ``1/k^4`` prefactor form of the integral.
    """
    if not k_rel > 0:
        raise ValueError("k_rel must be positive")
    return mu_bar_dimensionless(k_rel * spec.H, k_rel * spec.A, spec.N, **quad_opts)


def _pair_blocks(positions, block=512):
    n = positions.shape[0]
    for start in range(0, n, block):
        stop = min(n, start + block)
        yield start, stop, positions[start:stop, None, :] - positions[None, :, :]


def pair_geometry(diff, k3, orientation, averaging):
    """Return ``xi`` and ``cos_theta`` arrays for pair displacement vectors.

    For ``FIXED_ORIENTATION`` the angle is taken to ``orientation``; for the
    other modes to the ``z`` axis.
    """
    r = np.linalg.norm(diff, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        if averaging is Averaging.FIXED_ORIENTATION:
            d = np.asarray(orientation, dtype=float)
            d = d / np.linalg.norm(d)
            cos = (diff @ d) / r
        else:
            cos = diff[..., 2] / r
    return k3 * r, np.clip(np.nan_to_num(cos), -1.0, 1.0)


def enhancement_mc(cloud: AtomCloud, spec: CylinderSpec,
                   averaging=Averaging.CIRCULAR, orientation=(1.0, 0.0, 0.0)) -> float:
    """Monte-Carlo estimate of ``N mu_bar + 1`` from a sampled cloud.

    Real part of ``(1/N) sum_{mu,nu} F_{mu nu} exp(-i kbar . r_{mu nu})`` with
    ``F_{mu mu} = 1`` and ``kbar = k_3 z_hat``.
    """
    averaging = Averaging(averaging)
    n = cloud.N
    k3 = spec.k3
    total = float(n)
    pos = cloud.positions
    for start, stop, diff in _pair_blocks(pos):
        idx = np.arange(start, stop)
        mask = np.ones(diff.shape[:2], dtype=bool)
        mask[idx - start, idx] = False
        d = diff[mask]
        xi, cos = pair_geometry(d, k3, orientation, averaging)
        total += float(np.sum(decay_kernel(xi, cos, averaging) * np.cos(k3 * d[:, 2])))
    return total / n


def structure_factor(cloud: AtomCloud, kbar, k3_dir, k3=None) -> float:
    """``(1/N^2) |sum_mu exp(i (kbar - k3) . r_mu)|^2``.

    ``k3_dir`` is a unit vector; the magnitude ``k3`` defaults to ``|kbar|``.
    """
    kbar = np.asarray(kbar, dtype=float)
    k3_dir = np.asarray(k3_dir, dtype=float)
    if abs(np.linalg.norm(k3_dir) - 1.0) > 1e-12:
        raise ValueError("k3_dir must be a unit vector")
    if k3 is None:
        k3 = np.linalg.norm(kbar)
    q = kbar - k3 * k3_dir
    amp = np.exp(1j * (cloud.positions @ q)).sum()
    return float(abs(amp) ** 2) / cloud.N**2


def geometry_factors(spec: CylinderSpec, **quad_opts) -> GeometryFactors:
    mb = mu_bar(spec, **quad_opts)
    return GeometryFactors(mu_bar=mb, enhancement=spec.N * mb + 1.0, n_atoms=spec.N)
