"""Cooperative Lamb shift of the phased symmetric state.

Three routes are provided: the momentum integral with the full ``mu_bar(k)``,
the same integral with the geometric factor frozen at ``k = k_3`` and hard
IR/UV cutoffs, and the leading-order closed form of the latter.  All return
``Im(lambda_N)`` in the units of ``gamma3`` (rad/s for tabulated species).
A positive value is a redshift of the idler line.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import NoSignChangeError, QuadratureError
from .geometry import AtomCloud, CylinderSpec, _pair_blocks, mu_bar_k, pair_geometry, sample_cylinder
from .kernels import Averaging, shift_kernel
from .quadrature import gauss_kronrod

REDSHIFT_POSITIVE = True
PV_EPSILONS = (1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class CutoffConfig:
    """IR and UV momentum cutoffs in rad/m."""

    k_m: float
    k_M: float = math.inf

    def __post_init__(self):
        if not (self.k_m > 0 and self.k_M > self.k_m):
            raise ValueError(f"need 0 < k_m < k_M, got k_m={self.k_m}, k_M={self.k_M}")

    @property
    def k_M_infinite(self) -> bool:
        return math.isinf(self.k_M)

    def ratios(self, k3):
        """``(k_m/k_3, k_3/k_M)``; raises if the pole is not inside the window."""
        lo = self.k_m / k3
        hi = 0.0 if self.k_M_infinite else k3 / self.k_M
        if not (lo < 1.0 and hi < 1.0):
            raise ValueError(f"cutoffs must bracket k_3: k_m/k_3={lo:.3g}, k_3/k_M={hi:.3g}")
        return lo, hi


@dataclass(frozen=True)
class SpeciesData:
    name: str
    lambda_D1: float
    gamma3: float
    atomic_radius: float
    source: str = ""

    def __post_init__(self):
        for attr in ("lambda_D1", "gamma3", "atomic_radius"):
            if not getattr(self, attr) > 0:
                raise ValueError(f"{self.name}: {attr} must be positive")

    @property
    def k3(self) -> float:
        return 2 * math.pi / self.lambda_D1


_SPECIES_COLUMNS = ("name", "lambda_D1_m", "gamma3_per_s", "atomic_radius_m", "source")


def load_species(path=None) -> dict[str, SpeciesData]:
    """Read the species table (bundled CSV unless ``path`` is given)."""
    if path is None:
        text = resources.files(__package__).joinpath("data/species.csv").read_text()
    else:
        with open(path, newline="") as fh:
            text = fh.read()
    rows = list(csv.DictReader(text.splitlines()))
    if not rows or tuple(rows[0].keys()) != _SPECIES_COLUMNS:
        raise ValueError(f"species table must have columns {_SPECIES_COLUMNS}")
    table = {}
    for i, row in enumerate(rows):
        try:
            sp = SpeciesData(row["name"], float(row["lambda_D1_m"]), float(row["gamma3_per_s"]),
                             float(row["atomic_radius_m"]), row["source"])
        except ValueError as exc:
            raise ValueError(f"species table row {i + 1}: {exc}") from exc
        table[sp.name] = sp
    return table


@lru_cache(maxsize=1)
def _default_species():
    return load_species()


def get_species(name: str) -> SpeciesData:
    try:
        return _default_species()[name]
    except KeyError:
        raise KeyError(f"unknown species {name!r}; known: {sorted(_default_species())}") from None


def infrared_cutoff(spec: CylinderSpec) -> float:
    """``k_m = 2 pi / (pi a^2 h)^(1/3)``, the inverse cube root of the volume."""
    return 2 * math.pi / spec.volume ** (1.0 / 3.0)


def ultraviolet_cutoff(atomic_radius: float) -> float:
    """``k_M = 2 pi / r_atomic`` (our convention for the atomic-size cutoff)."""
    return 2 * math.pi / atomic_radius


def default_cutoffs(spec: CylinderSpec, atomic_radius=None, k_M=None) -> CutoffConfig:
    if k_M is None:
        k_M = math.inf if atomic_radius is None else ultraviolet_cutoff(atomic_radius)
    return CutoffConfig(infrared_cutoff(spec), k_M)


def cls_closed_form(N, mu_bar, k3, cutoffs: CutoffConfig, gamma3) -> float:
    """Leading order ``2 N mu_bar Gamma_3 (k_m/k_3 - k_3/k_M)``."""
    lo, hi = cutoffs.ratios(k3)
    return 2.0 * N * mu_bar * gamma3 * (lo - hi)


def cls_cutoff_integral(N, mu_bar_at_k3, k3, cutoffs: CutoffConfig, gamma3) -> float:
    """``N mu_bar Gamma_3 PV int dk/k (1/(k-1) + 1/(k+1))`` between the cutoffs.

    The integrand is ``2/(k^2 - 1)`` with antiderivative ``ln|(k-1)/(k+1)|``,
    so the principal value is ``2 (atanh(k_m/k_3) - atanh(k_3/k_M))`` exactly.
    """
    lo, hi = cutoffs.ratios(k3)
    return 2.0 * N * mu_bar_at_k3 * gamma3 * (math.atanh(lo) - math.atanh(hi))


@dataclass(frozen=True)
class PVResult:
    value: float
    error: float
    by_epsilon: tuple


def _excised_pv(g, lo, hi, epsilons, rtol, inner=1e-2):
    """PV of ``int g(k)/(k-1) dk`` on ``[lo, hi]`` by symmetric excision.

    The region ``|k - 1| > inner`` is integrated once; the band
    ``eps < |k - 1| < inner`` is folded onto ``t = |k - 1|``, which makes the
    excision symmetric by construction.  The excised value is linear in
    ``eps`` to leading order, so the last two excisions are Richardson
    extrapolated.
    """
    inner = min(inner, 0.5 * (1 - lo), 0.5 * (hi - 1))
    if not inner > max(epsilons):
        raise ValueError("cutoffs too close to the pole for the excision band")

    def f_k(k):
        return g(k) / (k - 1.0)

    left = np.geomspace(1.0 - lo, inner, 40)
    right = np.geomspace(inner, hi - 1.0, 60)
    outer = (gauss_kronrod(f_k, 1.0 - left, rtol=rtol)[0]
             + gauss_kronrod(f_k, 1.0 + right, rtol=rtol)[0])

    def f_t(t):
        return (g(1.0 + t) - g(1.0 - t)) / t

    values = []
    for eps in epsilons:
        edges = np.geomspace(eps, inner, 30)
        values.append(outer + gauss_kronrod(f_t, edges, rtol=rtol)[0])
    e1, e2 = epsilons[-2], epsilons[-1]
    v1, v2 = values[-2], values[-1]
    extrap = (e1 * v2 - e2 * v1) / (e1 - e2)
    return PVResult(extrap, abs(extrap - v2), tuple(values))


def cls_full_integral(spec: CylinderSpec, cutoffs: CutoffConfig, gamma3,
                      epsilons=PV_EPSILONS, rtol=1e-6, mu_rtol=1e-7,
                      return_details=False):
    """Momentum integral with the geometric factor kept at each ``k``.

    ``Gamma_3 PV int k^3 N mu_bar(k) (1/(k-1) + 1/(k+1)) dk`` over
    ``[k_m/k_3, k_M/k_3]``.  With ``mu_bar(k) = mu_bar(1)/k^4`` this is exactly
    :func:`cls_cutoff_integral`, so both share one normalization.

    Raises
    ------
    QuadratureError
        If the excision sequence does not settle (the diagnostics carry the
        per-epsilon values).
    """
    if cutoffs.k_M_infinite:
        raise ValueError("the full integral needs a finite k_M")
    lo, hi = cutoffs.ratios(spec.k3)
    hi = 1.0 / hi
    n = spec.N

    def nmu(k):
        k = np.asarray(k, dtype=float)
        out = np.empty(k.shape)
        for idx, kk in np.ndenumerate(k):
            out[idx] = n * mu_bar_k(float(kk), spec, rtol=mu_rtol)
        return out

    def g(k):
        return k**3 * nmu(k)

    res = _excised_pv(g, lo, hi, epsilons, rtol)
    regular, _ = gauss_kronrod(lambda k: g(k) / (k + 1.0),
                               np.geomspace(lo, hi, 80), rtol=rtol)
    value = gamma3 * (res.value + regular)
    spread = max(res.by_epsilon) - min(res.by_epsilon)
    if not np.isfinite(value) or res.error > max(1e-3 * abs(res.value), spread):
        raise QuadratureError("excision sequence did not converge",
                              estimate=value, error=gamma3 * res.error)
    if return_details:
        eps_values = tuple(gamma3 * (v + regular) for v in res.by_epsilon)
        return value, {"epsilons": tuple(epsilons), "values": eps_values,
                       "error": gamma3 * res.error}
    return value


def cls_discrete_sum(cloud: AtomCloud, kbar, k3, gamma3,
                     averaging=Averaging.CIRCULAR, orientation=(1.0, 0.0, 0.0)) -> float:
    """``-(Gamma_3/N) sum_{mu != nu} G_{mu nu} cos(kbar . r_{mu nu})``."""
    n = cloud.N
    if n < 2:
        return 0.0
    kbar = np.asarray(kbar, dtype=float)
    averaging = Averaging(averaging)
    total = 0.0
    for start, stop, diff in _pair_blocks(cloud.positions):
        idx = np.arange(start, stop)
        mask = np.ones(diff.shape[:2], dtype=bool)
        mask[idx - start, idx] = False
        d = diff[mask]
        xi, cos = pair_geometry(d, k3, orientation, averaging)
        total += float(np.sum(shift_kernel(xi, cos, averaging) * np.cos(d @ kbar)))
    return -gamma3 * total / n


def cls_discrete_sensitivity(spec: CylinderSpec, seed, gamma3, exclusion_radius,
                             averaging=Averaging.CIRCULAR) -> dict:
    """Discrete-sum shift at ``r_ex`` and ``2 r_ex`` on clouds from one seed."""
    kbar = np.array([0.0, 0.0, spec.k3])
    out = {}
    for factor in (1, 2):
        r = factor * exclusion_radius
        cloud = sample_cylinder(spec, seed, r)
        out[r] = cls_discrete_sum(cloud, kbar, spec.k3, gamma3, averaging)
    return out


def cls_vs_radius(species: SpeciesData, height, density, radii, method="closed_form",
                  k_M=None):
    """Closed-form (or cutoff-integral) shift for each radius, in rad/s."""
    fn = {"closed_form": cls_closed_form, "cutoff_integral": cls_cutoff_integral}[method]
    out = []
    for a in radii:
        spec = CylinderSpec(height, a, species.lambda_D1, density=density)
        cut = default_cutoffs(spec, species.atomic_radius, k_M)
        mb = mu_bar_k(1.0, spec)
        out.append(fn(spec.N, mb, spec.k3, cut, species.gamma3))
    return np.array(out)


def crossing_radius(species: SpeciesData, height, density=None, bracket=(1e-6, 1e-1),
                    rtol=1e-3, shift_fn: Optional[Callable[[float], float]] = None,
                    k_M=None) -> float:
    """Radius where the shift changes sign, by Brent's method in ``log a``.

    Without ``shift_fn`` the frozen-geometry shift is used.  It factorizes as
    ``N mu_bar Gamma_3 * phi(k_m, k_M)`` with ``N mu_bar > 0``, so the root is
    that of the cutoff factor ``atanh(k_m/k_3) - atanh(k_3/k_M)`` and no
    geometric quadrature is needed.

    Raises
    ------
    NoSignChangeError
        If the shift has the same sign at both ends of ``bracket``.
    """
    if shift_fn is None:
        k3 = species.k3
        kM = ultraviolet_cutoff(species.atomic_radius) if k_M is None else k_M

        def shift_fn(a):
            k_m = 2 * math.pi / (math.pi * a * a * height) ** (1.0 / 3.0)
            hi = 0.0 if math.isinf(kM) else k3 / kM
            return math.atanh(min(k_m / k3, 1 - 1e-16)) - math.atanh(hi)

    lo, hi = (math.log(b) for b in bracket)
    f_lo, f_hi = shift_fn(math.exp(lo)), shift_fn(math.exp(hi))
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChangeError(
            f"{species.name}: no sign change on [{bracket[0]:.3g}, {bracket[1]:.3g}] m "
            f"(values {f_lo:.3g}, {f_hi:.3g})")
    root = optimize.brentq(lambda s: shift_fn(math.exp(s)), lo, hi, xtol=rtol / 10)
    return math.exp(root)
