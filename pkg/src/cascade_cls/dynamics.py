"""Cascade emission amplitudes through the phased symmetric mode.

Time and frequency share one unit system (for example ``1/Gamma_3`` and
``Gamma_3``, or s and rad/s).  Detunings follow the convention
``delta_s = omega_ks - omega_23 - Delta_2`` and ``delta_i = omega_ki - omega_3``.
The coupling constants ``g_s``, ``g_i`` and polarization overlaps are folded
into one complex ``coupling_prefactor``, so amplitudes are defined up to that
overall constant.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import FitError, QuadratureError
from .geometry import AtomCloud

# Factor that turns "much greater than" into a number.
MUCH_GREATER = 10.0
RAMP_TOLERANCE = 1e-6


@dataclass(frozen=True)
class PulseShape:
    """Complex Rabi-frequency envelope.

    ``kind`` is one of ``constant``, ``ramp``, ``gaussian`` or ``sampled``.

    * ``constant``: ``amplitude`` for all times.
    * ``ramp``: zero before ``t_on``, a ``sin^2`` rise of length ``rise``,
      flat at ``amplitude``, and the mirrored fall starting at ``t_off``.
    * ``gaussian``: ``amplitude * exp(-(t - center)^2 / (2 width^2))``.
    * ``sampled``: linear interpolation of ``(times, values)``; zero outside.
    """

    kind: str
    amplitude: complex = 0.0
    center: float = 0.0
    width: float = 1.0
    t_on: float = 0.0
    rise: float = 1.0
    t_off: float = math.inf
    times: Optional[tuple] = None
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant", "ramp", "gaussian", "sampled"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.kind == "sampled":
            if self.times is None or self.values is None or len(self.times) != len(self.values):
                raise ValueError("sampled pulse needs equal-length times and values")
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("sampled pulse times must increase")
        if self.kind in ("gaussian", "ramp") and not (self.width > 0 and self.rise > 0):
            raise ValueError("width and rise must be positive")

    @classmethod
    def constant(cls, amplitude):
        return cls("constant", amplitude=amplitude)

    @classmethod
    def gaussian(cls, amplitude, center, width):
        return cls("gaussian", amplitude=amplitude, center=center, width=width)

    @classmethod
    def ramp(cls, amplitude, t_on, rise, t_off=math.inf):
        return cls("ramp", amplitude=amplitude, t_on=t_on, rise=rise, t_off=t_off)

    @classmethod
    def sampled(cls, times, values):
        return cls("sampled", times=tuple(np.asarray(times, float)),
                   values=tuple(np.asarray(values, complex)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, complex(self.amplitude))
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-0.5 * ((t - self.center) / self.width) ** 2)
        if self.kind == "ramp":
            up = np.clip((t - self.t_on) / self.rise, 0.0, 1.0)
            down = np.clip((self.t_off + self.rise - t) / self.rise, 0.0, 1.0)
            env = np.sin(0.5 * np.pi * up) ** 2 * np.sin(0.5 * np.pi * down) ** 2
            return self.amplitude * env
        ts = np.asarray(self.times)
        vs = np.asarray(self.values)
        re = np.interp(t, ts, vs.real, left=0.0, right=0.0)
        im = np.interp(t, ts, vs.imag, left=0.0, right=0.0)
        return re + 1j * im

    def peak(self) -> float:
        if self.kind == "sampled":
            return float(np.max(np.abs(self.values)))
        return abs(complex(self.amplitude))

    def natural_start(self) -> float:
        """Earliest time from which the envelope may be treated as switched on."""
        if self.kind == "gaussian":
            return self.center - 8.0 * self.width
        if self.kind == "ramp":
            return self.t_on
        if self.kind == "sampled":
            return float(self.times[0])
        return 0.0

    def natural_end(self) -> float:
        if self.kind == "gaussian":
            return self.center + 8.0 * self.width
        if self.kind == "ramp":
            return self.t_off + self.rise
        if self.kind == "sampled":
            return float(self.times[-1])
        return math.inf


@dataclass(frozen=True)
class DriveConfig:
    omega_a: PulseShape
    omega_b: PulseShape
    delta1: float
    delta2: float
    gamma2: float = 0.0
    ka: tuple = (0.0, 0.0, 0.0)
    kb: tuple = (0.0, 0.0, 0.0)
    t_start: Optional[float] = None

    def __post_init__(self):
        if self.delta1 == 0 or self.delta2 == 0:
            raise ValueError("adiabatic elimination needs nonzero detunings")
        if self.t_start is None:
            start = min(self.omega_a.natural_start(), self.omega_b.natural_start())
            object.__setattr__(self, "t_start", start)

    @property
    def t_end(self) -> float:
        return max(self.omega_a.natural_end(), self.omega_b.natural_end())

    def b(self, t):
        """Two-photon amplitude ``Omega_a Omega_b / (4 Delta_1 Delta_2)``."""
        return self.omega_a(t) * self.omega_b(t) / (4.0 * self.delta1 * self.delta2)


@dataclass(frozen=True)
class EmissionConfig:
    """Superradiant eigenvalue and the references for the detunings.

    ``lambda_N`` is in the time units of the drive (for example
    ``(Gamma_3/2) * lambda_hat`` from the spectra module).
    """

    lambda_N: complex
    n_atoms: int = 1
    omega23: float = 0.0
    omega3: float = 0.0
    delta_k: tuple = (0.0, 0.0, 0.0)
    coupling_prefactor: complex = 1.0

    def __post_init__(self):
        if not complex(self.lambda_N).real < 0:
            raise ValueError("Re(lambda_N) must be negative")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")

    @classmethod
    def from_wavevectors(cls, lambda_N, n_atoms, ka, kb, ks, ki, **kw):
        dk = tuple(np.asarray(ka, float) + np.asarray(kb, float)
                   - np.asarray(ks, float) - np.asarray(ki, float))
        return cls(lambda_N, n_atoms, delta_k=dk, **kw)

    def signal_detuning(self, drive: DriveConfig, omega_ks) -> float:
        return omega_ks - self.omega23 - drive.delta2

    def idler_detuning(self, omega_ki):
        return np.asarray(omega_ki, dtype=float) - self.omega3


@dataclass(frozen=True)
class Violation:
    condition: str
    lhs: float
    rhs: float

    @property
    def factor(self) -> float:
        """How far ``lhs`` falls short of exceeding ``rhs`` by ``MUCH_GREATER``."""
        return MUCH_GREATER * self.rhs / self.lhs if self.lhs else math.inf


class AdiabaticityWarning(UserWarning):
    def __init__(self, violations):
        self.violations = tuple(violations)
        text = "; ".join(f"{v.condition} (short by x{v.factor:.3g})" for v in self.violations)
        super().__init__(f"adiabatic elimination outside its validity range: {text}")


def validity_report(drive: DriveConfig, t_grid, n_atoms=1) -> list[Violation]:
    """Check the inequalities behind the adiabatic elimination on ``t_grid``.

    Each ``x >> y`` is enforced as ``x >= 10 y``.  The ramp-on requirement is
    reported with ``lhs = max|Omega|`` and ``rhs = |Omega(t_0)| * 10 / 1e-6``.
    """
    t = np.asarray(t_grid, dtype=float)
    oa = np.abs(drive.omega_a(t))
    ob = np.abs(drive.omega_b(t))
    max_a, max_b = float(oa.max()), float(ob.max())
    d1, d2 = abs(drive.delta1), abs(drive.delta2)
    out = []

    def need(name, big, small):
        if not big >= MUCH_GREATER * small:
            out.append(Violation(name, big, small))

    need("|Delta_1| >> sqrt(N)|Omega_a|", d1, math.sqrt(n_atoms) * max_a)
    for label, d in (("|Delta_1|", d1), ("|Delta_2|", d2)):
        need(f"{label} >> Omega_a", d, max_a)
        need(f"{label} >> Omega_b", d, max_b)
        need(f"{label} >> Gamma_2", d, drive.gamma2)
    stark = n_atoms * float(integrate.trapezoid(oa**2, t)) if t.size > 1 else 0.0
    need("|Delta_1| >> N int |Omega_a|^2 dt", d1, stark)
    for label, env, peak in (("Omega_a", oa, max_a), ("Omega_b", ob, max_b)):
        if peak > 0 and env[0] >= RAMP_TOLERANCE * peak:
            out.append(Violation(f"{label} smoothly turned on", peak,
                                 env[0] * MUCH_GREATER / RAMP_TOLERANCE))
    return out


@dataclass(frozen=True)
class AdiabaticSeries:
    times: np.ndarray
    E: np.ndarray
    A_tilde: np.ndarray
    B_tilde: np.ndarray
    b: np.ndarray
    violations: tuple = ()
    coupling_prefactor: complex = 1.0


def adiabatic_amplitudes(drive: DriveConfig, t_grid, n_atoms=1, check=True) -> AdiabaticSeries:
    """Adiabatically eliminated amplitudes on ``t_grid``.

    ``E = 1``, ``A~ = -Omega_a E / (2 Delta_1)`` and
    ``B~ = b = Omega_a Omega_b / (4 Delta_1 Delta_2)`` (envelopes, without the
    per-atom phases ``exp(i k . r)``).  A violated validity condition raises
    :class:`AdiabaticityWarning`, whose ``violations`` list says which
    inequality failed and by how much.
    """
    t = np.asarray(t_grid, dtype=float)
    violations = validity_report(drive, t, n_atoms) if check else []
    if violations:
        warnings.warn(AdiabaticityWarning(violations), stacklevel=2)
    E = np.ones(t.shape, dtype=complex)
    A = -drive.omega_a(t) * E / (2.0 * drive.delta1)
    b = drive.b(t)
    return AdiabaticSeries(t, E, A, b.copy(), b, tuple(violations))


def phase_match_factor(cloud: AtomCloud, delta_k) -> complex:
    """``sum_mu exp(i delta_k . r_mu)``."""
    dk = np.asarray(delta_k, dtype=float)
    return complex(np.exp(1j * (cloud.positions @ dk)).sum())


def _panels(t0, t1, *rates, per_period=4, max_panels=20000):
    """Panel edges about a quarter of the fastest period wide."""
    w = max([abs(r) for r in rates] + [1e-300])
    n = int(min(max_panels, max(1, math.ceil((t1 - t0) * w * per_period / (2 * math.pi)))))
    return np.linspace(t0, t1, n + 1)


def _quad_complex(f, edges, epsabs=0.0, epsrel=1e-10):
    total = 0.0j
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, a, b, complex_func=True, epsabs=epsabs,
                                epsrel=epsrel, limit=200, full_output=False)
        total += val
        err += abs(e)
    return total, err


def _drive_scale(drive):
    w = []
    for p in (drive.omega_a, drive.omega_b):
        if p.kind == "gaussian":
            w.append(1.0 / p.width)
        elif p.kind == "ramp":
            w.append(1.0 / p.rise)
    return max(w) if w else 0.0


def _time_window(emission, drive, t):
    t0 = drive.t_start
    if not t > t0:
        raise ValueError(f"evaluation time {t} precedes the drive start {t0}")
    return t0


def signal_amplitude(emission: EmissionConfig, drive: DriveConfig, omega_ks, t,
                     epsrel=1e-10) -> complex:
    """Collective signal amplitude in the phased symmetric mode.

    ``sqrt(N) c int_{t_0}^{t} exp(i delta_s t') b(t') exp(lambda_N (t - t')) dt'``
    where ``t_0`` is the drive start (``b`` vanishes before it).
    """
    t0 = _time_window(emission, drive, t)
    lam = complex(emission.lambda_N)
    ds = emission.signal_detuning(drive, omega_ks)

    def f(tp):
        return np.exp(1j * ds * tp) * drive.b(tp) * np.exp(lam * (t - tp))

    edges = _panels(t0, t, ds, abs(lam), _drive_scale(drive))
    floor = epsrel * _b_scale(drive, t0, t) * min(t - t0, 1.0 / abs(lam.real))
    val, err = _quad_complex(f, edges, epsabs=floor / len(edges), epsrel=epsrel)
    if not np.isfinite(val):
        raise QuadratureError("signal amplitude did not converge", val, err)
    return math.sqrt(emission.n_atoms) * emission.coupling_prefactor * val


def _b_scale(drive, t0, t):
    ts = np.linspace(t0, min(t, t0 + 1e3 * (1 + abs(t0))), 2001)
    return float(np.max(np.abs(drive.b(ts)))) or 1.0


def _double_integral_quad(emission, drive, ds, di, t, epsrel):
    t0 = drive.t_start
    lam = complex(emission.lambda_N)
    scale = _drive_scale(drive)
    # Absolute floors keep QUADPACK from chasing digits in the switched-off tails.
    floor = epsrel * _b_scale(drive, t0, t) * min(t - t0, 1.0 / abs(lam.real))

    def inner(tp):
        if tp <= t0:
            return 0.0j
        g = lambda s: np.exp(1j * ds * s) * drive.b(s) * np.exp(lam * (tp - s))
        edges = _panels(t0, tp, ds, abs(lam), scale, per_period=1)
        return _quad_complex(g, edges, epsabs=floor / len(edges), epsrel=epsrel)[0]

    outer = lambda tp: np.exp(1j * di * tp) * inner(tp)
    edges = _panels(t0, t, di, ds, abs(lam), scale, per_period=1)
    return _quad_complex(outer, edges, epsabs=floor * (t - t0) / len(edges), epsrel=epsrel)


def _double_integral_dblquad(emission, drive, ds, di, t, epsrel):
    t0 = drive.t_start
    lam = complex(emission.lambda_N)

    def f(s, tp):
        return (np.exp(1j * di * tp) * np.exp(1j * ds * s) * drive.b(s)
                * np.exp(lam * (tp - s)))

    parts = []
    for comp in (np.real, np.imag):
        val, err = integrate.dblquad(lambda s, tp: float(comp(f(s, tp))), t0, t,
                                     lambda tp: t0, lambda tp: tp,
                                     epsabs=0.0, epsrel=epsrel)
        parts.append((val, err))
    return complex(parts[0][0], parts[1][0]), parts[0][1] + parts[1][1]


def _double_integral_ode(emission, drive, ds, di, t, rtol=1e-10, atol=1e-14):
    """``C' = lambda C + e^{i ds t} b``, ``D_j' = e^{i di_j t} C`` from the drive start."""
    t0 = drive.t_start
    lam = complex(emission.lambda_N)
    di = np.atleast_1d(np.asarray(di, dtype=float))

    def rhs(tt, y):
        c = y[0]
        out = np.empty_like(y)
        out[0] = lam * c + np.exp(1j * ds * tt) * drive.b(tt)
        out[1:] = np.exp(1j * di * tt) * c
        return out

    w = max(abs(ds), float(np.max(np.abs(di))), abs(lam), _drive_scale(drive), 1e-12)
    sol = integrate.solve_ivp(rhs, (t0, t), np.zeros(di.size + 1, dtype=complex),
                              method="DOP853", rtol=rtol, atol=atol,
                              max_step=0.5 / w)
    if not sol.success:
        raise QuadratureError(f"amplitude ODE failed: {sol.message}")
    return sol.y[1:, -1], 0.0


def two_photon_amplitude(emission: EmissionConfig, drive: DriveConfig, cloud: AtomCloud,
                         omega_ks, omega_ki, t, method="quad", epsrel=1e-10):
    """Two-photon amplitude ``D(omega_ks, omega_ki, t)`` of the phased mode.

    ``c P int_{t_0}^{t} dt' e^{i delta_i t'} int_{t_0}^{t'} dt''
    e^{i delta_s t''} b(t'') e^{lambda_N (t' - t'')}`` with ``P`` the phase
    match factor and ``c`` the coupling prefactor.

    ``method`` is ``quad`` (iterated adaptive quadrature), ``dblquad``
    (two-dimensional quadrature over the triangle) or ``ode`` (which accepts
    an array of ``omega_ki`` and returns an array).
    """
    ds = emission.signal_detuning(drive, omega_ks)
    di = emission.idler_detuning(omega_ki)
    _time_window(emission, drive, t)
    pref = emission.coupling_prefactor * phase_match_factor(cloud, emission.delta_k)
    if method == "ode":
        val, _ = _double_integral_ode(emission, drive, ds, di, t)
        val = pref * val
        return val if np.ndim(omega_ki) else complex(val[0])
    if np.ndim(di):
        return np.array([two_photon_amplitude(emission, drive, cloud, omega_ks, w, t,
                                              method, epsrel) for w in np.ravel(omega_ki)])
    fn = {"quad": _double_integral_quad, "dblquad": _double_integral_dblquad}[method]
    val, err = fn(emission, drive, ds, float(di), t, epsrel)
    if not np.isfinite(val):
        raise QuadratureError("two-photon amplitude did not converge", val, err)
    return pref * val


@dataclass(frozen=True)
class SpectrumResult:
    omega_ki: np.ndarray
    intensity: np.ndarray
    center: float
    fwhm: float
    offset: float
    redshift_positive: bool = True
    fit_residual: float = 0.0


def lorentzian(w, amp, center, hwhm, floor=0.0):
    return amp * hwhm**2 / ((w - center) ** 2 + hwhm**2) + floor


def fit_lorentzian(w, y):
    """Fit ``amp hwhm^2 / ((w - center)^2 + hwhm^2)``; returns ``(center, fwhm, rms)``.

    Raises
    ------
    FitError
        If the samples are not unimodal or the fit does not converge.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size < 5 or not np.all(np.isfinite(y)):
        raise FitError("need at least 5 finite samples")
    k = int(np.argmax(y))
    d = np.diff(y)
    tol = 1e-9 * y[k]
    if np.any(d[:k] < -tol) or np.any(d[k:] > tol):
        raise FitError("spectrum is not unimodal")
    half = y >= 0.5 * y[k]
    guess_w = max(w[half][-1] - w[half][0], np.min(np.diff(w)))
    try:
        p, _ = optimize.curve_fit(lorentzian, w, y / y[k], p0=(1.0, w[k], 0.5 * guess_w),
                                  maxfev=20000)
    except (RuntimeError, optimize.OptimizeWarning) as exc:
        raise FitError(f"Lorentzian fit failed: {exc}") from exc
    rms = float(np.sqrt(np.mean((lorentzian(w, *p) - y / y[k]) ** 2)))
    return float(p[1]), float(2 * abs(p[2])), rms


def idler_spectrum(emission: EmissionConfig, drive: DriveConfig, cloud: AtomCloud,
                   omega_ki_grid, t_final, omega_ks=None, fit=True) -> SpectrumResult:
    """Idler intensity ``|D|^2`` at ``t_final`` and its Lorentzian fit.

    By default ``|D|^2`` is integrated over all signal frequencies.  Parseval
    turns that marginal into ``2 pi int |b(t'')|^2 |h(t'')|^2 dt''`` with
    ``h = (e^{(lambda + i delta_i)(t - t'')} - 1) / (lambda + i delta_i)``,
    which tends to a Lorentzian of full width ``2|Re lambda_N|`` centred at
    ``omega_3 - Im(lambda_N)``.  With ``omega_ks`` given, ``|D|^2`` is sampled
    at that signal frequency instead.

    ``offset`` is ``omega_3 - center``, positive for a redshift.
    """
    grid = np.asarray(omega_ki_grid, dtype=float)
    lam = complex(emission.lambda_N)
    pref = abs(emission.coupling_prefactor * phase_match_factor(cloud, emission.delta_k)) ** 2
    if (t_final - min(drive.t_end, t_final)) * abs(lam.real) < 5:
        warnings.warn("t_final is not long compared with 1/|Re(lambda_N)|", stacklevel=2)
    if omega_ks is None:
        di = emission.idler_detuning(grid)
        z = lam + 1j * di
        t0 = drive.t_start
        t_hi = min(t_final, drive.t_end)
        edges = _panels(t0, t_hi, _drive_scale(drive), per_period=8)
        nodes, weights = np.polynomial.legendre.leggauss(20)
        intensity = np.zeros(grid.shape)
        for a, b in zip(edges[:-1], edges[1:]):
            ts = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            wt = 0.5 * (b - a) * weights
            bb = np.abs(drive.b(ts)) ** 2
            h = np.expm1(np.outer(t_final - ts, z)) / z
            intensity += (wt * bb) @ (np.abs(h) ** 2)
        intensity *= 2 * math.pi * pref
    else:
        d = two_photon_amplitude(emission, drive, cloud, omega_ks, grid, t_final, method="ode")
        intensity = np.abs(d) ** 2
    if not fit:
        return SpectrumResult(grid, intensity, math.nan, math.nan, math.nan)
    center, fwhm, rms = fit_lorentzian(grid, intensity)
    return SpectrumResult(grid, intensity, center, fwhm, emission.omega3 - center,
                          True, rms)
