"""Direct integration of the single-excitation equations on a discrete mode grid.

This is a small-N reference for the phased-mode pipeline in
:mod:`cascade_cls.dynamics`.  Field modes are one-dimensional: every signal
mode carries the spatial phase ``exp(i k_s z)`` and every idler mode
``exp(i k_i z)``, with frequencies on uniform grids.  In the Markov limit the
idler modes produce the rank-one coupling ``-(Gamma/2) exp(i k_i (z_mu - z_nu))``
with ``Gamma = 2 pi |g_i|^2 / d_omega`` (Fermi's golden rule for the grid), so
the phased symmetric state decays at ``N Gamma / 2`` in amplitude.

State, in the interaction picture::

    E                      ground state
    A_mu, B_mu             intermediate and doubly excited levels
    C[mu, s]               idler level plus one signal photon in mode s
    D[s, i]                ground state plus a signal and an idler photon
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .dynamics import DriveConfig
from .errors import QuadratureError
from .geometry import AtomCloud

MAX_ATOMS = 3


@dataclass(frozen=True)
class ModeGrid:
    """Uniform 1D signal and idler mode grids.

    Detunings are ``delta_s = omega_ks - omega_23 - Delta_2`` and
    ``delta_i = omega_ki - omega_3``.  ``gamma_signal`` and ``gamma_idler``
    are the golden-rule single-atom rates the couplings are chosen to give.
    """

    n_signal: int = 1001
    n_idler: int = 1001
    half_width_signal: float = 50.0
    half_width_idler: float = 50.0
    gamma_signal: float = 0.002
    gamma_idler: float = 1.0
    k_signal: float = 0.0
    k_idler: float = 0.0

    def __post_init__(self):
        if self.n_signal < 1 or self.n_idler < 2:
            raise ValueError("need at least one signal and two idler modes")

    def _axis(self, n, half):
        return np.linspace(-half, half, n) if n > 1 else np.zeros(1)

    @property
    def delta_s(self) -> np.ndarray:
        return self._axis(self.n_signal, self.half_width_signal)

    @property
    def delta_i(self) -> np.ndarray:
        return self._axis(self.n_idler, self.half_width_idler)

    @property
    def spacing_idler(self) -> float:
        return 2 * self.half_width_idler / (self.n_idler - 1)

    @property
    def spacing_signal(self) -> float:
        if self.n_signal == 1:
            return 2 * self.half_width_signal
        return 2 * self.half_width_signal / (self.n_signal - 1)

    @property
    def g_idler(self) -> float:
        return math.sqrt(self.gamma_idler * self.spacing_idler / (2 * math.pi))

    @property
    def g_signal(self) -> float:
        return math.sqrt(self.gamma_signal * self.spacing_signal / (2 * math.pi))

    @property
    def revival_time(self) -> float:
        """Recurrence time ``2 pi / d_omega`` of the coarsest grid."""
        return 2 * math.pi / max(self.spacing_idler, self.spacing_signal if self.n_signal > 1 else 0)


@dataclass(frozen=True)
class OracleResult:
    times: np.ndarray
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    norm_error: np.ndarray
    D_final: np.ndarray
    grid: ModeGrid

    @property
    def max_norm_error(self) -> float:
        return float(np.max(np.abs(self.norm_error)))

    def C_population(self) -> np.ndarray:
        return np.sum(np.abs(self.C) ** 2, axis=(1, 2))


class _System:
    def __init__(self, cloud, drive, grid):
        pos = cloud.positions
        self.n = pos.shape[0]
        self.ms, self.mi = grid.n_signal, grid.n_idler
        self.drive = drive
        self.ds = grid.delta_s
        self.di = grid.delta_i
        self.gs = grid.g_signal
        self.gi = grid.g_idler
        z = pos[:, 2]
        self.ea = np.exp(1j * (pos @ np.asarray(drive.ka, float)))
        self.eb = np.exp(1j * (pos @ np.asarray(drive.kb, float)))
        self.es_r = np.exp(1j * grid.k_signal * z)
        self.ei_r = np.exp(1j * grid.k_idler * z)
        n, ms = self.n, self.ms
        self.sl = {
            "E": slice(0, 1),
            "A": slice(1, 1 + n),
            "B": slice(1 + n, 1 + 2 * n),
            "C": slice(1 + 2 * n, 1 + 2 * n + n * ms),
            "D": slice(1 + 2 * n + n * ms, None),
        }
        self.size = 1 + 2 * n + n * ms + ms * self.mi

    def split(self, y):
        s = self.sl
        return (y[s["E"]][0], y[s["A"]], y[s["B"]],
                y[s["C"]].reshape(self.n, self.ms), y[s["D"]].reshape(self.ms, self.mi))

    def rhs(self, t, y):
        E, A, B, C, D = self.split(y)
        oa = complex(self.drive.omega_a(t))
        ob = complex(self.drive.omega_b(t))
        d1, d2 = self.drive.delta1, self.drive.delta2
        ph_s = np.exp(1j * self.ds * t)
        ph_i = np.exp(1j * self.di * t)
        out = np.empty_like(y)
        s = self.sl
        out[s["E"]] = 0.5j * np.conj(oa) * np.sum(np.conj(self.ea) * A)
        out[s["A"]] = 0.5j * oa * self.ea * E + 0.5j * np.conj(ob) * np.conj(self.eb) * B + 1j * d1 * A
        out[s["B"]] = (0.5j * ob * self.eb * A + 1j * d2 * B
                       - self.gs * self.es_r * (C @ np.conj(ph_s)))
        # Idler field seen by each signal mode, and the field radiated into it.
        back = D @ (self.gi * np.conj(ph_i))
        dC = (self.gs * np.outer(np.conj(self.es_r) * B, ph_s)
              - np.outer(self.ei_r, back))
        out[s["C"]] = dC.ravel()
        X = np.conj(self.ei_r) @ C
        out[s["D"]] = (self.gi * np.outer(X, ph_i)).ravel()
        return out


def _norm(y):
    return float(np.vdot(y, y).real)


def ode_oracle(cloud: AtomCloud, drive: DriveConfig, grid: ModeGrid, t_final: float,
               t_start: Optional[float] = None, n_checkpoints: int = 60,
               initial: Optional[dict] = None, rtol=1e-9, atol=1e-13) -> OracleResult:
    """Integrate the full single-excitation amplitude equations.

    The run starts in the ground state (``E = 1``) unless ``initial`` maps
    some of ``E``, ``A``, ``B``, ``C`` to starting values.  Atom amplitudes
    and the norm are recorded at ``n_checkpoints`` times; the photon-pair
    amplitudes ``D`` are returned at ``t_final`` only.

    Raises
    ------
    ValueError
        For more than three atoms.
    QuadratureError
        If the integrator fails (for example on step-size underflow).
    """
    if cloud.N > MAX_ATOMS:
        raise ValueError(f"the oracle is limited to N <= {MAX_ATOMS}")
    sysm = _System(cloud, drive, grid)
    t0 = drive.t_start if t_start is None else t_start
    y = np.zeros(sysm.size, dtype=complex)
    if initial:
        for key, val in initial.items():
            y[sysm.sl[key]] = np.ravel(np.asarray(val, dtype=complex))
    else:
        y[0] = 1.0
    norm0 = _norm(y)
    fastest = max(abs(drive.delta1), abs(drive.delta2), grid.half_width_idler,
                  grid.half_width_signal, 1.0)
    checkpoints = np.linspace(t0, t_final, n_checkpoints + 1)
    rec = {"E": [], "A": [], "B": [], "C": [], "norm": []}

    def record(vec):
        E, A, B, C, _ = sysm.split(vec)
        rec["E"].append(E)
        rec["A"].append(A.copy())
        rec["B"].append(B.copy())
        rec["C"].append(C.copy())
        rec["norm"].append(_norm(vec) - norm0)

    record(y)
    # One solver for the whole run; solver objects sit in reference cycles,
    # so per-segment solvers pile up their stage arrays until a GC pass.
    solver = integrate.DOP853(sysm.rhs, t0, y, t_final, rtol=rtol, atol=atol,
                              max_step=2.0 / fastest)
    nxt = 1
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise QuadratureError(f"oracle integration failed at t={solver.t:.4g}: {msg}")
        if nxt < n_checkpoints and solver.t >= checkpoints[nxt]:
            interp = solver.dense_output()
            while nxt < n_checkpoints and solver.t >= checkpoints[nxt]:
                record(interp(checkpoints[nxt]))
                nxt += 1
            del interp
    y = solver.y.copy()
    record(y)
    return OracleResult(
        times=checkpoints,
        E=np.array(rec["E"]),
        A=np.array(rec["A"]),
        B=np.array(rec["B"]),
        C=np.array(rec["C"]),
        norm_error=np.array(rec["norm"]),
        D_final=sysm.split(y)[4].copy(),
        grid=grid,
    )


def calibrate_idler_rate(grid: ModeGrid, t_final=6.0, **kw) -> float:
    """Measured single-atom idler decay rate of ``grid``.

    One atom starts in the idler level (one signal mode, no drive) and the
    slope of ``ln |C|^2`` is fitted.  This is the rate the grid actually
    realizes; it differs from the golden-rule value by the band truncation.
    """
    from .dynamics import PulseShape

    g1 = ModeGrid(1, grid.n_idler, grid.half_width_signal, grid.half_width_idler,
                  0.0, grid.gamma_idler, grid.k_signal, grid.k_idler)
    cloud = AtomCloud(np.zeros((1, 3)))
    off = PulseShape.constant(0.0)
    drive = DriveConfig(off, off, 1.0, 1.0, t_start=0.0)
    res = ode_oracle(cloud, drive, g1, t_final, initial={"C": [1.0]}, **kw)
    pop = res.C_population()
    # Skip the first 1/W of non-Markovian transient.
    sel = res.times > 2.0 / grid.half_width_idler
    slope = np.polyfit(res.times[sel] - res.times[0], np.log(pop[sel]), 1)[0]
    return float(-slope)
