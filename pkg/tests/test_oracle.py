import math
import warnings

import numpy as np
import pytest

from cascade_cls.cli import oracle_comparison
from cascade_cls.dynamics import DriveConfig, PulseShape
from cascade_cls.geometry import AtomCloud
from cascade_cls.oracle import MAX_ATOMS, ModeGrid, calibrate_idler_rate, ode_oracle

OFF = PulseShape.constant(0.0)


def test_grid_couplings_follow_golden_rule():
    g = ModeGrid(11, 201, 5.0, 20.0, 0.3, 1.5)
    assert g.delta_i[0] == -20.0 and g.delta_i[-1] == 20.0
    assert 2 * math.pi * g.g_idler**2 / g.spacing_idler == pytest.approx(1.5)
    assert 2 * math.pi * g.g_signal**2 / g.spacing_signal == pytest.approx(0.3)
    assert g.revival_time == pytest.approx(2 * math.pi / max(g.spacing_idler, g.spacing_signal))
    with pytest.raises(ValueError):
        ModeGrid(1, 1)


def test_defaults_cover_two_thousand_modes():
    g = ModeGrid()
    assert g.n_signal + g.n_idler >= 2000


def test_without_coupling_ground_state_is_frozen():
    grid = ModeGrid(5, 9, 5.0, 5.0, 0.0, 0.0)
    cloud = AtomCloud(np.array([[0, 0, 0], [0, 0, 1.0]]))
    drive = DriveConfig(OFF, OFF, 3.0, 2.0, t_start=0.0)
    res = ode_oracle(cloud, drive, grid, 5.0, n_checkpoints=5)
    assert np.all(res.E == 1.0)
    assert np.all(res.A == 0) and np.all(res.C == 0) and np.all(res.D_final == 0)


def test_norm_is_conserved_with_drive():
    grid = ModeGrid(21, 81, 20.0, 20.0, 0.05, 1.0, 1.0, 1.0)
    cloud = AtomCloud(np.array([[0, 0, 0], [0.2, 0, 0.5]]))
    p = PulseShape.gaussian(2.0, 0.0, 0.5)
    drive = DriveConfig(p, p, 8.0, 6.0, ka=(0, 0, 1.0), kb=(0, 0, 1.0))
    res = ode_oracle(cloud, drive, grid, 4.0, n_checkpoints=10)
    assert res.max_norm_error < 1e-8
    assert res.times[0] == drive.t_start
    assert res.C_population()[-1] > 0


def test_single_atom_decay_rate_calibration():
    grid = ModeGrid(1, 401, 1.0, 40.0, 0.0, 1.0)
    gamma = calibrate_idler_rate(grid)
    # Band truncation and grid recurrence shift the rate by about a percent.
    assert gamma == pytest.approx(1.0, rel=0.02)


def test_two_atom_symmetric_decay_is_doubled():
    grid = ModeGrid(1, 401, 1.0, 40.0, 0.0, 1.0)
    gamma = calibrate_idler_rate(grid)
    cloud = AtomCloud(np.array([[0, 0, 0], [0, 0, 0.8]]))
    drive = DriveConfig(OFF, OFF, 1.0, 1.0, t_start=0.0)
    # Phased symmetric idler state of two atoms on the axis (k_idler = 0).
    res = ode_oracle(cloud, drive, grid, 2.0, initial={"C": np.full(2, 1 / math.sqrt(2))},
                     n_checkpoints=20)
    pop = res.C_population()
    sel = res.times > 0.1
    slope = np.polyfit(res.times[sel], np.log(pop[sel]), 1)[0]
    assert -slope == pytest.approx(2 * gamma, rel=0.02)


def test_too_many_atoms():
    cloud = AtomCloud(np.zeros((MAX_ATOMS + 1, 3)))
    with pytest.raises(ValueError):
        ode_oracle(cloud, DriveConfig(OFF, OFF, 1.0, 1.0, t_start=0.0), ModeGrid(1, 5), 1.0)


def test_pipeline_agrees_on_coarse_grid():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = oracle_comparison(n_signal=101, n_idler=401)
    assert r["rel_l2"] < 0.05
    assert r["norm_error"] < 1e-6
    assert r["gamma"] == pytest.approx(1.0, rel=0.02)
