import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_cls.errors import KernelDomainError
from cascade_cls.kernels import (SMALL_XI, Averaging, KernelArgs, decay_kernel, kernel_F,
                                 kernel_F_limit_zero, kernel_G, shift_kernel)

mp.mp.dps = 40


def mp_F(xi, c):
    xi, c = mp.mpf(xi), mp.mpf(c)
    s, co = mp.sin(xi), mp.cos(xi)
    return float(mp.mpf(3) / 2 * ((1 - c**2) * s / xi + (1 - 3 * c**2) * (co / xi**2 - s / xi**3)))


def mp_G(xi, c):
    xi, c = mp.mpf(xi), mp.mpf(c)
    s, co = mp.sin(xi), mp.cos(xi)
    return float(mp.mpf(3) / 4 * (-(1 - c**2) * co / xi + (1 - 3 * c**2) * (s / xi**2 + co / xi**3)))


xis = st.floats(1e-3, 500.0)
cosines = st.floats(-1.0, 1.0)


@pytest.mark.parametrize("xi", [1e-3, 0.01, 0.049, 0.051, 0.3, 1.0, math.pi, 7.5, 40.0, 1234.5])
@pytest.mark.parametrize("c", [0.0, 0.3, -0.7, 1.0])
def test_F_against_high_precision(xi, c):
    assert kernel_F(KernelArgs(xi, c)) == pytest.approx(mp_F(xi, c), rel=1e-10, abs=1e-13)


@pytest.mark.parametrize("xi", [1e-2, 0.5, 2.0, 30.0])
@pytest.mark.parametrize("c", [0.0, 0.5, 1.0])
def test_G_against_high_precision(xi, c):
    assert kernel_G(KernelArgs(xi, c)) == pytest.approx(mp_G(xi, c), rel=1e-11)


@given(xis, cosines)
def test_F_matches_mpmath_everywhere(xi, c):
    assert float(decay_kernel(xi, c)) == pytest.approx(mp_F(xi, c), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("c", [0.0, 0.4, 1.0])
def test_F_limit_at_contact(c):
    assert kernel_F(KernelArgs(1e-9, c)) == pytest.approx(kernel_F_limit_zero(), abs=1e-15)
    assert kernel_F_limit_zero() == 1.0


@given(xis, cosines)
def test_kernels_even_in_cos(xi, c):
    assert float(decay_kernel(xi, c)) == float(decay_kernel(xi, -c))
    assert float(shift_kernel(xi, c)) == float(shift_kernel(xi, -c))


@given(st.floats(1e-3, 200.0))
def test_orientation_average_identity(xi):
    # Mean of the linear-dipole kernels over cos_theta in [-1, 1].
    nodes, w = np.polynomial.legendre.leggauss(8)
    F = 0.5 * np.sum(w * decay_kernel(xi, nodes))
    G = 0.5 * np.sum(w * shift_kernel(xi, nodes))
    assert F == pytest.approx(math.sin(xi) / xi, abs=1e-8)
    assert G == pytest.approx(-0.5 * math.cos(xi) / xi, rel=1e-8, abs=1e-12)
    assert float(decay_kernel(xi, 0.3, Averaging.POLARIZATION_AVERAGED)) == pytest.approx(F, abs=1e-8)
    assert float(shift_kernel(xi, 0.3, "polarization_averaged")) == pytest.approx(G, rel=1e-8, abs=1e-12)


@given(st.floats(1e-2, 200.0), st.floats(0.0, math.pi))
def test_circular_is_mean_over_transverse_dipoles(xi, theta):
    cz = math.cos(theta)
    phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    c_lin = math.sin(theta) * np.cos(phi)
    F_lin = decay_kernel(xi, c_lin).mean()
    G_lin = shift_kernel(xi, c_lin).mean()
    assert float(decay_kernel(xi, cz, Averaging.CIRCULAR)) == pytest.approx(F_lin, abs=1e-12)
    assert float(shift_kernel(xi, cz, Averaging.CIRCULAR)) == pytest.approx(G_lin, rel=1e-10, abs=1e-10)


@given(st.floats(1e-4, SMALL_XI * 0.999), cosines)
def test_small_xi_series_agrees_with_exact(xi, c):
    assert float(decay_kernel(xi, c)) == pytest.approx(mp_F(xi, c), abs=1e-6)


@pytest.mark.parametrize("c", [0.0, 0.6, 1.0])
def test_series_is_continuous_at_switch(c):
    lo = float(decay_kernel(SMALL_XI * (1 - 1e-9), c))
    hi = float(decay_kernel(SMALL_XI * (1 + 1e-9), c))
    # Closed form carries ~1e-12 cancellation error just above the switch.
    assert lo == pytest.approx(hi, abs=1e-10)


def test_G_near_field_coefficient():
    xi = 1e-4
    for c in (0.0, 1.0):
        assert kernel_G(KernelArgs(xi, c)) * xi**3 == pytest.approx(0.75 * (1 - 3 * c * c), rel=1e-6)


def test_vectorized_matches_scalar():
    xi = np.array([0.01, 0.5, 3.0, 80.0])
    c = np.array([0.1, -0.4, 1.0, 0.0])
    vec = decay_kernel(xi, c)
    assert np.allclose(vec, [kernel_F(KernelArgs(x, y)) for x, y in zip(xi, c)], rtol=0, atol=0)


@pytest.mark.parametrize("xi", [0.0, -1.0, float("nan")])
def test_domain_error(xi):
    with pytest.raises(KernelDomainError):
        kernel_F(KernelArgs(xi, 0.0))
    with pytest.raises(KernelDomainError):
        kernel_G(KernelArgs(xi, 0.0))


def test_bad_cosine_rejected():
    with pytest.raises(ValueError):
        KernelArgs(1.0, 1.5)
