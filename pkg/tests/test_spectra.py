import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_cls.errors import EigenSolverError
from cascade_cls.geometry import AtomCloud, CylinderSpec, enhancement_mc, sample_cylinder
from cascade_cls.kernels import Averaging, decay_kernel, shift_kernel
from cascade_cls.spectra import (Basis, CouplingMatrix, build_bare_matrix, build_phased_basis,
                                 cross_coupling_ratio, decoupled_lambda_N, eigendecompose,
                                 f_coefficients, symmetric_mode_decay_and_shift,
                                 symmetric_vector, transform_matrix)


@pytest.fixture(scope="module")
def cloud300():
    spec = CylinderSpec.from_dimensionless(60.0, 6.0, n_atoms=300)
    return spec, sample_cylinder(spec, 11)


@given(st.integers(1, 60))
def test_f_rows_orthonormal(n):
    f = f_coefficients(n)
    assert np.allclose(f @ f.T, np.eye(n), atol=1e-12)
    sums = f.sum(axis=1)
    expect = np.zeros(n)
    expect[-1] = math.sqrt(n)
    assert np.allclose(sums, expect, atol=1e-12)


def test_f_rejects_empty():
    with pytest.raises(ValueError):
        f_coefficients(0)


def test_basis_algebra_at_300(cloud300):
    spec, cloud = cloud300
    kbar = (0.0, 0.0, spec.k3)
    basis = build_phased_basis(cloud, kbar)
    assert np.abs(basis.S @ basis.S.conj().T - np.eye(300)).max() < 1e-10
    M = build_bare_matrix(cloud, spec.k3)
    Abar = transform_matrix(M, basis)
    assert Abar.basis is Basis.PHASED
    wm = np.sort_complex(eigendecompose(M).eigenvalues)
    wa = np.sort_complex(eigendecompose(Abar).eigenvalues)
    assert np.abs(wm - wa).max() < 1e-8
    assert wa.sum() == pytest.approx(-300.0, abs=1e-8)
    assert np.trace(Abar.entries) == pytest.approx(-300.0, abs=1e-8)


def test_symmetric_state_is_last_phased_vector(cloud300):
    spec, cloud = cloud300
    kbar = (0.0, 0.0, spec.k3)
    basis = build_phased_basis(cloud, kbar)
    assert np.allclose(basis.S[-1], symmetric_vector(cloud, kbar))


def test_diagonal_element_is_mc_enhancement(cloud300):
    spec, cloud = cloud300
    kbar = (0.0, 0.0, spec.k3)
    Abar = transform_matrix(build_bare_matrix(cloud, spec.k3), build_phased_basis(cloud, kbar))
    lam = decoupled_lambda_N(Abar)
    assert -lam.real == pytest.approx(enhancement_mc(cloud, spec), rel=1e-10)
    rate, shift = symmetric_mode_decay_and_shift(Abar, gamma3=2.0)
    assert rate == pytest.approx(-2 * lam.real)
    assert shift == pytest.approx(lam.imag)
    assert cross_coupling_ratio(Abar) > 0


def test_bare_and_phased_selection_agree(cloud300):
    spec, cloud = cloud300
    kbar = (0.0, 0.0, spec.k3)
    M = build_bare_matrix(cloud, spec.k3)
    Abar = transform_matrix(M, build_phased_basis(cloud, kbar))
    lam_bare = eigendecompose(M, target=symmetric_vector(cloud, kbar)).lambda_N
    lam_phased = eigendecompose(Abar).lambda_N
    assert lam_bare == pytest.approx(lam_phased, abs=1e-8)


@given(st.floats(0.3, 30.0), st.floats(-1.0, 1.0))
def test_two_atoms_closed_form(xi, cz):
    k3 = 1.0
    sz = math.sqrt(1 - cz * cz)
    cloud = AtomCloud(np.array([[0, 0, 0], [xi * sz, 0, xi * cz]]))
    M = build_bare_matrix(cloud, k3)
    F = float(decay_kernel(xi, cz, Averaging.CIRCULAR))
    G = float(shift_kernel(xi, cz, Averaging.CIRCULAR))
    w = eigendecompose(M).eigenvalues
    expect = np.array([-(1 + F + 2j * G), -(1 - F - 2j * G)])
    assert np.allclose(np.sort_complex(w), np.sort_complex(expect), atol=1e-12)
    # Without phases the symmetric pair state is an exact eigenvector.
    d = eigendecompose(M, target=symmetric_vector(cloud, (0, 0, 0)))
    assert d.lambda_N == pytest.approx(expect[0], abs=1e-12)


def test_bare_matrix_is_symmetric(cloud300):
    spec, cloud = cloud300
    A = build_bare_matrix(cloud, spec.k3).entries
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == -1)


def test_fixed_orientation_differs_from_circular():
    cloud = AtomCloud(np.array([[0, 0, 0], [0.5, 0, 0.5]]))
    a = build_bare_matrix(cloud, 1.0, orientation=(1, 0, 0), averaging=Averaging.FIXED_ORIENTATION)
    b = build_bare_matrix(cloud, 1.0)
    assert not np.allclose(a.entries, b.entries)


def test_size_cap():
    cloud = AtomCloud(np.arange(30).reshape(10, 3))
    with pytest.raises(MemoryError):
        build_bare_matrix(cloud, 1.0, max_atoms=5)


def test_defective_matrix_rejected():
    jordan = CouplingMatrix(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), Basis.BARE)
    with pytest.raises(EigenSolverError) as info:
        eigendecompose(jordan)
    assert info.value.condition is None or info.value.condition > 1e13


def test_non_finite_rejected():
    bad = CouplingMatrix(np.array([[np.nan, 0], [0, 1]], dtype=complex), Basis.BARE)
    with pytest.raises(EigenSolverError):
        eigendecompose(bad)


def test_transform_checks():
    cloud = AtomCloud(np.zeros((2, 3)) + [[0, 0, 0], [0, 0, 1]])
    basis = build_phased_basis(cloud, (0, 0, 1))
    M = build_bare_matrix(cloud, 1.0)
    Abar = transform_matrix(M, basis)
    with pytest.raises(ValueError):
        transform_matrix(Abar, basis)
    with pytest.raises(ValueError):
        decoupled_lambda_N(M)
    with pytest.raises(ValueError):
        build_phased_basis(AtomCloud(np.zeros((1, 3))), (0, 0, 1))


def test_decay_and_shift_from_scalar():
    assert symmetric_mode_decay_and_shift(-3 + 0.5j, gamma3=4.0) == (12.0, 1.0)
