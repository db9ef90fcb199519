"""Collective decay, cooperative Lamb shift and cascade emission in atomic clouds."""
from importlib.metadata import PackageNotFoundError, version

from .cls import (CutoffConfig, SpeciesData, cls_closed_form, cls_cutoff_integral,
                  cls_discrete_sum, cls_full_integral, crossing_radius, get_species,
                  infrared_cutoff, load_species)
from .dynamics import (DriveConfig, EmissionConfig, PulseShape, adiabatic_amplitudes,
                       idler_spectrum, phase_match_factor, signal_amplitude,
                       two_photon_amplitude)
from .geometry import (AtomCloud, CylinderSpec, GeometryFactors, bessel_j1, enhancement_mc,
                       mu_bar, mu_bar_k, sample_cylinder, structure_factor)
from .kernels import Averaging, KernelArgs, kernel_F, kernel_F_limit_zero, kernel_G
from .oracle import ModeGrid, ode_oracle
from .spectra import (CouplingMatrix, PhasedBasis, SpectralDecomposition, build_bare_matrix,
                      build_phased_basis, eigendecompose, symmetric_mode_decay_and_shift,
                      transform_matrix)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"
