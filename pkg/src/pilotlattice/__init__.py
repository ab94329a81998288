"""LMMSE pilot-pattern design for OFDM over doubly dispersive channels."""

from .covariance import (
    ChannelProfile,
    GridConfig,
    HermitianToeplitz,
    KroneckerCovariance,
    Profile,
    QuadratureSpec,
    TruncatedDFTFactor,
    assemble_covariance,
    build_factor_exact,
    build_factor_sinc,
    channel_covariance,
    dft_diagonalize,
    rel_fro_error,
    spectral_density,
    truncation_rank,
)
from .estimator import (
    ErrorReport,
    NoiseDataStats,
    PilotPattern,
    error_covariance_approx,
    error_covariance_exact,
    gram_matrix,
    lmmse_estimate,
)
from .lattice import (
    FeasibilityRegion,
    LatticeSpec,
    check_condition_analytic,
    check_condition_fft,
    lower_bound,
    mask_2dfft,
    mask_from_lattice,
    search_lattices,
)
from .montecarlo import SimConfig, empirical_mse, sample_channel, simulate_frame

__version__ = "0.1.0"
