"""
Structured channel covariance and its DFT approximation
=======================================================

The WSSUS channel on an ``M x N`` OFDM grid has a Kronecker covariance
``C_g = gamma (C_nu ⊗ C_tau)`` whose factors are Hermitian Toeplitz.  This
walk-through builds the factors two ways (closed-form sinc and quadrature),
then looks at how well a truncated DFT basis diagonalizes them.
"""

import warnings

import numpy as np

from pilotlattice import ChannelProfile, GridConfig, Profile
from pilotlattice.covariance import (
    build_factor_exact,
    build_factor_sinc,
    channel_covariance,
    dft_diagonalize,
    diagonalization_error,
    integration_error,
    truncation_rank,
)

###############################################################################
# A small grid: 16 subcarriers, 8 symbols, TF = 1.07.  Spreads are chosen so
# that ``M F tau_D = N T nu_D = 2.5``.

grid = GridConfig(16, 8, T=1.07, F=1.0)
profile = ChannelProfile.rectangular(2.5 / 16, 2.5 / (8 * 1.07))
C = channel_covariance(profile, grid)
print("gamma =", profile.gamma, " trace(C_g) =", C.trace())

# element (k, l) with k = n M + m, without materializing MN x MN
print("C_g[0, 1] =", C.element(0, 1), " C_g[0, 16] =", C.element(0, 16))

###############################################################################
# For a rectangular scattering function the sinc factor is exact, so the
# quadrature route agrees to rounding.

exact = build_factor_exact(profile, grid, "delay")
sinc = build_factor_sinc(profile, grid, "delay")
print("max |exact - sinc| (delay) =", np.max(np.abs(exact.gen - sinc.gen)), "nodes =", exact.info["nodes"])

###############################################################################
# A triangular delay profile is not exact under sinc.  The relative Kronecker
# error grows with the spread factor.

g2 = GridConfig(64, 32, 1.07, 1.0)
for delta in (1e-4, 1e-3, 1e-2):
    tau, nu = np.sqrt(delta * g2.T / g2.F), np.sqrt(delta * g2.F / g2.T)
    tri = ChannelProfile(tau, nu, Profile("triangular", width=1 / g2.F), Profile("triangular", width=1 / g2.T))
    print(f"Delta_D = {delta:g}: triangular error {integration_error(tri, g2):.4g}")

###############################################################################
# Truncated DFT diagonalization keeps ``r = ceil(dim * F tau_D)`` (odd)
# frequencies.  The error shrinks as the dimension grows at fixed F tau_D.

with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    for dim in (32, 64, 128, 256, 512):
        print(f"dim {dim:4d}: rel F-norm error {diagonalization_error(dim, dim / 16):.4f}")

r = truncation_rank(16, 2.5)
d = dft_diagonalize(build_factor_sinc(profile, grid, "delay", normalized=True), r, profile, grid, "delay")
print("rank", r, "frequencies", d.frequencies.tolist(), "eigenvalues", d.eigenvalues)
