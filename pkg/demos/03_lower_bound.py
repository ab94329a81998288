"""
The error lower bound and when a lattice reaches it
===================================================

Under the DFT approximation the error trace is at least
``D / (TF/S0 + beta/(M sigma_n2))`` with ``D = r_tau r_nu``.  Feasible
lattices reach it exactly, whatever their pilot count.
"""

import numpy as np

from pilotlattice import ChannelProfile, GridConfig, NoiseDataStats, PilotPattern
from pilotlattice.covariance import build_factor_sinc, dft_diagonalize
from pilotlattice.estimator import error_covariance_approx
from pilotlattice.lattice import FeasibilityRegion, lower_bound, mask_from_lattice, search_lattices

grid = GridConfig(16, 8, 1.07, 1.0)
profile = ChannelProfile.rectangular(2.5 / 16, 2.5 / (8 * 1.07))
dt = dft_diagonalize(build_factor_sinc(profile, grid, "delay", normalized=True), 3, profile, grid, "delay")
dn = dft_diagonalize(build_factor_sinc(profile, grid, "doppler", normalized=True), 3, profile, grid, "doppler")
stats = NoiseDataStats(1.0, beta=1.0)  # fixed average pilot power per symbol

bound = lower_bound(grid, profile, stats, 3, 3)
print("bound (product count):", bound)
print("bound (sum count):    ", lower_bound(grid, profile, stats, 3, 3, convention="sum"))

###############################################################################
# Every feasible lattice with L in {2, 4, 8} lands on the bound.  Pilot power
# scales as N beta / K, so fewer pilots are individually stronger.

region = FeasibilityRegion(3, 3, inclusive=True)
for L in (2, 4, 8):
    for spec in search_lattices(grid, L, region):
        p = mask_from_lattice(spec, grid)
        tr = error_covariance_approx(p, dt, dn, profile.gamma, stats, per_symbol=False).trace_mse
        print(f"{spec.label():28s} K={p.K:3d} trace={tr:.12f}")

###############################################################################
# Random masks with the same pilot count sit above it.

rng = np.random.default_rng(0)
traces = []
for _ in range(200):
    flat = np.zeros(128, dtype=np.int8)
    flat[rng.choice(128, 16, replace=False)] = 1
    p = PilotPattern(flat.reshape(16, 8))
    traces.append(error_covariance_approx(p, dt, dn, profile.gamma, stats, per_symbol=False).trace_mse)
print(f"random K=16 masks: min {min(traces):.4f}  median {np.median(traces):.4f}  (bound {bound:.4f})")
