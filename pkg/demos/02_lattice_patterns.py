"""
Lattice pilot patterns and the diagonalization condition
========================================================

A pilot lattice ``{V p + r}`` makes the pilot Gram matrix diagonal when its
mask spectrum vanishes on a small rectangle around the origin.  We check
that two ways (FFT of the mask and integer divisibility), look at a passing
and a failing lattice, then enumerate all feasible lattices of volume 8.
"""

import numpy as np

from pilotlattice import GridConfig
from pilotlattice.lattice import (
    FeasibilityRegion,
    LatticeSpec,
    check_condition_analytic,
    check_condition_fft,
    mask_2dfft,
    mask_from_lattice,
    search_lattices,
)

grid = GridConfig(16, 8, 1.07, 1.0)
region = FeasibilityRegion(3, 3)

###############################################################################
# The diamond lattice: columns ``a = (2, 2)`` and ``b = (-2, 2)``.

diamond = LatticeSpec(((2, -2), (2, 2)))
p = mask_from_lattice(diamond, grid)
print(diamond.label(), "K =", p.K)
print("\n".join("".join("x" if v else "." for v in row) for row in p.mask.T))

# its spectrum is K on the reciprocal lattice and zero elsewhere
mag = np.abs(mask_2dfft(p))
print("distinct |C~| values:", sorted(set(np.round(mag, 9).ravel().tolist())))
print("analytic:", bool(check_condition_analytic(diamond, grid, region)), " fft:", bool(check_condition_fft(p, region)))

###############################################################################
# Pilots stacked in one column every 8 symbols fail: the spectrum has energy
# at ``(m~, n~) = (0, ±1)``.

column = LatticeSpec(((1, 0), (0, 8)))
res = check_condition_fft(mask_from_lattice(column, grid), region)
print(column.label(), "feasible:", res.feasible, "violations:", res.violations)

###############################################################################
# Exhaustive search over Hermite normal forms of determinant 8.  The
# inclusive rectangle is the one under which the Gram matrix is diagonal.

for inclusive in (False, True):
    found = search_lattices(grid, 8, FeasibilityRegion(3, 3, inclusive))
    print("inclusive" if inclusive else "strict   ", [s.V for s in found])
