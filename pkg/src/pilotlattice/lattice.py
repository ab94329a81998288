"""Lattice pilot patterns, their diagonalization condition and the error lower bound.

A pilot lattice is ``{V p + r : p in Z^2}`` reduced modulo the ``M x N``
grid.  Its 2-D DFT is non-zero only on the reciprocal lattice
``{k : V^T (m~/M, n~/N) in Z^2}``, so whether the pattern makes the pilot
Gram matrix diagonal is a finite integer divisibility question.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterator

import numpy as np

from .covariance import ChannelProfile, GridConfig
from .estimator import NoiseDataStats, PilotPattern


class LatticeError(ValueError):
    """The sampling matrix does not define a pilot pattern on the grid."""


class ConsistencyError(RuntimeError):
    """Two independent feasibility checks disagreed."""


def _int_matrix(V) -> tuple[int, int, int, int]:
    arr = np.asarray(V)
    if arr.shape != (2, 2):
        raise ValueError("sampling matrix must be 2x2")
    if not np.all(arr == np.round(arr)):
        raise ValueError("sampling matrix must be integer")
    a1, b1, a2, b2 = (int(v) for v in arr.reshape(-1))
    return a1, b1, a2, b2


@dataclass(frozen=True)
class LatticeSpec:
    """Sampling matrix ``V = [a, b]`` (columns) and bias ``r = alpha a + beta b``."""

    V: tuple
    r_bias: tuple = (0, 0)

    def __post_init__(self):
        a1, b1, a2, b2 = _int_matrix(self.V)
        object.__setattr__(self, "V", ((a1, b1), (a2, b2)))
        if a1 * b2 - a2 * b1 == 0:
            raise ValueError("sampling matrix must be nonsingular")
        r = tuple(int(v) for v in self.r_bias)
        if len(r) != 2 or any(v != w for v, w in zip(r, self.r_bias)):
            raise ValueError("bias must be an integer 2-vector")
        object.__setattr__(self, "r_bias", r)
        al, be = self.bias_coefficients
        if not (0 <= al < 1 and 0 <= be < 1):
            raise ValueError(f"bias {r} is not alpha*a + beta*b with 0 <= alpha, beta < 1")
        if any((al * v).denominator != 1 for v in self.a) or any((be * v).denominator != 1 for v in self.b):
            raise ValueError(f"bias {r}: alpha*a and beta*b must be integer vectors")

    @property
    def a(self) -> tuple[int, int]:
        return (self.V[0][0], self.V[1][0])

    @property
    def b(self) -> tuple[int, int]:
        return (self.V[0][1], self.V[1][1])

    @property
    def det(self) -> int:
        return self.V[0][0] * self.V[1][1] - self.V[1][0] * self.V[0][1]

    @property
    def L(self) -> int:
        return abs(self.det)

    @property
    def bias_coefficients(self) -> tuple[Fraction, Fraction]:
        (a1, b1), (a2, b2) = self.V
        r1, r2 = self.r_bias
        d = self.det
        return Fraction(b2 * r1 - b1 * r2, d), Fraction(a1 * r2 - a2 * r1, d)

    def K(self, grid: GridConfig) -> int:
        return grid.size // self.L

    def contains(self, x: int, y: int) -> bool:
        """Whether the integer point ``(x, y)`` lies on the (unbiased) lattice."""
        (a1, b1), (a2, b2) = self.V
        d = self.det
        return (b2 * x - b1 * y) % d == 0 and (a1 * y - a2 * x) % d == 0

    def is_periodic(self, grid: GridConfig) -> bool:
        """Whether ``(M, 0)`` and ``(0, N)`` are lattice vectors (pattern tiles the grid)."""
        return self.contains(grid.M, 0) and self.contains(0, grid.N)

    def label(self) -> str:
        (a1, b1), (a2, b2) = self.V
        return f"V=[[{a1},{b1}],[{a2},{b2}]];r=({self.r_bias[0]},{self.r_bias[1]})"


def valid_biases(V) -> list[tuple[int, int]]:
    """All integer biases ``alpha a + beta b`` with ``alpha a``, ``beta b`` integer."""
    a1, b1, a2, b2 = _int_matrix(V)
    ga, gb = gcd(a1, a2), gcd(b1, b2)
    return sorted({(i * a1 // ga + j * b1 // gb, i * a2 // ga + j * b2 // gb) for i in range(ga) for j in range(gb)})


def hnf_matrices(L: int, max_entry: int | None = None) -> Iterator[tuple]:
    """Hermite normal forms ``[[d1, 0], [e, d2]]`` of determinant ``L``, one per sublattice.

    Columns are ``a = (d1, e)`` and ``b = (0, d2)``; adding multiples of ``b``
    to ``a`` shifts ``e`` by ``d2``, so ``0 <= e < d2`` is canonical.
    """
    for d1 in range(1, L + 1):
        if L % d1:
            continue
        d2 = L // d1
        for e in range(d2):
            if max_entry is not None and max(d1, d2, e) > max_entry:
                continue
            yield ((d1, 0), (e, d2))


@dataclass(frozen=True)
class FeasibilityRegion:
    """DFT offsets that must vanish: ``|m~| < r_tau - 1``, ``|n~| < r_nu - 1``.

    ``inclusive=True`` widens to ``<=``, which covers every index difference
    that appears in the pilot Gram matrix of ranks ``r_tau``, ``r_nu``.
    """

    r_tau: int
    r_nu: int
    inclusive: bool = False

    def __post_init__(self):
        for r in (self.r_tau, self.r_nu):
            if r < 1 or r % 2 == 0:
                raise ValueError("truncation ranks must be odd positive integers")

    def extent(self) -> tuple[int, int]:
        if self.inclusive:
            return self.r_tau - 1, self.r_nu - 1
        return max(self.r_tau - 2, 0), max(self.r_nu - 2, 0)

    def offsets(self) -> list[tuple[int, int]]:
        em, en = self.extent()
        return [(i, j) for i in range(-em, em + 1) for j in range(-en, en + 1)]

    def residues(self, grid: GridConfig) -> list[tuple[int, int, int, int]]:
        """``(m~, n~, m~ mod M, n~ mod N)`` for the non-origin offsets, deduplicated by residue."""
        seen = {(0, 0)}
        out = []
        for i, j in self.offsets():
            key = (i % grid.M, j % grid.N)
            if key in seen:
                continue
            seen.add(key)
            out.append((i, j, *key))
        return out


@dataclass
class ConditionResult:
    feasible: bool
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.feasible

    def offsets(self) -> set[tuple[int, int]]:
        return {(v[0], v[1]) for v in self.violations}


def mask_from_lattice(spec: LatticeSpec, grid: GridConfig, sigma_p2: float = 1.0) -> PilotPattern:
    """Pilot mask with ones at the ``K = MN / L`` grid residues of the lattice."""
    if grid.size % spec.L:
        raise LatticeError(f"|det V| = {spec.L} does not divide MN = {grid.size}")
    if not spec.is_periodic(grid):
        raise LatticeError(f"{spec.label()} is not periodic on the {grid.M}x{grid.N} grid")
    (a1, b1), (a2, b2) = spec.V
    d = spec.det
    m, n = np.meshgrid(np.arange(grid.M) - spec.r_bias[0], np.arange(grid.N) - spec.r_bias[1], indexing="ij")
    mask = ((b2 * m - b1 * n) % d == 0) & ((a1 * n - a2 * m) % d == 0)
    if mask.sum() != spec.K(grid):
        raise LatticeError(f"found {mask.sum()} residues, expected K = {spec.K(grid)}")
    return PilotPattern(mask.astype(np.int8), sigma_p2)


def mask_2dfft(pattern: PilotPattern) -> np.ndarray:
    """Unnormalized 2-D DFT ``sum_i exp(-j2π k~·m_i)`` of the pilot mask."""
    return np.fft.fft2(pattern.mask)


def check_condition_fft(pattern: PilotPattern, region: FeasibilityRegion) -> ConditionResult:
    """Diagonalization condition read off the mask spectrum."""
    spec = mask_2dfft(pattern)
    K = pattern.K
    tol = 1e-9 * max(K, 1)
    grid_shape = GridConfig(pattern.M, pattern.N, 1.0, 1.0)
    violations = []
    for i, j, mi, nj in region.residues(grid_shape):
        mag = abs(spec[mi, nj])
        if mag >= tol:
            violations.append((i, j, float(mag)))
    ok = K > 0 and abs(abs(spec[0, 0]) - K) < tol and not violations
    return ConditionResult(ok, violations)


def check_condition_analytic(spec: LatticeSpec, grid: GridConfig, region: FeasibilityRegion) -> ConditionResult:
    """Diagonalization condition as integer divisibility.

    ``(m~, n~)`` is on the reciprocal lattice iff ``V^T (m~/M, n~/N)`` is
    integer, i.e. ``a1 m~ N + a2 n~ M`` and ``b1 m~ N + b2 n~ M`` are both
    multiples of ``MN``.
    """
    (a1, b1), (a2, b2) = spec.V
    M, N = grid.M, grid.N
    MN = M * N
    K = spec.K(grid)
    violations = [
        (i, j, float(K))
        for i, j, _, _ in region.residues(grid)
        if (a1 * i * N + a2 * j * M) % MN == 0 and (b1 * i * N + b2 * j * M) % MN == 0
    ]
    return ConditionResult(not violations, violations)


def lower_bound(
    grid: GridConfig,
    profile: ChannelProfile,
    stats: NoiseDataStats,
    r_tau: int,
    r_nu: int,
    convention: str = "product",
) -> float:
    """Closed-form lower bound ``D / (TF/S0 + beta/(M sigma_n2))`` on the error trace.

    ``D`` is ``r_tau * r_nu`` (the number of retained eigenmodes) for
    ``convention="product"`` or ``r_tau + r_nu`` for ``convention="sum"``.
    ``stats.beta`` is the average pilot power budget.
    """
    D = _mode_count(r_tau, r_nu, convention)
    return D / _bound_denominator(grid, profile, stats)


def lower_bound_asymptotic(grid: GridConfig, profile: ChannelProfile, stats: NoiseDataStats) -> float:
    """Large-grid form ``MN TF Δ / (TF/S0 + beta/(M sigma_n2))`` of the bound."""
    D = grid.size * grid.TF * profile.spread
    return D / _bound_denominator(grid, profile, stats)


def _mode_count(r_tau: int, r_nu: int, convention: str) -> int:
    if convention == "product":
        return r_tau * r_nu
    if convention == "sum":
        return r_tau + r_nu
    raise ValueError(f"convention must be 'product' or 'sum', got {convention!r}")


def _bound_denominator(grid, profile, stats) -> float:
    beta = 0.0 if stats.beta is None else stats.beta
    return grid.TF / profile.S0 + beta / (grid.M * stats.sigma_n2)


def search_lattices(
    grid: GridConfig, L: int, region: FeasibilityRegion, max_entry: int | None = None
) -> list[LatticeSpec]:
    """Feasible sampling matrices of volume ``L`` in Hermite normal form.

    Each candidate passing the divisibility test is re-checked against the
    FFT of its mask; a disagreement raises :class:`ConsistencyError`.
    """
    if L < 1 or grid.size % L:
        raise ValueError(f"L = {L} must divide MN = {grid.size}")
    if max_entry is not None and max_entry < 1:
        raise ValueError("max_entry must be >= 1")
    found = []
    for V in hnf_matrices(L, max_entry):
        spec = LatticeSpec(V)
        if not spec.is_periodic(grid):
            continue
        analytic = check_condition_analytic(spec, grid, region)
        fft = check_condition_fft(mask_from_lattice(spec, grid), region)
        if analytic.feasible != fft.feasible:
            raise ConsistencyError(f"feasibility checks disagree for {spec.label()}")
        if analytic.feasible:
            found.append(spec)
    return sorted(found, key=lambda s: (s.V[0][0], s.V[1][0], s.V[1][1]))
