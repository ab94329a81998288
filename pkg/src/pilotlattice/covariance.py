"""Delay/Doppler covariance factors, their Kronecker assembly and DFT diagonalization.

The channel covariance of a time-frequency grid with a separable scattering
function is the Kronecker product of a Doppler-domain and a delay-domain
Hermitian Toeplitz matrix.  This module builds those factors either by direct
quadrature of the power profiles or by the constant-profile (sinc)
approximation, and approximates each factor by a truncated DFT eigenbasis
whose eigenvalues are samples of the rectangular spectral density.

Vectorization is column-major throughout: grid position ``(m, n)`` (subcarrier
``m``, symbol ``n``) maps to the flat index ``k = n * M + m``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import roots_legendre

Domain = Literal["delay", "doppler"]

#: Largest number of rows a Kronecker covariance will materialize by default.
DEFAULT_MATERIALIZATION_CAP = 2**16


class CapacityError(ValueError):
    """Dense materialization requested beyond the configured row cap."""


class ProfileEvaluationError(ValueError):
    """A power profile returned a non-finite value."""


@dataclass(frozen=True)
class GridConfig:
    """Time-frequency grid: ``M`` subcarriers spaced ``F`` Hz, ``N`` symbols of ``T`` s."""

    M: int
    N: int
    T: float
    F: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (self.T > 0 and self.F > 0):
            raise ValueError("T and F must be positive")
        # 1e-12 slack so that TF = 1 given as e.g. T = 1/F survives rounding
        if self.T * self.F < 1.0 - 1e-12:
            raise ValueError(f"TF = {self.T * self.F:g} < 1 is not a valid OFDM grid")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))

    @property
    def TF(self) -> float:
        return self.T * self.F

    @property
    def size(self) -> int:
        return self.M * self.N


@dataclass(frozen=True)
class Profile:
    """One-dimensional power profile on a symmetric support ``[-h, h]``.

    Parameters
    ----------
    shape : {"rectangular", "triangular", "tabulated"}
    peak : float
        Value at the origin for the named shapes.
    width : float, optional
        Triangular only: distance from the origin to the zero of the
        triangle.  Defaults to the support half-width ``h`` so the triangle
        vanishes at the support edges.  A width larger than ``h`` gives a
        slowly varying profile (the triangle is cut off by the support).
    nodes, values : sequence of float, optional
        Tabulated only: abscissae (strictly increasing, covering the support)
        and profile samples, linearly interpolated.
    """

    shape: str = "rectangular"
    peak: float = 1.0
    width: float | None = None
    nodes: tuple | None = None
    values: tuple | None = None

    def __post_init__(self):
        if self.shape not in ("rectangular", "triangular", "tabulated"):
            raise ValueError(f"unknown profile shape {self.shape!r}")
        if self.shape == "tabulated":
            if self.nodes is None or self.values is None:
                raise ValueError("tabulated profile needs nodes and values")
            nodes = tuple(float(v) for v in self.nodes)
            values = tuple(float(v) for v in self.values)
            if len(nodes) != len(values) or len(nodes) < 2:
                raise ValueError("nodes and values must have equal length >= 2")
            if np.any(np.diff(nodes) <= 0):
                raise ValueError("tabulated nodes must be strictly increasing")
            object.__setattr__(self, "nodes", nodes)
            object.__setattr__(self, "values", values)
        elif self.peak <= 0:
            raise ValueError("profile peak must be positive")
        if self.width is not None and self.width <= 0:
            raise ValueError("triangular width must be positive")

    @classmethod
    def tabulated(cls, nodes: Sequence[float], values: Sequence[float]) -> "Profile":
        return cls(shape="tabulated", nodes=tuple(nodes), values=tuple(values))

    def __call__(self, x, half: float) -> np.ndarray:
        """Evaluate on ``x``; zero outside ``[-half, half]``."""
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= half
        if self.shape == "rectangular":
            out = np.full(x.shape, float(self.peak))
        elif self.shape == "triangular":
            w = half if self.width is None else self.width
            out = self.peak * np.clip(1.0 - np.abs(x) / w, 0.0, None)
        else:
            out = np.interp(x, self.nodes, self.values)
        return np.where(inside, out, 0.0)

    def at_zero(self, half: float) -> float:
        return float(self(0.0, half))

    def breakpoints(self, half: float) -> list[float]:
        """Points in ``(-half, half)`` where the profile is not smooth."""
        if self.shape == "rectangular":
            pts: list[float] = []
        elif self.shape == "triangular":
            w = half if self.width is None else self.width
            pts = [0.0, -w, w]
        else:
            pts = list(self.nodes)
        return sorted(p for p in set(pts) if -half < p < half)


@dataclass(frozen=True)
class ChannelProfile:
    """Separable scattering function ``P_tau(tau) * P_nu(nu)`` on a rectangle.

    ``S0`` is derived as ``P_tau(0) * P_nu(0)``.  Use :meth:`rectangular` for
    the constant scattering function of amplitude ``S0``.
    """

    tau_D: float
    nu_D: float
    delay: Profile = field(default_factory=Profile)
    doppler: Profile = field(default_factory=Profile)

    def __post_init__(self):
        if not (self.tau_D > 0 and self.nu_D > 0):
            raise ValueError("tau_D and nu_D must be positive")
        spread = self.tau_D * self.nu_D
        if spread >= 1:
            raise ValueError(f"spread factor tau_D*nu_D = {spread:g} must be < 1")
        if spread > 0.1:
            warnings.warn(
                f"spread factor {spread:g} > 0.1; the ISI/ICI-free grid model "
                "assumes tau_D*nu_D << 1",
                RuntimeWarning,
                stacklevel=3,
            )

    @classmethod
    def rectangular(cls, tau_D: float, nu_D: float, S0: float = 1.0) -> "ChannelProfile":
        return cls(tau_D, nu_D, Profile("rectangular", peak=S0), Profile("rectangular"))

    @property
    def spread(self) -> float:
        return self.tau_D * self.nu_D

    @property
    def S0(self) -> float:
        return self.delay.at_zero(self.tau_D / 2) * self.doppler.at_zero(self.nu_D / 2)

    @property
    def gamma(self) -> float:
        """Covariance scale ``S0 * tau_D * nu_D``."""
        return self.S0 * self.spread


def _domain(profile: ChannelProfile, grid: GridConfig, domain: Domain):
    """(dim, step, spread, profile, exponent sign) for one domain."""
    if domain == "delay":
        return grid.M, grid.F, profile.tau_D, profile.delay, -1.0
    if domain == "doppler":
        return grid.N, grid.T, profile.nu_D, profile.doppler, 1.0
    raise ValueError(f"domain must be 'delay' or 'doppler', got {domain!r}")


@dataclass(frozen=True)
class HermitianToeplitz:
    """Hermitian Toeplitz matrix ``A[i, j] = gen[i - j]`` stored by its first column."""

    gen: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        gen = np.atleast_1d(np.asarray(self.gen, dtype=complex)).copy()
        if gen.ndim != 1 or gen.size == 0:
            raise ValueError("generating sequence must be a non-empty vector")
        if abs(gen[0].imag) > 1e-12 * max(abs(gen[0].real), 1e-300):
            raise ValueError("gen[0] of a Hermitian Toeplitz matrix must be real")
        gen[0] = gen[0].real
        gen.flags.writeable = False
        object.__setattr__(self, "gen", gen)

    @property
    def dim(self) -> int:
        return self.gen.size

    def dense(self) -> np.ndarray:
        return toeplitz(self.gen, self.gen.conj())

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.dense())

    def is_psd(self, rtol: float = 1e-10) -> bool:
        eps = rtol * abs(self.gen[0].real)
        return bool(self.eigenvalues().min() >= -eps)


@dataclass(frozen=True)
class KroneckerCovariance:
    """Lazy ``scale * (doppler ⊗ delay)`` channel covariance of size ``MN x MN``."""

    doppler_factor: HermitianToeplitz
    delay_factor: HermitianToeplitz
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale >= 0:
            raise ValueError("scale must be non-negative")

    @property
    def M(self) -> int:
        return self.delay_factor.dim

    @property
    def N(self) -> int:
        return self.doppler_factor.dim

    @property
    def size(self) -> int:
        return self.M * self.N

    def element(self, k: int, l: int) -> complex:
        n1, m1 = divmod(k, self.M)
        n2, m2 = divmod(l, self.M)
        return self.scale * _toeplitz_entry(self.doppler_factor.gen, n1, n2) * _toeplitz_entry(
            self.delay_factor.gen, m1, m2
        )

    def dense(self, cap: int = DEFAULT_MATERIALIZATION_CAP) -> np.ndarray:
        if self.size > cap:
            raise CapacityError(f"{self.size} rows exceeds materialization cap {cap}")
        return self.scale * np.kron(self.doppler_factor.dense(), self.delay_factor.dense())

    def diagonal(self) -> np.ndarray:
        d = self.scale * self.doppler_factor.gen[0].real * self.delay_factor.gen[0].real
        return np.full(self.size, d)

    def trace(self) -> float:
        return float(self.diagonal().sum())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        X = np.asarray(x).reshape(self.N, self.M).T
        Y = self.delay_factor.dense() @ X @ self.doppler_factor.dense().T
        return self.scale * Y.T.reshape(-1)

    def columns(self, idx: np.ndarray) -> np.ndarray:
        """Columns ``C[:, idx]`` as an ``MN x len(idx)`` array."""
        n, m = np.divmod(np.asarray(idx, dtype=int), self.M)
        cn = self.doppler_factor.dense()[:, n]
        cm = self.delay_factor.dense()[:, m]
        return self.scale * np.einsum("aj,bj->abj", cn, cm).reshape(self.size, len(n))


def _toeplitz_entry(gen: np.ndarray, i: int, j: int) -> complex:
    return gen[i - j] if i >= j else np.conj(gen[j - i])


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre node doubling: start at ``n_start`` nodes per panel."""

    n_start: int = 8
    rtol: float = 1e-8
    max_nodes: int = 2**14

    def __post_init__(self):
        if self.n_start < 8:
            raise ValueError("quadrature needs at least 8 nodes")


@lru_cache(maxsize=32)
def _gauss_legendre(n: int):
    x, w = roots_legendre(n)
    return x, w


def _integrate_panels(func, edges: Sequence[float], n: int) -> np.ndarray:
    x0, w0 = _gauss_legendre(n)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        total = total + func(half * x0 + 0.5 * (a + b), half * w0)
    return total


def build_factor_exact(
    profile: ChannelProfile,
    grid: GridConfig,
    domain: Domain,
    quad: QuadratureSpec = QuadratureSpec(),
) -> HermitianToeplitz:
    """Toeplitz factor from the profile integral ``∫ P(x) exp(∓j2πkSx) dx``.

    The support is split at the profile's kinks and each panel is integrated
    with Gauss-Legendre nodes, doubling until the generating sequence changes
    by less than ``quad.rtol`` (relative 2-norm).  Non-convergence is reported
    in ``info`` and as a ``RuntimeWarning``.
    """
    dim, step, spread, shape, sign = _domain(profile, grid, domain)
    h = spread / 2
    edges = [-h, *shape.breakpoints(h), h]
    k = np.arange(dim)

    def panel(x, w):
        p = shape(x, h)
        if not np.all(np.isfinite(p)):
            raise ProfileEvaluationError(f"non-finite {domain} profile value")
        return np.exp(sign * 2j * np.pi * step * np.outer(k, x)) @ (w * p)

    n = quad.n_start
    prev = _integrate_panels(panel, edges, n)
    change = np.inf
    while n < quad.max_nodes:
        n *= 2
        cur = _integrate_panels(panel, edges, n)
        norm = np.linalg.norm(cur)
        change = np.linalg.norm(cur - prev) / norm if norm > 0 else 0.0
        prev = cur
        if change < quad.rtol:
            break
    converged = bool(change < quad.rtol)
    if not converged:
        warnings.warn(
            f"{domain} quadrature not converged at {n} nodes (change {change:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return HermitianToeplitz(prev, info={"nodes": n, "rel_change": float(change), "converged": converged})


def build_factor_sinc(
    profile: ChannelProfile, grid: GridConfig, domain: Domain, normalized: bool = False
) -> HermitianToeplitz:
    """Constant-profile factor ``P(0) * spread * sinc(k * S * spread)``.

    With ``normalized=True`` the amplitude ``P(0) * spread`` is dropped,
    giving the unit-diagonal sinc matrix.
    """
    dim, step, spread, shape, _ = _domain(profile, grid, domain)
    amp = 1.0 if normalized else shape.at_zero(spread / 2) * spread
    return HermitianToeplitz(amp * np.sinc(np.arange(dim) * step * spread))


def assemble_covariance(
    c_nu: HermitianToeplitz, c_tau: HermitianToeplitz, scale: float = 1.0
) -> KroneckerCovariance:
    return KroneckerCovariance(c_nu, c_tau, float(scale))


def channel_covariance(
    profile: ChannelProfile,
    grid: GridConfig,
    method: Literal["sinc", "exact"] = "sinc",
    quad: QuadratureSpec = QuadratureSpec(),
) -> KroneckerCovariance:
    """Full channel covariance.

    ``"sinc"`` gives ``gamma * (S_nu ⊗ S_tau)`` with unit-diagonal sinc factors;
    ``"exact"`` integrates the profiles and uses unit scale.
    """
    if method == "sinc":
        return assemble_covariance(
            build_factor_sinc(profile, grid, "doppler", normalized=True),
            build_factor_sinc(profile, grid, "delay", normalized=True),
            profile.gamma,
        )
    if method == "exact":
        return assemble_covariance(
            build_factor_exact(profile, grid, "doppler", quad),
            build_factor_exact(profile, grid, "delay", quad),
        )
    raise ValueError(f"unknown covariance method {method!r}")


def _rect(u):
    # boundary |u| = 1/2 counts as inside; slack absorbs rounding of 2πk/dim
    return (np.abs(u) <= 0.5 * (1 + 1e-12)).astype(float)


def spectral_density(
    profile: ChannelProfile,
    grid: GridConfig,
    domain: Domain,
    omega,
    normalized: bool = True,
):
    """DTFT of the sinc generating sequence, ``rect(ω / (2πSx)) / (Sx)``.

    ``Sx`` is ``F * tau_D`` (delay) or ``T * nu_D`` (doppler) and must not
    exceed 1 for the closed form to hold.  ``normalized=False`` multiplies by
    the amplitude ``P(0) * spread``.
    """
    _, step, spread, shape, _ = _domain(profile, grid, domain)
    omega = np.asarray(omega, dtype=float)
    if np.any(np.abs(omega) > np.pi * (1 + 1e-12)):
        raise ValueError("omega must lie in [-pi, pi]")
    x = step * spread
    f = _rect(omega / (2 * np.pi * x)) / x
    if not normalized:
        f = f * shape.at_zero(spread / 2) * spread
    return f if f.ndim else float(f)


def truncation_rank(dim: int, product: float) -> int:
    """Odd truncation rank ``ceil(product)``, bumped up when even.

    ``product`` is ``dim * S * spread``.  Ranks beyond ``dim`` are clamped to
    the largest odd integer not above ``dim`` with a warning.
    """
    if product <= 0:
        raise ValueError("product must be positive")
    # 1e-9 slack: 16 * (3/16) must give 3, not 4
    r = max(1, math.ceil(product - 1e-9))
    if r % 2 == 0:
        r += 1
    if r > dim:
        r = dim if dim % 2 else dim - 1
        warnings.warn(f"truncation rank clamped to {r} (full-rank regime)", RuntimeWarning, stacklevel=2)
    return r


@dataclass(frozen=True)
class TruncatedDFTFactor:
    """``rank`` normalized DFT rows with centred frequencies and their eigenvalues."""

    dim: int
    rank: int
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.rank) - (self.rank - 1) // 2

    def reconstruct(self) -> np.ndarray:
        return self.basis.conj().T @ (self.eigenvalues[:, None] * self.basis)


def dft_basis(dim: int, rank: int) -> np.ndarray:
    """Rows ``exp(-j2πkm/dim)/sqrt(dim)`` for ``k = (1-rank)/2 .. (rank-1)/2``."""
    if rank % 2 == 0 or not 1 <= rank <= dim:
        raise ValueError(f"rank must be odd and in [1, {dim}], got {rank}")
    k = np.arange(rank) - (rank - 1) // 2
    return np.exp(-2j * np.pi * np.outer(k, np.arange(dim)) / dim) / np.sqrt(dim)


def dft_diagonalize(
    factor: HermitianToeplitz,
    rank: int,
    profile: ChannelProfile,
    grid: GridConfig,
    domain: Domain,
) -> TruncatedDFTFactor:
    """Truncated DFT approximation ``F^H Λ F`` of a unit-diagonal sinc factor."""
    dim = _domain(profile, grid, domain)[0]
    if factor.dim != dim:
        raise ValueError(f"factor has dimension {factor.dim}, grid {domain} dimension is {dim}")
    basis = dft_basis(dim, rank)
    k = np.arange(rank) - (rank - 1) // 2
    lam = np.asarray(spectral_density(profile, grid, domain, 2 * np.pi * k / dim), dtype=float)
    return TruncatedDFTFactor(dim, rank, basis, lam)


def rel_fro_error(A, A_approx) -> float:
    """``||A - A_approx||_F / ||A||_F``."""
    A = np.asarray(A)
    A_approx = np.asarray(A_approx)
    if A.shape != A_approx.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {A_approx.shape}")
    ref = np.linalg.norm(A)
    if ref == 0:
        raise ValueError("relative error undefined for a zero reference matrix")
    return float(np.linalg.norm(A - A_approx) / ref)


def kron_rel_fro_error(a_nu, a_tau, b_nu, b_tau) -> float:
    """Relative F-norm error between ``a_nu ⊗ a_tau`` and ``b_nu ⊗ b_tau``.

    Uses ``<A⊗B, C⊗D> = <A, C><B, D>`` so nothing of size ``MN x MN`` is
    formed.  The difference is written as ``A⊗F + E⊗D`` with ``E = A - C``,
    ``F = B - D`` so small errors do not cancel catastrophically.
    """
    a_nu, a_tau, b_nu, b_tau = (np.asarray(x) for x in (a_nu, a_tau, b_nu, b_tau))
    ref = np.vdot(a_nu, a_nu).real * np.vdot(a_tau, a_tau).real
    if ref == 0:
        raise ValueError("relative error undefined for a zero reference matrix")
    e, f = a_nu - b_nu, a_tau - b_tau
    sq = (
        np.vdot(a_nu, a_nu).real * np.vdot(f, f).real
        + np.vdot(e, e).real * np.vdot(b_tau, b_tau).real
        + 2 * (np.vdot(a_nu, e) * np.vdot(f, b_tau)).real
    )
    return float(np.sqrt(max(sq, 0.0) / ref))


def diagonalization_error(dim: int, product: float) -> float:
    """Relative F-norm error of the truncated DFT approximation of ``sinc(k*x)``.

    ``product`` is ``dim * x``; the grid is synthesised as a delay domain with
    ``F = 1`` and ``tau_D = product / dim``.
    """
    x = product / dim
    grid = GridConfig(dim, 1, 1.0, 1.0)
    # Doppler spread is irrelevant here; keep the profile spread tiny
    prof = ChannelProfile.rectangular(x, 1e-6)
    s = build_factor_sinc(prof, grid, "delay", normalized=True)
    approx = dft_diagonalize(s, truncation_rank(dim, product), prof, grid, "delay")
    return rel_fro_error(s.dense(), approx.reconstruct())


def integration_error(
    profile: ChannelProfile, grid: GridConfig, quad: QuadratureSpec = QuadratureSpec()
) -> float:
    """Relative F-norm error of the constant-profile covariance against quadrature."""
    exact_nu = build_factor_exact(profile, grid, "doppler", quad).dense()
    exact_tau = build_factor_exact(profile, grid, "delay", quad).dense()
    sinc_nu = build_factor_sinc(profile, grid, "doppler").dense()
    sinc_tau = build_factor_sinc(profile, grid, "delay").dense()
    return kron_rel_fro_error(exact_nu, exact_tau, sinc_nu, sinc_tau)
