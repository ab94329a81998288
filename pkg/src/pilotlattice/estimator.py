"""LMMSE channel estimation on the time-frequency grid and its error covariance.

Only pilot observations carry information about the channel: the data
symbols are zero-mean and independent of the channel, so the data block of
the observation covariance is diagonal and uncorrelated with ``g``.  All
solves are therefore restricted to the ``K x K`` pilot block, which is exact
(not an approximation) and lets the exact error trace be evaluated on large
grids without ever forming the ``MN x MN`` covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .covariance import KroneckerCovariance, TruncatedDFTFactor


@dataclass(frozen=True)
class PilotPattern:
    """Binary ``M x N`` pilot mask with per-pilot power ``sigma_p2``."""

    mask: np.ndarray
    sigma_p2: float = 1.0

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 2:
            raise ValueError("pilot mask must be a 2-D array")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("pilot mask must be binary")
        mask = mask.astype(np.int8)
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        if not self.sigma_p2 > 0:
            raise ValueError("sigma_p2 must be positive")

    @classmethod
    def from_indices(cls, indices, M: int, N: int, sigma_p2: float = 1.0) -> "PilotPattern":
        c = np.zeros(M * N, dtype=np.int8)
        c[np.asarray(indices, dtype=int)] = 1
        return cls(c.reshape(N, M).T, sigma_p2)

    @property
    def M(self) -> int:
        return self.mask.shape[0]

    @property
    def N(self) -> int:
        return self.mask.shape[1]

    @property
    def c_p(self) -> np.ndarray:
        return self.mask.flatten(order="F").astype(float)

    @property
    def c_d(self) -> np.ndarray:
        return 1.0 - self.c_p

    @property
    def pilot_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.flatten(order="F"))

    @property
    def data_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.flatten(order="F") == 0)

    @property
    def K(self) -> int:
        return int(self.mask.sum())

    def with_pilot(self, m: int, n: int) -> "PilotPattern":
        mask = np.array(self.mask)
        mask[m, n] = 1
        return PilotPattern(mask, self.sigma_p2)


@dataclass(frozen=True)
class NoiseDataStats:
    """Noise and data powers, plus an optional average pilot power budget ``beta``.

    When ``beta`` is set the power equality ``K * sigma_p2 = N * beta`` fixes
    the per-pilot power and overrides the pattern's own ``sigma_p2``.
    """

    sigma_n2: float
    sigma_d2: float = 0.0
    beta: float | None = None

    def __post_init__(self):
        if not self.sigma_n2 > 0:
            raise ValueError("sigma_n2 must be positive")
        if self.sigma_d2 < 0:
            raise ValueError("sigma_d2 must be non-negative")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")

    def pilot_power(self, pattern: PilotPattern) -> float:
        if self.beta is None or pattern.K == 0:
            return pattern.sigma_p2
        return pattern.N * self.beta / pattern.K

    def alpha(self, pattern: PilotPattern) -> float:
        """Pilot SNR ``sigma_p2 / sigma_n2``."""
        return self.pilot_power(pattern) / self.sigma_n2


@dataclass
class ErrorReport:
    trace_mse: float
    per_symbol_mse: np.ndarray | None = None
    full_C_e: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def hermitian_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``A X = B`` for Hermitian positive definite ``A``.

    Falls back to a diagonal jitter of ``1e-12 * trace / dim`` when the
    Cholesky factorization fails.
    """
    try:
        c = cho_factor(A, lower=True, check_finite=False)
    except LinAlgError:
        jitter = 1e-12 * abs(np.trace(A).real) / A.shape[0]
        try:
            c = cho_factor(A + jitter * np.eye(A.shape[0]), lower=True, check_finite=False)
        except LinAlgError as exc:
            raise LinAlgError("observation covariance is singular") from exc
    return cho_solve(c, B, check_finite=False)


def _pilot_block(C_g: KroneckerCovariance, pattern: PilotPattern):
    if (C_g.M, C_g.N) != (pattern.M, pattern.N):
        raise ValueError(
            f"covariance grid {C_g.M}x{C_g.N} does not match pattern grid {pattern.M}x{pattern.N}"
        )
    p = pattern.pilot_indices
    n, m = np.divmod(p, pattern.M)
    c_nu = C_g.doppler_factor.dense()
    c_tau = C_g.delay_factor.dense()
    block = C_g.scale * c_nu[np.ix_(n, n)] * c_tau[np.ix_(m, m)]
    return p, n, m, c_nu, c_tau, block


def lmmse_filter(
    pattern: PilotPattern, pilots, C_g: KroneckerCovariance, stats: NoiseDataStats
) -> np.ndarray:
    """``MN x K`` matrix mapping pilot observations ``y[I_p]`` to the channel estimate."""
    p, _, _, _, _, C_pp = _pilot_block(C_g, pattern)
    if p.size == 0:
        return np.zeros((C_g.size, 0), dtype=complex)
    x = np.asarray(pilots, dtype=complex).reshape(-1)
    if x.size != p.size:
        raise ValueError(f"expected {p.size} pilot values, got {x.size}")
    amp = np.sqrt(stats.pilot_power(pattern))
    if np.any(np.abs(np.abs(x) - amp) > 1e-9 * amp):
        raise ValueError("pilot symbols must have constant modulus sqrt(sigma_p2)")
    C_y = x[:, None] * C_pp * x.conj()[None, :] + stats.sigma_n2 * np.eye(p.size)
    C_gp = C_g.columns(p) * x.conj()[None, :]
    # W = C_gp C_y^{-1}, with C_y Hermitian
    return hermitian_solve(C_y, C_gp.conj().T).conj().T


def lmmse_estimate(
    y, pattern: PilotPattern, pilots, C_g: KroneckerCovariance, stats: NoiseDataStats
) -> np.ndarray:
    """LMMSE channel estimate from a received frame ``y`` (column-major, length MN).

    Equivalent to ``C_g B_p^H C_y^{-1} y`` with the full observation
    covariance (including the data-interference diagonal): the data block of
    ``C_y`` is diagonal and multiplied by zero columns of ``C_g B_p^H``.
    """
    y = np.asarray(y, dtype=complex).reshape(-1)
    if y.size != C_g.size:
        raise ValueError(f"y has length {y.size}, expected {C_g.size}")
    W = lmmse_filter(pattern, pilots, C_g, stats)
    return W @ y[pattern.pilot_indices]


def error_covariance_exact(
    pattern: PilotPattern,
    C_g: KroneckerCovariance,
    stats: NoiseDataStats,
    include_data_term: bool = False,
    per_symbol: bool = True,
    full: bool = False,
) -> ErrorReport:
    """Error covariance ``C_g - C_g B^H (B C_g B^H + C_n)^{-1} B C_g`` of the LMMSE estimate.

    The trace needs only ``K x K`` blocks of ``C_g`` and ``C_g^2`` (both
    Kronecker-structured).  ``include_data_term`` adds the diagonal data
    interference to the observation covariance; it only touches data rows,
    which the estimator never uses, so the result is identical either way.
    Pilot phases cancel, so only the pilot power enters.
    """
    p, n, m, c_nu, c_tau, C_pp = _pilot_block(C_g, pattern)
    prior_trace = C_g.trace()
    info = {"K": int(p.size), "include_data_term": include_data_term}
    if full and C_g.size > 4096:
        raise ValueError("full error covariance limited to MN <= 4096")
    if p.size == 0:
        diag = C_g.diagonal()
        return ErrorReport(
            prior_trace,
            diag if per_symbol else None,
            C_g.dense() if full else None,
            info,
        )

    Q = C_pp + (stats.sigma_n2 / stats.pilot_power(pattern)) * np.eye(p.size)
    sq = C_g.scale**2 * (c_nu @ c_nu)[np.ix_(n, n)] * (c_tau @ c_tau)[np.ix_(m, m)]
    trace = prior_trace - np.trace(hermitian_solve(Q, sq)).real

    diag = full_ce = None
    if per_symbol or full:
        cols = C_g.columns(p)
        if full:
            full_ce = C_g.dense() - cols @ hermitian_solve(Q, cols.conj().T)
            diag = np.diag(full_ce).real.copy()
        else:
            diag = np.empty(C_g.size)
            for start in range(0, C_g.size, 1024):
                block = cols[start : start + 1024]
                z = hermitian_solve(Q, block.conj().T)
                diag[start : start + 1024] = C_g.diagonal()[0] - np.einsum("ij,ji->i", block, z).real
    return ErrorReport(float(trace), diag if per_symbol else None, full_ce, info)


def gram_matrix(
    pattern: PilotPattern, dft_tau: TruncatedDFTFactor, dft_nu: TruncatedDFTFactor
) -> np.ndarray:
    """``U Diag(c_p) U^H`` for ``U = F_nu ⊗ F_tau``, read off the 2-D FFT of the mask.

    Entry ``(b + a r_tau, d + c r_tau)`` is ``Ĉ[(b-d) mod M, (a-c) mod N] / MN``
    with ``Ĉ = fft2(mask)``.
    """
    M, N = pattern.M, pattern.N
    spectrum = np.fft.fft2(pattern.mask) / (M * N)
    ft, fn = dft_tau.frequencies, dft_nu.frequencies
    dm = (ft[:, None] - ft[None, :]) % M
    dn = (fn[:, None] - fn[None, :]) % N
    G = spectrum[dm[None, :, None, :], dn[:, None, :, None]]
    r = dft_tau.rank * dft_nu.rank
    return G.reshape(r, r)


def error_covariance_approx(
    pattern: PilotPattern,
    dft_tau: TruncatedDFTFactor,
    dft_nu: TruncatedDFTFactor,
    gamma: float,
    stats: NoiseDataStats,
    per_symbol: bool = True,
) -> ErrorReport:
    """Error covariance under ``C_g ≈ gamma U^H Λ U``.

    ``C_e = U^H (Λ^{-1}/gamma + alpha U Diag(c_p) U^H)^{-1} U``, evaluated in
    the symmetric form ``D (I + alpha D G D)^{-1} D`` with ``D = sqrt(gamma Λ)``,
    which also covers zero eigenvalues.
    """
    lam = np.kron(dft_nu.eigenvalues, dft_tau.eigenvalues)
    if np.any(lam < 0) or gamma < 0:
        raise ValueError("eigenvalues and gamma must be non-negative")
    alpha = stats.alpha(pattern) if pattern.K else 0.0
    G = gram_matrix(pattern, dft_tau, dft_nu)
    d = np.sqrt(gamma * lam)
    inner = np.eye(lam.size) + alpha * d[:, None] * G * d[None, :]
    X = d[:, None] * hermitian_solve(inner, np.diag(d).astype(complex))
    trace = float(np.trace(X).real)
    diag = None
    if per_symbol:
        U = np.kron(dft_nu.basis, dft_tau.basis)
        diag = np.einsum("ki,kl,li->i", U.conj(), X, U).real
    return ErrorReport(trace, diag, None, {"alpha": alpha, "rank": lam.size})
