"""Monte Carlo validation of LMMSE error predictions on the grid model ``y = x ⊙ g + n``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .covariance import HermitianToeplitz, KroneckerCovariance
from .estimator import NoiseDataStats, PilotPattern, error_covariance_exact, lmmse_filter


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``constellation`` is ``"ones"`` (all pilots ``sqrt(sigma_p2)``) or
    ``"random-phase"`` (unit-modulus phases drawn from ``seed``).
    """

    trials: int = 1000
    seed: int = 0
    constellation: str = "ones"
    report_interval: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.constellation not in ("ones", "random-phase"):
            raise ValueError(f"unknown constellation {self.constellation!r}")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial; depends only on ``(seed, trial)``."""
    return np.random.default_rng([seed, trial])


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    s = np.sqrt(var / 2)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def factor_sqrt(factor: HermitianToeplitz, rtol: float = 1e-10) -> np.ndarray:
    """Hermitian square root ``L`` with ``L L^H = A``; small negative eigenvalues are clipped."""
    w, Q = np.linalg.eigh(factor.dense())
    if w.min() < -rtol * abs(factor.gen[0].real):
        raise ValueError(f"covariance factor is not PSD (min eigenvalue {w.min():.3e})")
    return Q * np.sqrt(np.clip(w, 0.0, None))


def sample_channel(
    C_g: KroneckerCovariance, rng: np.random.Generator, roots: tuple | None = None
) -> np.ndarray:
    """Draw ``g ~ CN(0, C_g)`` as ``sqrt(scale) (L_nu ⊗ L_tau) w``."""
    L_nu, L_tau = roots if roots is not None else (factor_sqrt(C_g.doppler_factor), factor_sqrt(C_g.delay_factor))
    W = complex_normal(rng, (C_g.M, C_g.N))
    # (L_nu ⊗ L_tau) vec(W) = vec(L_tau W L_nu^T)
    G = np.sqrt(C_g.scale) * (L_tau @ W @ L_nu.T)
    return G.T.reshape(-1)


def pilot_symbols(pattern: PilotPattern, stats: NoiseDataStats, sim: SimConfig) -> np.ndarray:
    amp = np.sqrt(stats.pilot_power(pattern))
    if sim.constellation == "ones":
        return np.full(pattern.K, amp, dtype=complex)
    phase = np.random.default_rng([sim.seed, 2**32]).uniform(0, 2 * np.pi, pattern.K)
    return amp * np.exp(1j * phase)


def simulate_frame(
    pattern: PilotPattern,
    g: np.ndarray,
    stats: NoiseDataStats,
    rng: np.random.Generator,
    pilots: np.ndarray | None = None,
) -> np.ndarray:
    """``y[k] = x[k] g[k] + n[k]`` with known pilots and ``CN(0, sigma_d2)`` data."""
    g = np.asarray(g, dtype=complex).reshape(-1)
    if g.size != pattern.M * pattern.N:
        raise ValueError("channel vector length must be MN")
    if pilots is None:
        pilots = np.full(pattern.K, np.sqrt(stats.pilot_power(pattern)), dtype=complex)
    x = complex_normal(rng, g.size, stats.sigma_d2)
    x[pattern.pilot_indices] = pilots
    return x * g + complex_normal(rng, g.size, stats.sigma_n2)


@dataclass
class MSEResult:
    pattern_id: str
    K: int
    alpha_db: float
    trials: int
    empirical: float
    theoretical: float
    stderr: float
    seed: int

    @property
    def within(self) -> float:
        """Deviation in standard errors."""
        return abs(self.empirical - self.theoretical) / self.stderr if self.stderr > 0 else np.inf

    def to_record(self) -> dict:
        return asdict(self)


def empirical_mse(
    pattern: PilotPattern,
    C_g: KroneckerCovariance,
    stats: NoiseDataStats,
    sim: SimConfig,
    include_data_term: bool = False,
    pattern_id: str = "",
    progress=None,
) -> MSEResult:
    """Average ``||g - ĝ||^2`` over ``sim.trials`` frames against ``tr(C_e)``.

    ``progress`` (optional) is called as ``progress(done, total)`` every
    ``sim.report_interval`` trials.
    """
    pilots = pilot_symbols(pattern, stats, sim)
    W = lmmse_filter(pattern, pilots, C_g, stats)
    roots = (factor_sqrt(C_g.doppler_factor), factor_sqrt(C_g.delay_factor))
    p = pattern.pilot_indices
    errs = np.empty(sim.trials)
    for t in range(sim.trials):
        rng = trial_rng(sim.seed, t)
        g = sample_channel(C_g, rng, roots)
        y = simulate_frame(pattern, g, stats, rng, pilots)
        e = g - W @ y[p]
        errs[t] = np.vdot(e, e).real
        if progress is not None and sim.report_interval and (t + 1) % sim.report_interval == 0:
            progress(t + 1, sim.trials)
    theory = error_covariance_exact(pattern, C_g, stats, include_data_term, per_symbol=False).trace_mse
    stderr = errs.std(ddof=1) / np.sqrt(sim.trials) if sim.trials > 1 else np.inf
    return MSEResult(
        pattern_id=pattern_id,
        K=pattern.K,
        alpha_db=float(10 * np.log10(stats.alpha(pattern))),
        trials=sim.trials,
        empirical=float(errs.mean()),
        theoretical=float(theory),
        stderr=float(stderr),
        seed=sim.seed,
    )
