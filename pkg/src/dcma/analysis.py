"""MAI statistics, SIR/SINR and bit-error-probability models.

All amplitudes are normalized by the matched-cascade peak ``2 * delta_f``,
so a sampled MAI variance is directly an interference-to-signal ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import erfc

from .coding import CodeSet
from .errors import ConfigError, DomainError
from .sysconfig import SystemParams

RELIABLE_SAMPLES = 10_000


@dataclass(frozen=True, eq=False)
class MaiStats:
    mu_hat: float
    sigma_sq_hat: float
    histogram: tuple[np.ndarray, np.ndarray] = field(repr=False)
    n_samples: int

    @property
    def reliable(self) -> bool:
        """Enough samples for the moments to be reported."""
        return self.n_samples >= RELIABLE_SAMPLES

    def to_dict(self) -> dict:
        edges, counts = self.histogram
        return {
            "mu_hat": self.mu_hat,
            "sigma_sq_hat": self.sigma_sq_hat,
            "n_samples": self.n_samples,
            "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
        }


def mai_stats(samples, bins: int = 50) -> MaiStats:
    """Mean, population variance and histogram of normalized MAI samples."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("no MAI samples")
    counts, edges = np.histogram(x, bins=bins)
    return MaiStats(float(x.mean()), float(x.var()), (edges, counts), int(x.size))


def gaussian_pdf(x, mai: MaiStats):
    """Normal density fitted to the sampled MAI moments."""
    if mai.sigma_sq_hat <= 0:
        raise DomainError("zero MAI variance has no Gaussian fit")
    return stats.norm.pdf(x, loc=mai.mu_hat, scale=np.sqrt(mai.sigma_sq_hat))


def sir_statistical(mai) -> float:
    """SIR as the inverse of the normalized MAI variance.

    Accepts a :class:`MaiStats` or the variance itself.
    """
    var = mai.sigma_sq_hat if isinstance(mai, MaiStats) else float(mai)
    if var <= 0:
        raise DomainError("SIR undefined for zero MAI variance")
    return 1.0 / var


def sir_analytic(params: SystemParams, n_users: int | None = None,
                 alpha_mean_sq: float = 1.0) -> float:
    """Closed-form SIR ``4 dtau df / (alpha_mean_sq (N - 1))``."""
    n = params.n_users if n_users is None else n_users
    if int(n) != n or n < 2:
        raise ConfigError(f"analytic SIR needs N >= 2 users, got {n}")
    if alpha_mean_sq <= 0:
        raise ConfigError("alpha_mean_sq must be positive")
    return 4 * params.delta_tau * params.delta_f / (alpha_mean_sq * (n - 1))


def snr_from_sigma(params: SystemParams, noise_sigma: float | None = None) -> float:
    """SNR ``(2 delta_f / sigma_N)^2`` referenced to the matched peak; inf when noiseless."""
    s = params.noise_sigma if noise_sigma is None else noise_sigma
    if s < 0:
        raise ConfigError("noise sigma must be non-negative")
    return np.inf if s == 0 else float((2 * params.delta_f / s) ** 2)


def sigma_for_snr(params: SystemParams, snr: float) -> float:
    """Noise standard deviation giving the requested linear SNR."""
    if snr <= 0:
        raise ConfigError("SNR must be positive")
    return 0.0 if np.isinf(snr) else float(2 * params.delta_f / np.sqrt(snr))


def sinr(sir, snr=np.inf):
    """Harmonic combination ``1 / (1/SIR + 1/SNR)``."""
    sir = np.asarray(sir, dtype=float)
    snr = np.asarray(snr, dtype=float)
    if np.any(sir <= 0) or np.any(snr <= 0):
        raise DomainError("SIR and SNR must be positive")
    out = 1.0 / (1.0 / sir + 1.0 / snr)
    return float(out) if out.ndim == 0 else out


def q_function(x):
    """Standard normal upper tail, via ``erfc`` for accuracy deep in the tail."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class BepResult:
    per_receiver: np.ndarray = field(repr=False)
    average: float
    sir_i: np.ndarray = field(repr=False)
    sinr_i: np.ndarray = field(repr=False)
    snr: float

    def to_dict(self, eta: float | None = None) -> dict:
        d = {
            "sir": self.sir_i.tolist(),
            "sinr": self.sinr_i.tolist(),
            "snr": None if np.isinf(self.snr) else self.snr,
            "bep_i": self.per_receiver.tolist(),
            "bep_avg": self.average,
        }
        if eta is not None:
            d["eta"] = eta
        return d


def bep(sir_i, snr: float = np.inf) -> BepResult:
    """Per-receiver ``Q(sqrt(SINR_i) / 2)`` and its average over receivers."""
    sir_i = np.atleast_1d(np.asarray(sir_i, dtype=float))
    if sir_i.size == 0:
        raise ConfigError("need at least one receiver")
    s = np.atleast_1d(sinr(sir_i, snr))
    p = q_function(np.sqrt(s) / 2)
    p = np.atleast_1d(p)
    return BepResult(p, float(p.mean()), sir_i, s, float(snr))


def bep_analytic(params: SystemParams, n_users: int | None = None,
                 alpha_mean_sq: float = 1.0, snr: float = np.inf) -> float:
    """Average BEP with every receiver at the closed-form SIR."""
    n = params.n_users if n_users is None else n_users
    s = sir_analytic(params, n, alpha_mean_sq)
    return bep(np.full(n, s), snr).average


def snr_for_bep(target: float, sir: float) -> float:
    """Smallest linear SNR reaching ``target`` BEP at a given SIR; inf if unreachable."""
    if not 0 < target < 0.5:
        raise DomainError("target BEP must lie in (0, 0.5)")
    need = (2 * stats.norm.isf(target)) ** 2  # SINR that gives the target
    rest = 1.0 / need - 1.0 / sir
    return np.inf if rest <= 0 else float(1.0 / rest)


def spectral_efficiency(n_users: int, params: SystemParams) -> float:
    """Throughput per unit bandwidth ``N / (2 dtau df)``, in b/s/Hz."""
    if n_users < 1:
        raise ConfigError("n_users must be positive")
    return n_users / (2 * params.dsbp)


def db(x):
    return 10 * np.log10(x)


def from_db(x):
    return 10 ** (np.asarray(x, dtype=float) / 10)


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    p_value: float
    dof: int
    n_bins: int
    n_samples: int
    significance: float
    passed: bool
    forced_failure: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def normality_test(samples, n_bins: int = 50, significance: float = 0.01,
                   codes: CodeSet | None = None) -> NormalityResult:
    """Pearson chi-square test of the Gaussian MAI model.

    Bins have equal probability under the fitted normal, whose mean and
    standard deviation are estimated from the data (two degrees of freedom
    lost). Samples should be independent; heavily correlated waveform
    samples inflate the statistic. A code set holding +-1 always reports
    failure: its MAI concentrates on two discrete levels.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if n_bins < 50:
        raise ConfigError("use at least 50 bins")
    if x.size < 5 * n_bins:
        raise DomainError(f"need at least {5 * n_bins} samples for {n_bins} bins")
    sd = x.std()
    if sd == 0:
        raise DomainError("constant samples")
    inner = stats.norm.ppf(np.linspace(0, 1, n_bins + 1)[1:-1], x.mean(), sd)
    counts = np.bincount(np.searchsorted(inner, x), minlength=n_bins)
    expected = np.full(n_bins, x.size / n_bins)
    chi2, p = stats.chisquare(counts, expected, ddof=2)
    forced = codes is not None and codes.has_linear_code
    passed = bool(p >= significance) and not forced
    return NormalityResult(float(chi2), float(p), n_bins - 3, n_bins, int(x.size),
                           significance, passed, forced)
