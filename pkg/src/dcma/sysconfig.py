"""System parameters, frequency grid and time window.

Every other module computes on the axes defined here. Spectra are one-sided
(analytic-signal convention): the grid spans ``[0, fs)`` and only bins inside
the system band are ever non-zero.

The grid carries a sub-bin ``offset`` so that the band is laid out
symmetrically about ``f0``. When ``delta_f`` is an integer number of bins the
band edges fall exactly half-way between bins, so the discrete band holds
exactly ``delta_f / df`` bins and the discrete rect has the same bandwidth as
the continuous one. Peak (``2*delta_f``) and energy (``2*delta_f``) of the
matched cascade are then both exact on the grid.
"""

from __future__ import annotations

import json
import math
from functools import cached_property
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError

# Minimum number of in-band bins: below this the rect band is too coarse.
MIN_BAND_BINS = 64

_FIELDS = ("f0", "delta_f", "tau0", "delta_tau", "n_users", "fs", "n_fft", "noise_sigma")


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SystemParams:
    """Physical and numerical configuration of a DCMA system (SI units).

    Attributes:
        f0: Center frequency, Hz.
        delta_f: System bandwidth, Hz.
        tau0: Reference group delay, s.
        delta_tau: Group-delay swing of each phaser, s.
        n_users: Number of TX-RX pairs.
        fs: Sample rate, Hz.
        n_fft: FFT length, a power of two.
        noise_sigma: AWGN standard deviation in un-normalized signal units.
    """

    f0: float
    delta_f: float
    tau0: float
    delta_tau: float
    n_users: int
    fs: float
    n_fft: int
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.delta_f > 0:
            raise ConfigError(f"delta_f must be positive, got {self.delta_f}")
        if not self.f0 - self.delta_f / 2 > 0:
            raise ConfigError(
                f"band [{self.f_lo:.4g}, {self.f_hi:.4g}] Hz crosses DC"
            )
        if not self.delta_tau > 0:
            raise ConfigError(f"delta_tau must be positive, got {self.delta_tau}")
        if int(self.n_users) != self.n_users or self.n_users < 1:
            raise ConfigError(f"n_users must be a positive integer, got {self.n_users}")
        if not _is_pow2(int(self.n_fft)) or int(self.n_fft) != self.n_fft:
            raise ConfigError(f"n_fft must be a power of two, got {self.n_fft}")
        if self.fs < 2 * self.f_hi:
            raise ConfigError(
                f"fs={self.fs:.4g} Hz cannot resolve the band up to {self.f_hi:.4g} Hz"
            )
        if self.window < 2 * self.bit_period * (1 - 1e-12):
            raise ConfigError(
                f"time window {self.window:.4g} s shorter than two bit periods "
                f"({2 * self.bit_period:.4g} s)"
            )
        if self.tau0 < self.delta_tau / 2 * (1 - 1e-12):
            raise ConfigError("tau0 must be at least delta_tau/2")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.band_bins < MIN_BAND_BINS:
            raise ConfigError(
                f"only {self.band_bins} in-band bins; need at least {MIN_BAND_BINS}"
            )

    # -- derived quantities -------------------------------------------------
    @property
    def f_lo(self) -> float:
        return self.f0 - self.delta_f / 2

    @property
    def f_hi(self) -> float:
        return self.f0 + self.delta_f / 2

    @property
    def bit_period(self) -> float:
        """T_b = 2 * delta_tau, the maximal dispersed duration."""
        return 2 * self.delta_tau

    @property
    def df(self) -> float:
        return self.fs / self.n_fft

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def window(self) -> float:
        return self.n_fft / self.fs

    @property
    def dsbp(self) -> float:
        """Delay swing-bandwidth product."""
        return self.delta_tau * self.delta_f

    @property
    def band_bins(self) -> int:
        return int(round(self.delta_f / self.df))

    # -- construction helpers -----------------------------------------------
    @classmethod
    def create(
        cls,
        f0: float = 10e9,
        delta_f: float = 4e9,
        delta_tau: float = 1e-9,
        n_users: int = 2,
        fs: float | None = None,
        n_fft: int | None = None,
        tau0: float | None = None,
        noise_sigma: float = 0.0,
        min_window: float | None = None,
    ) -> "SystemParams":
        """Build parameters, filling sampling defaults.

        ``tau0`` defaults to ``delta_tau``. ``fs`` defaults to the smallest
        power-of-two multiple of 1 GHz covering twice the upper band edge,
        which keeps ``delta_f / df`` integral for round bandwidths. ``n_fft``
        defaults to the smallest power of two (at least 4096) whose window
        covers both two bit periods and ``min_window``.
        """
        f_hi = f0 + delta_f / 2
        if fs is None:
            fs = 1e9 * 2 ** math.ceil(math.log2(max(2 * f_hi / 1e9, 1.0)))
        if tau0 is None:
            tau0 = delta_tau
        if n_fft is None:
            need = max(4 * delta_tau, min_window or 0.0)
            n_fft = max(4096, 1 << math.ceil(math.log2(need * fs)))
        return cls(
            f0=f0,
            delta_f=delta_f,
            tau0=tau0,
            delta_tau=delta_tau,
            n_users=n_users,
            fs=fs,
            n_fft=int(n_fft),
            noise_sigma=noise_sigma,
        )

    def with_window(self, min_window: float) -> "SystemParams":
        """Return a copy whose n_fft is grown (never shrunk) to cover ``min_window``."""
        n = self.n_fft
        while n / self.fs < min_window:
            n *= 2
        return self if n == self.n_fft else replace(self, n_fft=n)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown SystemParams keys: {sorted(unknown)}")
        missing = {"f0", "delta_f", "delta_tau"} - set(data)
        if missing:
            raise ConfigError(f"missing SystemParams keys: {sorted(missing)}")
        if {"fs", "n_fft", "tau0", "n_users"} <= set(data):
            return cls(**data)
        return cls.create(**data)

    @classmethod
    def from_json(cls, path_or_text: str | Path) -> "SystemParams":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniform one-sided frequency grid.

    ``frequencies[k] = (k + offset) * df`` for ``k = 0 .. n-1``.
    """

    fs: float
    n: int
    offset: float
    in_band: np.ndarray = field(repr=False)
    frequencies: np.ndarray = field(repr=False)

    @property
    def df(self) -> float:
        return self.fs / self.n

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def window(self) -> float:
        return self.n / self.fs

    @cached_property
    def band(self) -> slice:
        """Contiguous slice of the in-band bins."""
        idx = np.flatnonzero(self.in_band)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    @property
    def key(self) -> tuple:
        b = self.band
        return (self.fs, self.n, self.offset, b.start, b.stop)

    def same_as(self, other: "FrequencyGrid") -> bool:
        return self is other or self.key == other.key

    def frequency(self, index):
        return (np.asarray(index) + self.offset) * self.df

    def index(self, freq):
        """Nearest bin index of a frequency (inverse of :meth:`frequency`)."""
        return np.rint(np.asarray(freq) / self.df - self.offset).astype(int)

    def times(self, t0: float = 0.0) -> np.ndarray:
        return t0 + np.arange(self.n) * self.dt


def make_grid(params: SystemParams) -> FrequencyGrid:
    """Build the frequency grid for ``params``.

    The in-band bins are placed symmetrically about ``f0``; the mask selects
    every bin whose center lies in the closed band ``[f_lo, f_hi]``.
    """
    df = params.df
    m = params.band_bins
    first = params.f0 / df - (m - 1) / 2
    k0 = math.floor(first + 1e-9)
    offset = first - k0
    if offset > 1 - 1e-9:
        k0, offset = k0 + 1, 0.0
    freqs = (np.arange(params.n_fft) + offset) * df
    tol = 1e-9 * df
    in_band = (freqs >= params.f_lo - tol) & (freqs <= params.f_hi + tol)
    freqs.setflags(write=False)
    in_band.setflags(write=False)
    return FrequencyGrid(
        fs=params.fs, n=params.n_fft, offset=offset, in_band=in_band, frequencies=freqs
    )
