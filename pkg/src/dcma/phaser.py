"""Frequency-domain phaser bank.

Phasers are lossless and band-limited: unit magnitude inside the band, zero
outside, with phase ``-w tau0 +- phi(w)``. All filtering is a pointwise
product of spectra followed by one inverse FFT; there is no time-domain
convolution path.

Time signals are analytic: the real part is the physical passband waveform
and the magnitude is its envelope.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coding import CodeSet, Side, phase
from .errors import GridMismatchError
from .sysconfig import FrequencyGrid, SystemParams


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray = field(repr=False)
    grid: FrequencyGrid

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise GridMismatchError("spectrum length does not match its grid")

    def __mul__(self, other: "Spectrum") -> "Spectrum":
        return apply(self, other)

    def __add__(self, other: "Spectrum") -> "Spectrum":
        _check_grid(self, other)
        return Spectrum(self.values + other.values, self.grid)

    def scaled(self, a: complex) -> "Spectrum":
        return Spectrum(self.values * a, self.grid)

    def to_csv(self, path) -> None:
        _dump_csv(path, "frequency", self.grid.frequencies, self.values)


@dataclass(frozen=True, eq=False)
class Waveform:
    """Complex analytic samples taken at ``t0 + n / fs``."""

    samples: np.ndarray = field(repr=False)
    fs: float
    t0: float = 0.0

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) * self.dt

    @property
    def real(self) -> np.ndarray:
        return self.samples.real

    @property
    def envelope(self) -> np.ndarray:
        return np.abs(self.samples)

    def energy(self) -> float:
        """Energy of the real passband signal, ``sum(Re(h)^2) * dt``."""
        return float(np.sum(self.samples.real ** 2) * self.dt)

    def index_of(self, t) -> np.ndarray:
        return np.rint((np.asarray(t) - self.t0) * self.fs).astype(int)

    def __add__(self, other: "Waveform") -> "Waveform":
        if self.samples.size != other.samples.size or self.fs != other.fs or self.t0 != other.t0:
            raise GridMismatchError("waveforms sampled on different time axes")
        return Waveform(self.samples + other.samples, self.fs, self.t0)

    def to_csv(self, path) -> None:
        _dump_csv(path, "time", self.times, self.samples)


def _check_grid(a: Spectrum, b: Spectrum) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("spectra live on different frequency grids")


def _dump_csv(path, axis_name, axis, values) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", axis_name, "real", "imag", "magnitude"])
        for i, (a, v) in enumerate(zip(axis, values)):
            w.writerow([i, repr(float(a)), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(abs(v)))])


def transfer(code, side, params: SystemParams, grid: FrequencyGrid) -> Spectrum:
    """Transfer function of the encoding (TX) or decoding (RX) phaser of ``code``."""
    values = np.zeros(grid.n, dtype=complex)
    band = grid.band
    f = grid.frequencies[band]
    values[band] = np.exp(1j * (-2 * np.pi * f * params.tau0 + phase(code, Side(side), params, f)))
    return Spectrum(values, grid)


def cascaded_transfer(rx_code, tx_code, params: SystemParams, grid: FrequencyGrid) -> Spectrum:
    """``H_ik = H_RX_i * H_TX_k`` for user codes ``m_i`` (receiver) and ``m_k``."""
    return transfer(rx_code, Side.RX, params, grid) * transfer(tx_code, Side.TX, params, grid)


def apply(spec_in: Spectrum, h: Spectrum) -> Spectrum:
    """Pass a spectrum through a transfer function (pointwise product)."""
    _check_grid(spec_in, h)
    return Spectrum(spec_in.values * h.values, spec_in.grid)


def impulse_response(spec: Spectrum, t0: float = 0.0) -> Waveform:
    """Analytic time signal of a one-sided spectrum on the window starting at ``t0``.

    Uses ``z(t) = 2 df sum_k H_k exp(j 2 pi f_k t)``, the Riemann sum of the
    inverse Fourier transform with the negative-frequency half folded in. A
    matched cascade then peaks at ``2 * delta_f``.
    """
    grid = spec.grid
    n = grid.n
    vals = spec.values
    if t0:
        vals = vals * np.exp(2j * np.pi * grid.frequencies * t0)
    z = np.fft.ifft(vals) * (2 * grid.df * n)
    if grid.offset:
        z *= np.exp(2j * np.pi * grid.offset * np.arange(n) / n)
    return Waveform(z, grid.fs, t0)


def evaluate(spec: Spectrum, times) -> np.ndarray:
    """Analytic signal of ``spec`` at arbitrary instants by direct summation."""
    band = spec.grid.band
    f = spec.grid.frequencies[band]
    h = spec.values[band]
    t = np.atleast_1d(np.asarray(times, dtype=float))
    step = np.diff(t)
    if t.size > 2 and np.all(np.abs(step - step[0]) <= 1e-12 * abs(step[0])):
        # evenly spaced instants: rotate the spectrum one step at a time
        w = np.exp(2j * np.pi * f * step[0])
        v = h * np.exp(2j * np.pi * f * t[0])
        out = np.empty(t.size, dtype=complex)
        for n in range(t.size):
            out[n] = v.sum()
            v = v * w
    else:
        out = np.exp(2j * np.pi * np.outer(t, f)) @ h
    return 2 * spec.grid.df * out


def normalize(w: Waveform, params: SystemParams) -> Waveform:
    """Scale by the matched-cascade peak ``2 * delta_f``."""
    return Waveform(w.samples / (2 * params.delta_f), w.fs, w.t0)


def group_delay_from_phase(spec: Spectrum) -> tuple[np.ndarray, np.ndarray]:
    """Group delay of the in-band phase by finite differences.

    Returns bin-midpoint frequencies and ``-d(arg H)/dw`` between adjacent bins.
    """
    band = spec.grid.band
    f = spec.grid.frequencies[band]
    ph = np.unwrap(np.angle(spec.values[band]))
    tau = -np.diff(ph) / (2 * np.pi * spec.grid.df)
    return (f[:-1] + f[1:]) / 2, tau


class PhaserBank:
    """Precomputed TX and RX transfer functions for a code set.

    Immutable after construction and safe to share between workers.
    """

    def __init__(self, params: SystemParams, codes: CodeSet, grid: FrequencyGrid):
        self.params = params
        self.codes = codes
        self.grid = grid
        self._tx = [transfer(m, Side.TX, params, grid) for m in codes]
        self._rx = [transfer(m, Side.RX, params, grid) for m in codes]
        for s in self._tx + self._rx:
            s.values.setflags(write=False)

    def tx(self, k: int) -> Spectrum:
        return self._tx[k]

    def rx(self, i: int) -> Spectrum:
        return self._rx[i]

    def cascade(self, i: int, k: int) -> Spectrum:
        """Cascade from TX_k to RX_i."""
        return self._rx[i] * self._tx[k]
