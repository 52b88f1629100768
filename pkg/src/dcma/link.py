"""End-to-end waveform simulation of one DCMA receiver.

Transmitters emit OOK trains of ideal Dirac pulses (flat spectra), which are
encoded by their TX phasers, delayed and scaled by the channel, summed at the
receiver and decoded by its RX phaser. The receiver output is split into the
desired signal, the multiple access interference (MAI) and AWGN, each
normalized by the matched-cascade peak ``2 * delta_f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import hilbert

from .channel import ChannelRealization
from .coding import CodeSet
from .errors import ConfigError, DomainError, WindowOverflowError
from .phaser import PhaserBank, Spectrum, Waveform, evaluate, impulse_response
from .sysconfig import FrequencyGrid, SystemParams, make_grid


@dataclass(frozen=True, eq=False)
class BitStream:
    bits: np.ndarray = field(repr=False)
    bit_period: float

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1 or b.size == 0:
            raise ConfigError("bit stream must be a non-empty 1-D array")
        if not np.all((b == 0) | (b == 1)):
            raise ConfigError("bits must be 0 or 1")
        object.__setattr__(self, "bits", b.astype(np.int8))

    def __len__(self):
        return self.bits.size

    @classmethod
    def for_params(cls, bits, params: SystemParams) -> "BitStream":
        return cls(np.asarray(bits), params.bit_period)


@dataclass(frozen=True, eq=False)
class DecodedLink:
    """Decoded output of RX_i, normalized by ``2 * delta_f``.

    ``z = s_tilde + x_mai + noise`` holds sample by sample. The desired and
    MAI spectra are kept so detection can evaluate them at exact instants.
    """

    z: Waveform
    s_tilde: Waveform
    x_mai: Waveform
    noise: Waveform
    s_spectrum: Spectrum = field(repr=False)
    x_spectrum: Spectrum = field(repr=False)
    rx_index: int
    peak_times: np.ndarray = field(repr=False)


def ook_dirac_train(bits: BitStream, g: float, t_tx: float, grid: FrequencyGrid,
                    max_delay: float = 0.0, band_only: bool = False) -> Spectrum:
    """Spectrum of ``sum_l d_l g delta(t - l T_b - t_tx)``.

    ``max_delay`` is the largest delay the train will see downstream (phasers
    plus channel); the pulses plus that delay must fit in the window. With
    ``band_only`` the out-of-band bins are left at zero, which is all the
    phasers pass anyway.
    """
    if g <= 0:
        raise ConfigError("pulse amplitude g must be positive")
    n_bits = len(bits)
    last = (n_bits - 1) * bits.bit_period + t_tx + max_delay
    if t_tx < 0 or last > grid.window:
        raise WindowOverflowError(
            f"pulse train ending at {last:.4g} s exceeds the {grid.window:.4g} s window"
        )
    sel = grid.band if band_only else slice(None)
    f = grid.frequencies[sel]
    step = np.exp(-2j * np.pi * f * bits.bit_period)
    acc = np.zeros(f.size, dtype=complex)
    for d in bits.bits[::-1]:  # Horner in exp(-j 2 pi f T_b)
        acc *= step
        if d:
            acc += 1.0
    acc *= g * np.exp(-2j * np.pi * f * t_tx)
    out = np.zeros(grid.n, dtype=complex)
    out[sel] = acc
    return Spectrum(out, grid)


def dirac_train(times, grid: FrequencyGrid, g: float = 1.0) -> Spectrum:
    """Spectrum of unit-weight Dirac pulses at arbitrary instants."""
    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < 0 or times.max() > grid.window):
        raise WindowOverflowError("pulse instants outside the time window")
    vals = np.zeros(grid.n, dtype=complex)
    for t in times:
        vals += np.exp(-2j * np.pi * grid.frequencies * t)
    return Spectrum(g * vals, grid)


def dook_modulate(nrz_bits, bit_period: float, xor_delay: float) -> np.ndarray:
    """Pulse instants of differential OOK.

    The NRZ stream is XOR-ed with a copy delayed by ``xor_delay``; the
    output goes high at every level change, rising or falling. The line is
    assumed low before the first bit.
    """
    if not 0 < xor_delay < bit_period:
        raise ConfigError("xor_delay must lie strictly between 0 and the bit period")
    d = np.asarray(nrz_bits, dtype=int)
    prev = np.concatenate(([0], d[:-1]))
    edges = np.flatnonzero(d != prev)
    return edges * bit_period


def peak_times(params: SystemParams, chan: ChannelRealization, rx_index: int,
               n_bits: int) -> np.ndarray:
    """Instants where RX_i's desired pulses peak (genie-aided timing)."""
    return (np.arange(n_bits) * params.bit_period + chan.link_delay(rx_index, rx_index)
            + 2 * params.tau0)


def steady_region(params: SystemParams, chan: ChannelRealization, rx_index: int,
                  n_bits: int, guard: float | None = None) -> tuple[float, float]:
    """Time span over which every link into RX_i sees a full pulse history.

    Inside it, finite trains of ``n_bits`` pulses are indistinguishable from
    infinite ones up to ringing beyond ``guard`` (default one bit period)
    from each response's delay spread.
    """
    if guard is None:
        guard = params.bit_period
    s = np.array([chan.link_delay(rx_index, k) for k in range(chan.n)])
    reach = 2 * params.tau0
    start = s.max() + reach + params.delta_tau + guard
    stop = (n_bits - 1) * params.bit_period + s.min() + reach - params.delta_tau - guard
    return float(start), float(stop)


def required_window(params: SystemParams, n_bits: int, t_chan_max: float,
                    guard: float | None = None) -> float:
    """Window holding ``n_bits`` pulses with worst-case delays plus ringing room."""
    if guard is None:
        guard = params.bit_period
    return ((n_bits - 1) * params.bit_period + params.bit_period + t_chan_max
            + 2 * params.tau0 + params.delta_tau + 2 * guard)


def bits_for_region(params: SystemParams, t_chan_max: float, length: float,
                    guard: float | None = None) -> int:
    """Smallest train length whose steady region is at least ``length`` long
    for every channel draw with delays up to ``t_chan_max``."""
    if guard is None:
        guard = params.bit_period
    span = length + params.bit_period + t_chan_max + 2 * params.delta_tau + 2 * guard
    return int(np.ceil(span / params.bit_period - 1e-9)) + 1


def simulate_link(params: SystemParams, codes: CodeSet, chan: ChannelRealization,
                  bits: Sequence[BitStream], rx_index: int,
                  rng: np.random.Generator | None = None,
                  bank: PhaserBank | None = None,
                  trains: Sequence[Spectrum] | None = None) -> DecodedLink:
    """Decode the superposition of all transmitters at RX_i.

    ``trains`` may carry precomputed :func:`ook_dirac_train` spectra (one per
    transmitter) so several receivers of the same trial can share them.
    Noise needs ``rng`` whenever ``params.noise_sigma > 0``.
    """
    n = len(codes)
    if not (n == chan.n == len(bits)):
        raise ConfigError(
            f"dimension mismatch: {n} codes, {chan.n}-user channel, {len(bits)} bit streams"
        )
    if not 0 <= rx_index < n:
        raise ConfigError(f"rx_index {rx_index} out of range")
    if bank is None:
        bank = PhaserBank(params, codes, make_grid(params))
    grid = bank.grid
    reach = 2 * params.tau0 + params.delta_tau
    if trains is None:
        trains = [
            ook_dirac_train(bits[k], 1.0, float(chan.t_tx[k]), grid,
                            max_delay=float(chan.t_chan[:, k].max()) + reach,
                            band_only=True)
            for k in range(n)
        ]
    else:
        for k in range(n):
            end = ((len(bits[k]) - 1) * params.bit_period
                   + chan.link_delay(rx_index, k) + reach)
            if end > grid.window:
                raise WindowOverflowError("pulse train plus delays exceed the window")

    # phasers are zero out of band, so only in-band bins need work
    band = grid.band
    f = grid.frequencies[band]
    rx = bank.rx(rx_index).values[band]
    i = rx_index
    desired = trains[i].values[band] * np.exp(-2j * np.pi * f * chan.t_chan[i, i])
    mai = np.zeros(f.size, dtype=complex)
    for k in range(n):
        if k == i or chan.alpha[i, k] == 0:
            continue
        mai += (chan.alpha[i, k] * trains[k].values[band] * bank.tx(k).values[band]
                * np.exp(-2j * np.pi * f * chan.t_chan[i, k]))
    scale = 1.0 / (2 * params.delta_f)
    s_vals = np.zeros(grid.n, dtype=complex)
    x_vals = np.zeros(grid.n, dtype=complex)
    s_vals[band] = desired * bank.tx(i).values[band] * rx * scale
    x_vals[band] = mai * rx * scale
    s_spec = Spectrum(s_vals, grid)
    x_spec = Spectrum(x_vals, grid)
    s_w = impulse_response(s_spec)
    x_w = impulse_response(x_spec)

    if params.noise_sigma > 0:
        if rng is None:
            raise ConfigError("noise_sigma > 0 requires an rng")
        # analytic white noise whose real part has variance sigma_N^2
        real_noise = rng.normal(0.0, params.noise_sigma, grid.n)
        noise = hilbert(real_noise) * scale
    else:
        noise = np.zeros(grid.n, dtype=complex)
    n_w = Waveform(noise, grid.fs)
    z = Waveform(s_w.samples + x_w.samples + noise, grid.fs)
    return DecodedLink(z=z, s_tilde=s_w, x_mai=x_w, noise=n_w, s_spectrum=s_spec,
                       x_spectrum=x_spec, rx_index=i,
                       peak_times=peak_times(params, chan, i, len(bits[i])))


def decision_samples(link: DecodedLink, timing=None, mode: str = "real") -> np.ndarray:
    """Normalized decision statistics at the given instants.

    ``mode="real"`` samples the real passband signal, ``"envelope"`` its
    magnitude. Signal parts are evaluated exactly at the instants; the noise
    takes its value at the nearest sample.
    """
    t = link.peak_times if timing is None else np.atleast_1d(np.asarray(timing, float))
    win = link.z.samples.size * link.z.dt
    if np.any(t < link.z.t0) or np.any(t >= link.z.t0 + win):
        raise DomainError("decision instants outside the time window")
    sig = evaluate(link.s_spectrum + link.x_spectrum, t)
    noise = link.noise.samples[link.noise.index_of(t) % link.noise.samples.size]
    total = sig + noise
    if mode == "real":
        return total.real
    if mode == "envelope":
        return np.abs(total)
    raise ConfigError(f"unknown detection mode {mode!r}")


def detect_bits(link: DecodedLink, threshold: float = 0.5, timing=None,
                mode: str = "real") -> np.ndarray:
    """Threshold detection at the desired peak instants.

    Bit ``l`` is 1 iff the decision sample exceeds ``threshold``. The default
    ``mode="real"`` compares the real passband sample, i.e. ``1 + x + n``
    for a sent 1 and ``x + n`` for a sent 0.
    """
    if not 0 < threshold < 1:
        raise ConfigError("threshold must lie in (0, 1)")
    return (decision_samples(link, timing, mode) > threshold).astype(np.int8)
