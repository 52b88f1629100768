"""Line-of-sight channels: Friis form and the normalized random ensemble."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigError, DomainError
from .phaser import Spectrum
from .sysconfig import FrequencyGrid, SystemParams


@dataclass(frozen=True)
class ChannelEnsembleParams:
    """Bounds of the random LOS ensemble.

    Distances are in meters; ``alpha_*_sq`` bound the uniformly distributed
    link intensity ``alpha_ik**2``.
    """

    d_min: float = 0.0
    d_max: float = 4.0
    alpha_min_sq: float = 1.0
    alpha_max_sq: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.d_min <= self.d_max:
            raise ConfigError("need 0 <= d_min <= d_max")
        if not 0 <= self.alpha_min_sq <= self.alpha_max_sq:
            raise ConfigError("need 0 <= alpha_min_sq <= alpha_max_sq")

    @property
    def t_min(self) -> float:
        return self.d_min / SPEED_OF_LIGHT

    @property
    def t_max(self) -> float:
        return self.d_max / SPEED_OF_LIGHT

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelEnsembleParams":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of the LOS ensemble.

    ``alpha[i, k]`` and ``t_chan[i, k]`` describe the link from TX_k to RX_i;
    ``t_tx[k]`` is the transmit offset of TX_k.
    """

    alpha: np.ndarray = field(repr=False)
    t_chan: np.ndarray = field(repr=False)
    t_tx: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.t_tx.shape[0]
        if self.alpha.shape != (n, n) or self.t_chan.shape != (n, n):
            raise ConfigError("channel matrices must be N x N with N = len(t_tx)")
        if not np.all(np.diag(self.alpha) == 1.0):
            raise ConfigError("direct links must have alpha_ii = 1")
        for a in (self.alpha, self.t_chan, self.t_tx):
            a.setflags(write=False)

    @property
    def n(self) -> int:
        return self.t_tx.shape[0]

    def link_delay(self, i: int, k: int) -> float:
        """Total extra delay of TX_k's pulses as seen at RX_i."""
        return float(self.t_tx[k] + self.t_chan[i, k])

    @classmethod
    def ideal(cls, n: int) -> "ChannelRealization":
        """Synchronized transmitters over identical shorted channels."""
        return cls(np.ones((n, n)), np.zeros((n, n)), np.zeros(n))

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha.tolist(),
            "t_chan": self.t_chan.tolist(),
            "t_tx": self.t_tx.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        d = json.loads(text)
        return cls(np.array(d["alpha"], dtype=float), np.array(d["t_chan"], dtype=float),
                   np.array(d["t_tx"], dtype=float))


def trial_rng(seed: int, trial: int, *subkey: int) -> np.random.Generator:
    """Independent generator for one Monte Carlo trial, keyed by (seed, trial, ...).

    Extra integers address nested streams, e.g. delay draws within one
    gain realization.
    """
    key = (int(trial),) + tuple(int(k) for k in subkey)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def friis_amplitude(gain_tx: float, gain_rx: float, f0: float, t_ik: float) -> float:
    """Free-space LOS amplitude ``sqrt(G_tx G_rx) / (2 w0 t_ik)``."""
    if t_ik <= 0:
        raise DomainError("Friis amplitude needs a positive delay")
    if gain_tx <= 0 or gain_rx <= 0:
        raise DomainError("antenna gains must be positive")
    return float(np.sqrt(gain_tx * gain_rx) / (2 * 2 * np.pi * f0 * t_ik))


def draw_realization(params: SystemParams, ens: ChannelEnsembleParams,
                     rng: np.random.Generator) -> ChannelRealization:
    """Draw delays, link amplitudes and transmit offsets for ``params.n_users`` pairs.

    Channel delays and intensities are independent and uniform; the diagonal
    is forced to ``alpha_ii = 1``; transmit offsets are uniform over one bit.
    """
    n = params.n_users
    t_chan = rng.uniform(ens.t_min, ens.t_max, size=(n, n))
    alpha = np.sqrt(rng.uniform(ens.alpha_min_sq, ens.alpha_max_sq, size=(n, n)))
    np.fill_diagonal(alpha, 1.0)
    t_tx = rng.uniform(0.0, params.bit_period, size=n)
    return ChannelRealization(alpha, t_chan, t_tx)


def channel_transfer(alpha: float, t: float, grid: FrequencyGrid) -> Spectrum:
    """Scaled pure delay ``alpha * exp(-j 2 pi f t)`` over the whole grid."""
    if t < 0:
        raise DomainError("channel delay must be non-negative")
    return Spectrum(alpha * np.exp(-2j * np.pi * grid.frequencies * t), grid)
