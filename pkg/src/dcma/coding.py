"""Chebyshev dispersion codes.

A user with code order ``m`` gets the encoding group delay
``tau0 + (delta_tau/2) T_m(x)`` and the phase-conjugated decoding delay
``tau0 - (delta_tau/2) T_m(x)``, where ``x`` maps the band onto ``[-1, 1]``.
Negative orders follow ``T_{-m} = -T_m``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError
from .sysconfig import SystemParams

_X_TOL = 1e-12
_F_TOL = 1e-9  # relative to the bandwidth


class Side(str, Enum):
    TX = "tx"
    RX = "rx"


@dataclass(frozen=True)
class ChebyshevCode:
    order: int

    def __post_init__(self):
        if int(self.order) != self.order or self.order == 0:
            raise ConfigError(f"code order must be a nonzero integer, got {self.order}")


@dataclass(frozen=True)
class CodeSet:
    """Ordered code orders ``[m_1 .. m_N]``, all distinct."""

    orders: tuple[int, ...]

    def __post_init__(self):
        orders = tuple(int(m) for m in self.orders)
        object.__setattr__(self, "orders", orders)
        if not orders:
            raise ConfigError("empty code set")
        for m in orders:
            ChebyshevCode(m)
        if len(set(orders)) != len(orders):
            raise ConfigError(f"code orders must be distinct: {list(orders)}")

    def __len__(self):
        return len(self.orders)

    def __iter__(self):
        return iter(self.orders)

    def __getitem__(self, i):
        return self.orders[i]

    @property
    def has_linear_code(self) -> bool:
        """True when the set contains +-1 (linear group delay)."""
        return any(abs(m) == 1 for m in self.orders)

    def to_json(self) -> str:
        return json.dumps(list(self.orders))

    @classmethod
    def from_json(cls, text: str) -> "CodeSet":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ConfigError("code set must be a JSON array of integers")
        return cls(tuple(data))


def _order(code) -> int:
    if isinstance(code, ChebyshevCode):
        return code.order
    return ChebyshevCode(int(code)).order


def cheb_eval(m: int, x):
    """Signed Chebyshev polynomial of the first kind, ``sign(m) T_|m|(x)``.

    Inputs within 1e-12 of ``[-1, 1]`` are clamped; anything further raises
    :class:`DomainError`.
    """
    m = _order(m)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + _X_TOL):
        raise DomainError("Chebyshev argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    val = np.cos(abs(m) * np.arccos(x))
    return val if m > 0 else -val


def _cheb_integral(m: int, x):
    """Antiderivative of ``T_m`` (signed), zero at ``x = -1``."""
    n = abs(m)
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)

    def prim(u):
        if n == 1:
            return u * u / 2
        tp = np.cos((n + 1) * np.arccos(u))
        tm = np.cos((n - 1) * np.arccos(u))
        return 0.5 * (tp / (n + 1) - tm / (n - 1))

    val = prim(x) - prim(np.float64(-1.0))
    return val if m > 0 else -val


def normalized_frequency(params: SystemParams, f):
    """Map band frequencies onto ``x`` in ``[-1, 1]``; raise outside the band."""
    f = np.asarray(f, dtype=float)
    tol = _F_TOL * params.delta_f
    if np.any(f < params.f_lo - tol) or np.any(f > params.f_hi + tol):
        raise DomainError("frequency outside the system band")
    return np.clip((f - params.f0) / (params.delta_f / 2), -1.0, 1.0)


def _sign(side) -> float:
    return 1.0 if Side(side) is Side.TX else -1.0


def code_delay(code, params: SystemParams, f):
    """Dispersive deviation ``tau_i(f) = (delta_tau/2) T_m(x)`` of a user code."""
    x = normalized_frequency(params, f)
    return params.delta_tau / 2 * cheb_eval(_order(code), x)


def group_delay(code, side, params: SystemParams, f):
    """Group delay of the TX (encoding) or RX (decoding) phaser of ``code``."""
    return params.tau0 + _sign(side) * code_delay(code, params, f)


def phase(code, side, params: SystemParams, f):
    """Dispersive phase of a phaser, in radians.

    ``phi(w) = -int_{w_lo}^{w} tau_i(w') dw'`` for the TX side and ``-phi``
    for the RX side, evaluated with the closed-form Chebyshev antiderivative.
    The linear ``-w tau0`` term is not included.
    """
    x = normalized_frequency(params, f)
    half_dw = np.pi * params.delta_f  # (2 pi delta_f) / 2
    phi = -(params.delta_tau / 2) * half_dw * _cheb_integral(_order(code), x)
    return _sign(side) * phi


def cascaded_group_delay(rx_code, tx_code, params: SystemParams, f):
    """Group delay of RX_i decoding a signal encoded by TX_k.

    ``rx_code`` and ``tx_code`` are the user codes ``m_i`` and ``m_k`` (the RX
    phaser itself implements ``-m_i``). The result is
    ``2 tau0 + tau_k(f) - tau_i(f)``, a constant ``2 tau0`` when matched.
    """
    m_i, m_k = _order(rx_code), _order(tx_code)
    if m_i == m_k:
        f = np.asarray(f, dtype=float)
        normalized_frequency(params, f)
        return np.full(f.shape, 2 * params.tau0) if f.ndim else 2 * params.tau0
    return 2 * params.tau0 + code_delay(m_k, params, f) - code_delay(m_i, params, f)


def delay_swing(rx_code, tx_code, params: SystemParams, n_points: int = 100_001) -> float:
    """Max minus min of the cascaded group delay over the band (at most 2 delta_tau)."""
    m_i, m_k = _order(rx_code), _order(tx_code)
    if m_i == m_k:
        return 0.0

    def g(x):
        return cheb_eval(m_k, x) - cheb_eval(m_i, x)

    xs = np.linspace(-1.0, 1.0, n_points)
    vals = g(xs)
    h = xs[1] - xs[0]

    def polish(sgn):
        # refine the coarse extremum of sgn*g inside its grid cell
        j = int(np.argmax(sgn * vals))
        bounds = (max(xs[j] - h, -1.0), min(xs[j] + h, 1.0))
        res = minimize_scalar(lambda u: -sgn * g(u), bounds=bounds, method="bounded",
                              options={"xatol": 1e-14})
        return max(sgn * vals[j], -res.fun)

    return float(params.delta_tau / 2 * (polish(1.0) + polish(-1.0)))


def all_odd_code_set(n: int) -> CodeSet:
    """All-odd code set without +-1: ``[3, -3, 5, -5, ...]`` of length ``n``."""
    if int(n) != n or n < 2:
        raise ConfigError(f"all-odd code set needs n >= 2, got {n}")
    orders = []
    m = 3
    while len(orders) < n:
        orders.append(m)
        if len(orders) < n:
            orders.append(-m)
        m += 2
    return CodeSet(tuple(orders))
