"""Monte Carlo drivers: MAI sampling and empirical bit-error rates.

Every trial owns a generator derived from ``(seed, trial)``, so results do
not depend on how trials are split across worker processes. Workers return
plain arrays or counters that are merged in trial order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .analysis import bep, sir_analytic
from .channel import ChannelEnsembleParams, ChannelRealization, draw_realization, trial_rng
from .coding import CodeSet
from .errors import ConfigError, InsufficientTrialsError
from .link import (BitStream, bits_for_region, detect_bits, ook_dirac_train,
                   required_window, simulate_link, steady_region)
from .phaser import PhaserBank
from .sysconfig import SystemParams, make_grid

MIN_TRIALS = 1000
MC_FLOOR = 1e-7  # below this only the analytic BEP is reported


@dataclass(frozen=True, eq=False)
class TrialPlan:
    """Window-sized parameters and phaser bank shared by all trials."""

    params: SystemParams
    codes: CodeSet
    ens: ChannelEnsembleParams
    n_bits: int
    bank: PhaserBank = field(repr=False)

    @property
    def n_users(self) -> int:
        return len(self.codes)


def plan_trials(params: SystemParams, codes: CodeSet, ens: ChannelEnsembleParams,
                region: float | None = None) -> TrialPlan:
    """Size the bit trains and window so every draw has a steady region of
    at least ``region`` seconds (default two bit periods)."""
    if params.n_users != len(codes):
        raise ConfigError(f"params describe {params.n_users} users but {len(codes)} codes given")
    if region is None:
        region = 2 * params.bit_period
    n_bits = bits_for_region(params, ens.t_max, region)
    p = params.with_window(required_window(params, n_bits, ens.t_max))
    return TrialPlan(p, codes, ens, n_bits, PhaserBank(p, codes, make_grid(p)))


def _trains(plan: TrialPlan, chan: ChannelRealization, bits) -> list:
    p = plan.params
    reach = 2 * p.tau0 + p.delta_tau
    return [ook_dirac_train(bits[k], 1.0, float(chan.t_tx[k]), plan.bank.grid,
                            max_delay=float(chan.t_chan[:, k].max()) + reach, band_only=True)
            for k in range(plan.n_users)]


def _run(fn, plan, n_trials, workers, *args):
    """Evaluate ``fn(plan, start, stop, *args)`` over trial chunks, in order."""
    if workers <= 1 or n_trials < 2 * workers:
        return [fn(plan, 0, n_trials, *args)]
    edges = np.linspace(0, n_trials, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, plan, int(a), int(b), *args) for a, b in zip(edges[:-1], edges[1:])]
        return [f.result() for f in futs]


# ---------------------------------------------------------------- MAI sampling

@dataclass(frozen=True, eq=False)
class MaiSamples:
    """Pooled MAI samples, one row of ``2 T_b * fs`` samples per trial.

    ``single`` holds one sample per trial at a random instant, an
    independent set suited to goodness-of-fit tests.
    """

    pooled: np.ndarray = field(repr=False)
    single: np.ndarray = field(repr=False)
    receivers: np.ndarray = field(repr=False)


def _mai_chunk(plan: TrialPlan, start: int, stop: int, seed: int, length: int):
    p = plan.params
    ones = [BitStream.for_params(np.ones(plan.n_bits), p)] * plan.n_users
    rows, single, rxs = [], [], []
    for t in range(start, stop):
        rng = trial_rng(seed, t)
        chan = draw_realization(p, plan.ens, rng)
        i = t % plan.n_users
        link = simulate_link(p, plan.codes, chan, ones, i, bank=plan.bank)
        a, _ = steady_region(p, chan, i, plan.n_bits)
        x = link.x_mai.real[link.x_mai.index_of(a) + np.arange(length)]
        rows.append(x)
        single.append(x[rng.integers(length)])
        rxs.append(i)
    return np.array(rows), np.array(single), np.array(rxs)


def sample_mai(params: SystemParams, codes: CodeSet, ens: ChannelEnsembleParams,
               n_trials: int, seed: int = 0, workers: int = 1) -> MaiSamples:
    """Worst-case MAI samples at the receivers.

    Per trial: draw delays, gains and transmit offsets, let every interferer
    send only ones, and keep the real decoded MAI over a steady window of
    ``2 T_b``. Trial ``t`` looks at receiver ``t mod N``.
    """
    if n_trials < 1:
        raise ConfigError("need at least one trial")
    plan = plan_trials(params, codes, ens)
    length = int(round(2 * plan.params.bit_period * plan.params.fs))
    parts = _run(_mai_chunk, plan, n_trials, workers, seed, length)
    pooled, single, rxs = (np.concatenate(x) for x in zip(*parts))
    return MaiSamples(pooled, single, rxs)


# ----------------------------------------------------- random-gain ensemble

def _variance_chunk(plan: TrialPlan, start: int, stop: int, seed: int, prefix: tuple,
                    alpha: np.ndarray, length: int):
    p = plan.params
    ones = [BitStream.for_params(np.ones(plan.n_bits), p)] * plan.n_users
    acc = np.zeros(plan.n_users)
    for t in range(start, stop):
        rng = trial_rng(seed, *prefix, t)
        draw = draw_realization(p, plan.ens, rng)
        chan = ChannelRealization(alpha, np.array(draw.t_chan), np.array(draw.t_tx))
        trains = _trains(plan, chan, ones)
        for i in range(plan.n_users):
            link = simulate_link(p, plan.codes, chan, ones, i, bank=plan.bank, trains=trains)
            a, _ = steady_region(p, chan, i, plan.n_bits)
            x = link.x_mai.real[link.x_mai.index_of(a) + np.arange(length)]
            acc[i] += np.mean(x ** 2)
    return acc


def receiver_mai_variance(plan: TrialPlan, alpha: np.ndarray, n_trials: int, seed: int = 0,
                          workers: int = 1, stream: tuple = ()) -> np.ndarray:
    """Per-receiver MAI variance for fixed link gains, averaged over delay draws.

    Uses the second moment about zero; the MAI mean vanishes by symmetry.
    Delay draw ``t`` uses the stream ``(seed, *stream, t)``.
    """
    alpha = np.array(alpha, dtype=float)
    length = int(round(2 * plan.params.bit_period * plan.params.fs))
    parts = _run(_variance_chunk, plan, n_trials, workers, seed, tuple(stream), alpha, length)
    return np.sum(parts, axis=0) / n_trials


@dataclass(frozen=True)
class RandomGainBep:
    n_users: int
    bep_statistical: float
    bep_mean_gain: float
    alpha_mean_sq: float
    n_realizations: int


def bep_random_gain(params: SystemParams, codes: CodeSet, ens: ChannelEnsembleParams,
                    n_realizations: int, n_delay_trials: int, seed: int = 0,
                    workers: int = 1) -> RandomGainBep:
    """Noiseless BEP under random link gains, two ways.

    ``bep_statistical`` draws gain matrices, measures each receiver's MAI
    variance over random delays, converts it to SIR and BEP, and averages
    over receivers and gain draws. ``bep_mean_gain`` is the closed form with
    every gain replaced by the ensemble mean intensity.
    """
    plan = plan_trials(params, codes, ens)
    n = plan.n_users
    beps = []
    for r in range(n_realizations):
        rng = trial_rng(seed, r)
        draw = draw_realization(plan.params, ens, rng)
        var = receiver_mai_variance(plan, draw.alpha, n_delay_trials, seed=seed,
                                    workers=workers, stream=(r,))
        beps.append(bep(1.0 / var).average)
    mean_sq = 0.5 * (ens.alpha_min_sq + ens.alpha_max_sq)
    analytic = bep([sir_analytic(params, n, mean_sq)]).average
    return RandomGainBep(n, float(np.mean(beps)), analytic, mean_sq, n_realizations)


# ------------------------------------------------------------- bit errors

@dataclass(frozen=True, eq=False)
class McBep:
    errors: int
    bits: int
    per_receiver_errors: np.ndarray = field(repr=False)
    per_receiver_bits: np.ndarray = field(repr=False)
    ci_low: float
    ci_high: float
    n_trials: int

    @property
    def estimate(self) -> float:
        return self.errors / self.bits

    def to_dict(self) -> dict:
        return {"errors": self.errors, "bits": self.bits, "bep": self.estimate,
                "ci95": [self.ci_low, self.ci_high], "n_trials": self.n_trials,
                "per_receiver_errors": self.per_receiver_errors.tolist(),
                "per_receiver_bits": self.per_receiver_bits.tolist()}


def _bep_chunk(plan: TrialPlan, start: int, stop: int, seed: int, worst_case: bool,
               threshold: float, mode: str):
    p = plan.params
    n, k_bits = plan.n_users, plan.n_bits
    errs = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    ones = [BitStream.for_params(np.ones(k_bits), p)] * n
    for t in range(start, stop):
        rng = trial_rng(seed, t)
        chan = draw_realization(p, plan.ens, rng)
        data = [BitStream.for_params(rng.integers(0, 2, k_bits), p) for _ in range(n)]
        data_trains = _trains(plan, chan, data)
        ones_trains = _trains(plan, chan, ones) if worst_case else None
        for i in range(n):
            if worst_case:
                trains = list(ones_trains)
                trains[i] = data_trains[i]
                bits = list(ones)
                bits[i] = data[i]
            else:
                trains, bits = data_trains, data
            link = simulate_link(p, plan.codes, chan, bits, i, rng=rng, bank=plan.bank,
                                 trains=trains)
            a, b = steady_region(p, chan, i, k_bits)
            sel = (link.peak_times >= a) & (link.peak_times <= b)
            decided = detect_bits(link, threshold=threshold, timing=link.peak_times[sel],
                                  mode=mode)
            errs[i] += int(np.sum(decided != data[i].bits[sel]))
            cnt[i] += int(sel.sum())
    return errs, cnt


def wilson_interval(errors: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(errors), int(n)).proportion_ci(confidence_level=confidence,
                                                      method="wilson")
    return float(ci.low), float(ci.high)


def bep_monte_carlo(params: SystemParams, codes: CodeSet, ens: ChannelEnsembleParams,
                    n_trials: int, seed: int = 0, worst_case: bool = False,
                    threshold: float = 0.5, mode: str = "real", region_bits: int = 16,
                    workers: int = 1, expected_bep: float | None = None,
                    require_resolution: bool = False) -> McBep:
    """Empirical bit-error rate with a Wilson 95% interval.

    Each trial draws a channel, random equiprobable data for every user
    (or, with ``worst_case``, only ones for the interferers) and noise at
    ``params.noise_sigma``, then detects every receiver's bits inside its
    steady region. With ``require_resolution`` the run refuses targets
    below 1e-7 and fails if the interval is wider than the estimate.
    """
    if n_trials < MIN_TRIALS:
        raise ConfigError(f"Monte Carlo BEP needs at least {MIN_TRIALS} trials")
    if require_resolution and expected_bep is not None and expected_bep < MC_FLOOR:
        raise InsufficientTrialsError(
            f"expected BEP {expected_bep:.3g} is below {MC_FLOOR:g}; report the analytic value"
        )
    plan = plan_trials(params, codes, ens, region=region_bits * params.bit_period)
    parts = _run(_bep_chunk, plan, n_trials, workers, seed, worst_case, threshold, mode)
    errs = np.sum([e for e, _ in parts], axis=0)
    cnt = np.sum([c for _, c in parts], axis=0)
    k, nb = int(errs.sum()), int(cnt.sum())
    lo, hi = wilson_interval(k, nb)
    if require_resolution and (k == 0 or hi - lo > k / nb):
        raise InsufficientTrialsError(
            f"{k} errors in {nb} bits cannot resolve the BEP; increase the trial count"
        )
    return McBep(k, nb, errs, cnt, lo, hi, n_trials)

