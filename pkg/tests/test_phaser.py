import csv

import numpy as np
import pytest

from dcma.coding import CodeSet, cascaded_group_delay, delay_swing
from dcma.errors import GridMismatchError
from dcma.phaser import (PhaserBank, Spectrum, Waveform, apply, cascaded_transfer, evaluate,
                         group_delay_from_phase, impulse_response, normalize, transfer)
from dcma.sysconfig import SystemParams, make_grid

P = SystemParams.create(f0=10e9, delta_f=4e9, delta_tau=1e-9, tau0=2e-9, fs=32e9, n_fft=16384)
G = make_grid(P)


def flat(grid):
    return Spectrum(np.ones(grid.n, dtype=complex), grid)


def test_transfer_unit_magnitude_and_zero_out_of_band():
    for m in (1, -1, 3, 19):
        for side in ("tx", "rx"):
            h = transfer(m, side, P, G).values
            assert np.allclose(np.abs(h[G.in_band]), 1.0, rtol=0, atol=1e-14)
            assert np.all(h[~G.in_band] == 0)


def test_matched_product_is_pure_delay():
    f = G.frequencies
    want = np.where(G.in_band, np.exp(-2j * np.pi * f * 2 * P.tau0), 0)
    for m in (1, 3, -3, 19):
        assert np.allclose(cascaded_transfer(m, m, P, G).values, want, rtol=0, atol=1e-9)


def test_apply_matches_eq_chain():
    rng = np.random.default_rng(1)
    x = Spectrum(rng.normal(size=G.n) + 1j * rng.normal(size=G.n), G)
    y = apply(apply(x, transfer(5, "tx", P, G)), transfer(5, "rx", P, G))
    want = x.values * np.where(G.in_band, np.exp(-2j * np.pi * G.frequencies * 2 * P.tau0), 0)
    assert np.allclose(y.values, want, atol=1e-9)
    rect = Spectrum(G.in_band.astype(complex), G)
    assert np.array_equal(apply(x, rect).values, np.where(G.in_band, x.values, 0))


def test_grid_mismatch():
    other = make_grid(P.replace(n_fft=8192))
    with pytest.raises(GridMismatchError):
        apply(flat(G), flat(other))
    with pytest.raises(GridMismatchError):
        flat(G) + flat(other)
    with pytest.raises(GridMismatchError):
        Spectrum(np.ones(3, dtype=complex), G)


def test_cascade_phase_at_band_start():
    h = cascaded_transfer(3, -3, P, G).values[G.band]
    f_lo = G.frequencies[G.band][0]
    # only the linear tau0 terms remain at the lower edge (dispersive phases vanish there)
    assert np.angle(h[0] * np.exp(2j * np.pi * f_lo * 2 * P.tau0)) == pytest.approx(0, abs=0.01)


@pytest.mark.parametrize("rx, tx", [(3, 19), (1, -1), (3, -3), (2, 4), (7, 7)])
def test_group_delay_by_phase_differencing(rx, tx):
    f_mid, tau = group_delay_from_phase(cascaded_transfer(rx, tx, P, G))
    want = cascaded_group_delay(rx, tx, P, f_mid)
    assert np.max(np.abs(tau - want)) < 1e-3 * P.delta_tau


def test_matched_peak_2df_at_2tau0():
    w = impulse_response(cascaded_transfer(3, 3, P, G))
    env = np.abs(w.samples)
    k = int(np.argmax(env))
    assert abs(w.times[k] - 2 * P.tau0) <= w.dt
    assert env[k] == pytest.approx(2 * P.delta_f, rel=1e-12)


def test_matched_matches_sinc_carrier():
    w = impulse_response(cascaded_transfer(-5, -5, P, G))
    u = w.times - 2 * P.tau0
    sel = np.abs(u) < 0.5e-9
    ref = 2 * P.delta_f * np.sinc(P.delta_f * u[sel])
    assert np.max(np.abs(np.abs(w.samples[sel]) - np.abs(ref))) < 2e-4 * 2 * P.delta_f
    assert np.max(np.abs(w.real[sel] - ref * np.cos(2 * np.pi * P.f0 * u[sel]))) \
        < 2e-4 * 2 * P.delta_f


def test_normalize():
    w = normalize(impulse_response(cascaded_transfer(3, 3, P, G)), P)
    assert np.abs(w.samples).max() == pytest.approx(1.0, rel=1e-12)
    z = normalize(Waveform(np.zeros(8, dtype=complex), P.fs), P)
    assert not np.any(z.samples)


def test_normalized_energy():
    for rx, tx in [(3, 3), (3, -3), (1, -1), (3, 19)]:
        w = normalize(impulse_response(cascaded_transfer(rx, tx, P, G)), P)
        assert w.energy() == pytest.approx(1 / (2 * P.delta_f), rel=1e-9)


def test_parseval_all_pairs():
    codes = CodeSet((1, -1, 2, 3, -3, 19))
    bank = PhaserBank(P, codes, G)
    for i in range(len(codes)):
        for k in range(len(codes)):
            e = impulse_response(bank.cascade(i, k)).energy()
            assert e == pytest.approx(2 * P.delta_f, rel=1e-9)


def test_bank_matches_direct_and_is_read_only():
    bank = PhaserBank(P, CodeSet((3, -3)), G)
    assert np.array_equal(bank.cascade(0, 1).values, cascaded_transfer(3, -3, P, G).values)
    with pytest.raises(ValueError):
        bank.tx(0).values[0] = 1


def test_chirp_spread_near_delta_tau():
    # -20 dB span of an encoded pulse, frozen from this grid; rect-edge ringing
    # widens it beyond delta_tau and the excess shrinks as DSBP grows
    spans = {}
    for dtau in (1e-9, 4e-9):
        p = P.replace(delta_tau=dtau, tau0=2 * dtau)
        g = make_grid(p)
        env = np.abs(impulse_response(apply(flat(g), transfer(3, "tx", p, g))).samples)
        idx = np.flatnonzero(env >= 0.1 * env.max())
        spans[dtau] = (idx[-1] - idx[0]) * g.dt / dtau
    assert spans[1e-9] == pytest.approx(2.1875, abs=0.01)
    assert spans[4e-9] == pytest.approx(1.5625, abs=0.01)
    assert 1.0 < spans[4e-9] < spans[1e-9]


def test_linear_pair_flat_envelope():
    w = normalize(impulse_response(cascaded_transfer(1, -1, P, G)), P)
    u = w.times - 2 * P.tau0
    core = np.abs(w.samples[np.abs(u) < 0.85 * P.delta_tau])
    # flat level A with A^2 * 2 dtau / 2 = 1 / (2 df)
    level = 1 / np.sqrt(2 * P.dsbp)
    assert core.mean() == pytest.approx(level, rel=0.05)
    assert core.std() / core.mean() < 0.2


def _window_fraction(rx, tx, p, g, margin):
    w = normalize(impulse_response(cascaded_transfer(rx, tx, p, g)), p)
    tau = cascaded_group_delay(rx, tx, p, g.frequencies[g.band])
    e2 = np.abs(w.samples) ** 2
    sel = (w.times >= tau.min() - margin) & (w.times <= tau.max() + margin)
    return e2[sel].sum() / e2.sum(), tau.max() - tau.min()


PAIRS = [(3, -3), (3, 19), (1, -1), (2, 4)]


@pytest.mark.xfail(strict=True, reason="sinc tails of the rect band hold ~3-5% of the energy "
                                       "beyond 2/delta_f from the delay extremes")
def test_mai_spread_99_percent_in_swing_plus_4_over_df():
    for rx, tx in PAIRS:
        frac, _ = _window_fraction(rx, tx, P, G, 2 / P.delta_f)
        assert frac >= 0.99


def test_mai_spread_measured():
    for rx, tx in PAIRS:
        frac, swing = _window_fraction(rx, tx, P, G, 2 / P.delta_f)
        assert swing == pytest.approx(delay_swing(rx, tx, P), rel=1e-3)
        assert frac >= 0.95
        frac, _ = _window_fraction(rx, tx, P, G, 10 / P.delta_f)
        assert frac >= 0.99


def test_evaluate_matches_fft_samples():
    spec = cascaded_transfer(3, -3, P, G)
    w = impulse_response(spec)
    idx = np.array([0, 17, 1000, 5000, 16383])
    assert np.allclose(evaluate(spec, w.times[idx]), w.samples[idx], atol=1e-6 * 2 * P.delta_f)
    t = w.times[100:3000:37]  # evenly spaced path
    assert np.allclose(evaluate(spec, t), w.samples[100:3000:37], atol=1e-6 * 2 * P.delta_f)


def test_impulse_response_time_origin():
    spec = cascaded_transfer(3, 3, P, G)
    w0 = impulse_response(spec)
    w1 = impulse_response(spec, t0=1e-9)
    shift = int(round(1e-9 * P.fs))
    assert np.allclose(w1.samples[:-shift], w0.samples[shift:], atol=1e-6 * 2 * P.delta_f)


def test_csv_dumps(tmp_path):
    spec = cascaded_transfer(3, -3, P, G)
    spec.to_csv(tmp_path / "s.csv")
    impulse_response(spec).to_csv(tmp_path / "w.csv")
    for name, col in (("s.csv", "frequency"), ("w.csv", "time")):
        with open(tmp_path / name) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["index", col, "real", "imag", "magnitude"]
        assert len(rows) == G.n + 1
