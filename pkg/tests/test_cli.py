import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dcma.cli import load_config, main
from dcma.errors import ConfigError


def run(tmp_path, command, config=None, *extra):
    args = [command, "--out", str(tmp_path)]
    if config is not None:
        path = tmp_path / f"{command}.json"
        path.write_text(json.dumps(config))
        args += ["--config", str(path)]
    return main(args + list(extra))


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float) if len(rows) > 1 else np.empty((0, len(rows[0])))


SMALL = {"system": {"f0": 10e9, "delta_f": 4e9, "delta_tau": 1e-9}}


# ------------------------------------------------------------ config

def test_load_config_merges_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"system": {"delta_tau": 2e-9}, "codes": [3, -3, 5, -5]}))
    cfg = load_config("mai-dist", str(path), {"seed": 9, "out": str(tmp_path)})
    assert cfg.params.delta_tau == 2e-9 and cfg.params.delta_f == 10e9
    assert cfg.params.n_users == 4 and cfg.seed == 9 and cfg.trials == 200
    assert cfg.out == tmp_path / "mai-dist"


def test_all_odd_key(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"all_odd": 4}))
    cfg = load_config("mai-dist", str(path), {})
    assert list(cfg.codes.orders) == [3, -3, 5, -5]


def test_env_output_root(outdir):
    cfg = load_config("demo-2x2", None, {})
    assert cfg.out == outdir / "demo-2x2"


@pytest.mark.parametrize("bad", [
    {"system": {"delta_f": -1}},
    {"system": {"bogus": 1}},
    {"codes": [3, 3]},
    {"codes": [0, 3]},
    {"system": {"n_users": 3}, "codes": [3, -3]},
    {"ensemble": {"d_min": 5, "d_max": 1}},
    {"ensemble": {"distance": 1}},
])
def test_bad_config_exit_code(tmp_path, bad):
    assert run(tmp_path, "mai-dist", bad) == 2


def test_unreadable_config(tmp_path):
    assert main(["mai-dist", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "x.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config("mai-dist", str(tmp_path / "x.json"), {})


def test_bad_sweep_exit_code(tmp_path):
    assert run(tmp_path, "bep-vs-n", {"sweep": {"n_fft": [1]}}) == 2
    assert run(tmp_path, "bep-vs-n", {"n_values": [1, 2]}) == 2


def test_demo_rejects_fast_data(tmp_path):
    assert run(tmp_path, "demo-2x2", {"data_rate": 1e9}) == 2


# ------------------------------------------------------------ subcommands

def test_waveforms_outputs(tmp_path):
    cfg = dict(SMALL, codes=[3, -3])
    assert run(tmp_path, "waveforms", cfg, "--gnuplot") == 0
    d = tmp_path / "waveforms"
    names = {p.name for p in d.iterdir()}
    assert {"delays.csv", "envelopes.csv", "decoded.csv", "summary.json", "decoded.gp",
            "manifest.json"} <= names
    head, delays = read_csv(d / "delays.csv")
    assert head == ["frequency", "tau_11", "tau_12", "tau_21", "tau_22"]
    # matched cascades have flat delay 2 tau0
    assert np.allclose(delays[:, 1], 2e-9, atol=1e-15)
    s = read_json(d / "summary.json")
    assert s["desired_peak"] == pytest.approx([1.0, 1.0], abs=1e-9)
    man = read_json(d / "manifest.json")
    assert man["seed"] == 0 and "summary.json" in man["outputs"]
    assert man["config"]["codes"] == [3, -3]


def test_single_user_is_one_sinc(tmp_path):
    assert run(tmp_path, "waveforms", dict(SMALL, codes=[3])) == 0
    s = read_json(tmp_path / "waveforms" / "summary.json")
    assert s["mai_peak_mean"] == 0.0
    _, dec = read_csv(tmp_path / "waveforms" / "decoded.csv")
    z = dec[:, 1]
    assert z.max() == pytest.approx(1.0, abs=1e-9)
    t = dec[:, 0]
    far = np.abs(t - t[np.argmax(z)]) > 1.5 / 4e9
    assert z[far].max() < 0.25  # sinc sidelobes only, no second pulse


def test_linear_pair_mai_is_flat(tmp_path):
    cfg = {"system": {"f0": 10e9, "delta_f": 4e9, "delta_tau": 4e-9}, "codes": [1, -1]}
    assert run(tmp_path, "waveforms", cfg) == 0
    head, env = read_csv(tmp_path / "waveforms" / "envelopes.csv")
    t = env[:, 0]
    h12 = env[:, head.index("h_12")]
    level = 1 / np.sqrt(2 * 4e9 * 4e-9)
    # the +-1 cross cascade spreads over [2 tau0 - dtau, 2 tau0 + dtau]
    mid = (t > 8e-9 - 0.7 * 4e-9) & (t < 8e-9 + 0.7 * 4e-9)
    assert np.median(h12[mid]) == pytest.approx(level, rel=0.05)


def test_pair_mai_peak_ordering(tmp_path):
    peaks = {}
    for name, codes in {"odd": [1, -1, 3, -3], "mixed": [1, 2, 3, 4],
                        "even": [2, -2, 4, -4]}.items():
        out = tmp_path / name
        out.mkdir()
        cfg = {"system": {"f0": 10e9, "delta_f": 4e9, "delta_tau": 4e-9}, "codes": codes}
        assert run(out, "waveforms", cfg) == 0
        peaks[name] = read_json(out / "waveforms" / "summary.json")["pair_mai_peak_mean"]
    assert peaks["odd"] < peaks["mixed"] < peaks["even"]


def test_mai_dist_outputs(tmp_path):
    cfg = dict(SMALL, codes=[3, -3], trials=300)
    assert run(tmp_path, "mai-dist", cfg, "--gnuplot") == 0
    d = tmp_path / "mai-dist"
    head, hist = read_csv(d / "histogram.csv")
    assert head == ["bin_left", "bin_right", "count", "density", "gaussian_pdf"]
    assert hist.shape[0] == 50
    assert np.sum(hist[:, 3] * (hist[:, 1] - hist[:, 0])) == pytest.approx(1.0)
    s = read_json(d / "stats.json")
    assert s["sir_analytic"] == 16.0
    assert s["sir_statistical"] == pytest.approx(16.0, rel=0.2)
    assert s["normality"]["n_samples"] == 300


def test_mai_dist_single_user_warns(tmp_path, caplog):
    assert run(tmp_path, "mai-dist", dict(SMALL, codes=[3])) == 0
    s = read_json(tmp_path / "mai-dist" / "stats.json")
    assert s["n_samples"] == 0
    assert "empty" in caplog.text


def test_bep_vs_n_outputs(tmp_path):
    cfg = {"sweep": {"delta_tau": [1e-9, 5e-9]}, "n_values": [2, 4, 12]}
    assert run(tmp_path, "bep-vs-n", cfg) == 0
    head, rows = read_csv(tmp_path / "bep-vs-n" / "bep_vs_n.csv")
    assert head == ["n_users", "delta_tau", "delta_f", "bep_statistical", "bep_closed_form", "eta"]
    assert rows.shape == (6, 6)
    assert np.all(np.isnan(rows[:, 3]))
    assert rows[2, 5] == pytest.approx(12 / (2 * 10))  # N=12, DSBP 10
    assert np.all(np.diff(rows[:3, 4]) > 0)


def test_bep_vs_snr_outputs(tmp_path):
    cfg = {"snr_db": [0, 10, 20, 30]}
    assert run(tmp_path, "bep-vs-snr", cfg) == 0
    head, rows = read_csv(tmp_path / "bep-vs-snr" / "bep_vs_snr.csv")
    assert head == ["snr_db", "bep_n4", "bep_n8", "bep_n12"]
    assert np.all(np.diff(rows[:, 1:], axis=0) < 0)
    need = read_json(tmp_path / "bep-vs-snr" / "snr_for_1e-3.json")
    assert need["12"] is None and need["4"] < need["8"]


def test_demo_ratio(tmp_path):
    assert run(tmp_path, "demo-2x2") == 0
    s = read_json(tmp_path / "demo-2x2" / "summary.json")
    assert s["sir_design"] == 16.0
    assert min(s["peak_to_mai_pep"]) >= 5.0
    head, _ = read_csv(tmp_path / "demo-2x2" / "demo.csv")
    assert head == ["time", "encoded_1", "encoded_2", "received", "decoded_1", "decoded_2"]


def test_reproducible_outputs(tmp_path):
    cfg = dict(SMALL, codes=[3, -3], trials=40)
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        assert run(tmp_path / sub, "mai-dist", cfg, "--seed", "5") == 0
    for name in ("histogram.csv", "stats.json", "manifest.json"):
        assert (tmp_path / "a/mai-dist" / name).read_bytes() == \
               (tmp_path / "b/mai-dist" / name).read_bytes()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dcma.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
    r = subprocess.run([sys.executable, "-m", "dcma.cli", "bep-vs-snr", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert str(tmp_path / "bep-vs-snr" / "manifest.json") in r.stdout
