"""Command-line experiment runner.

Each subcommand regenerates the data behind one kind of figure and writes
CSV files, a JSON summary and a ``manifest.json`` (resolved configuration,
seed, library version) into the output directory. No plotting happens
here; ``--gnuplot`` adds a small script next to the data.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (window
overflow, unresolvable Monte Carlo estimate), 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (bep, bep_analytic, from_db, gaussian_pdf, mai_stats, normality_test,
                       sigma_for_snr, sir_analytic, sir_statistical, snr_for_bep,
                       spectral_efficiency)
from .channel import ChannelEnsembleParams
from .coding import CodeSet, all_odd_code_set, cascaded_group_delay
from .errors import (ConfigError, DomainError, GridMismatchError, InsufficientTrialsError,
                     WindowOverflowError)
from .link import dirac_train, dook_modulate
from .montecarlo import bep_monte_carlo, bep_random_gain, sample_mai
from .phaser import PhaserBank, Spectrum, impulse_response
from .sysconfig import SystemParams, make_grid

log = logging.getLogger("dcma")

OUT_ENV = "DCMA_OUT"

# Per-experiment defaults; any key may be overridden by the --config file.
DEFAULTS = {
    "waveforms": {"system": {"f0": 10e9, "delta_f": 4e9, "delta_tau": 4e-9},
                  "codes": [1, 2, 3, 4]},
    "mai-dist": {"system": {"f0": 10e9, "delta_f": 10e9, "delta_tau": 10e-9},
                 "codes": [3, -3], "trials": 200, "bins": 50},
    "bep-vs-n": {"system": {"f0": 10e9, "delta_f": 10e9, "delta_tau": 10e-9},
                 "n_values": list(range(2, 17)), "sweep": {"delta_tau": [1e-9, 5e-9, 10e-9]},
                 "trials": 0, "realizations": 10},
    "bep-vs-snr": {"system": {"f0": 10e9, "delta_f": 10e9, "delta_tau": 10e-9},
                   "n_values": [4, 8, 12], "snr_db": list(range(0, 31)), "trials": 0},
    "demo-2x2": {"system": {"f0": 10e9, "delta_f": 4e9, "delta_tau": 1e-9},
                 "codes": [1, -1], "data_rate": 200e6, "xor_delay": 3e-9,
                 "n_data_bits": 16, "tx_offsets": [0.0, 1.3e-9]},
}


@dataclass
class ExperimentConfig:
    """Resolved experiment settings."""

    name: str
    params: SystemParams
    codes: CodeSet | None
    ensemble: ChannelEnsembleParams
    trials: int
    out: Path
    seed: int
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "system": self.params.to_dict(),
            "codes": None if self.codes is None else list(self.codes.orders),
            "ensemble": self.ensemble.__dict__,
            "trials": self.trials,
            "seed": self.seed,
            "extra": self.extra,
        }


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_config(name: str, path: str | None, overrides: dict) -> ExperimentConfig:
    raw = json.loads(json.dumps(DEFAULTS[name]))
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        raw = _merge(raw, user)
    raw.update({k: v for k, v in overrides.items() if v is not None})

    codes = None
    if "all_odd" in raw:
        codes = all_odd_code_set(int(raw.pop("all_odd")))
    elif raw.get("codes") is not None:
        codes = CodeSet(tuple(raw.pop("codes")))
    else:
        raw.pop("codes", None)
    system = dict(raw.pop("system"))
    if codes is not None:
        system.setdefault("n_users", len(codes))
    params = SystemParams.from_dict(system)
    if codes is not None and params.n_users != len(codes):
        raise ConfigError(f"n_users={params.n_users} but {len(codes)} codes")
    ens = ChannelEnsembleParams.from_dict(raw.pop("ensemble", {}))
    seed = int(raw.pop("seed", 0))
    trials = int(raw.pop("trials", 0))
    workers = int(raw.pop("workers", 1))
    out = Path(raw.pop("out", None) or os.environ.get(OUT_ENV) or "dcma-out") / name
    return ExperimentConfig(name, params, codes, ens, trials, out, seed, workers, raw)


# ------------------------------------------------------------------ writers

def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, default=_jsonable))
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer, np.floating)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not serializable: {type(x)}")


def write_gnuplot(path: Path, csv_name: str, x_col: int, y_cols: list[int], labels: list[str],
                  logy: bool = False) -> Path:
    lines = ["set datafile separator ','", "set key autotitle columnhead"]
    if logy:
        lines.append("set logscale y")
    plots = [f"'{csv_name}' using {x_col}:{c} with lines title '{t}'"
             for c, t in zip(y_cols, labels)]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_manifest(cfg: ExperimentConfig, outputs: list[Path]) -> Path:
    return write_json(cfg.out / "manifest.json", {
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "outputs": sorted(p.name for p in outputs),
    })


# -------------------------------------------------------------- experiments

def run_waveforms(cfg: ExperimentConfig, gnuplot: bool = False) -> list[Path]:
    """Cascaded delay profiles and decoded envelopes, synchronized shorted links."""
    p, codes = cfg.params, cfg.codes
    grid = make_grid(p)
    bank = PhaserBank(p, codes, grid)
    n = len(codes)
    scale = 1.0 / (2 * p.delta_f)
    f = grid.frequencies[grid.band]
    pairs = [(i, k) for i in range(n) for k in range(n)]

    delay_cols = [cascaded_group_delay(codes[i], codes[k], p, f) for i, k in pairs]
    out = [write_csv(cfg.out / "delays.csv",
                     ["frequency"] + [f"tau_{i + 1}{k + 1}" for i, k in pairs],
                     zip(f, *delay_cols))]

    env = {}
    for i, k in pairs:
        env[i, k] = np.abs(impulse_response(bank.cascade(i, k).scaled(scale)).samples)
    z_env, x_env, x_peak, pair_peak = [], [], [], []
    for i in range(n):
        x = np.zeros(grid.n, dtype=complex)
        for k in range(n):
            if k != i:
                x += bank.cascade(i, k).values * scale
                pair_peak.append(env[i, k].max())
        xw = impulse_response(Spectrum(x, grid)).samples
        zw = impulse_response(bank.cascade(i, i).scaled(scale)).samples + xw
        z_env.append(np.abs(zw))
        x_env.append(np.abs(xw))
        x_peak.append(float(np.abs(xw).max()))
    t = grid.times()
    out.append(write_csv(cfg.out / "envelopes.csv",
                         ["time"] + [f"h_{i + 1}{k + 1}" for i, k in pairs],
                         zip(t, *[env[pk] for pk in pairs])))
    out.append(write_csv(cfg.out / "decoded.csv",
                         ["time"] + [f"z_{i + 1}" for i in range(n)] + [f"x_{i + 1}" for i in range(n)],
                         zip(t, *z_env, *x_env)))
    summary = {
        "codes": list(codes.orders),
        "mai_peak_per_receiver": x_peak,
        "mai_peak_mean": float(np.mean(x_peak)) if n > 1 else 0.0,
        "pair_mai_peak_mean": float(np.mean(pair_peak)) if pair_peak else 0.0,
        "desired_peak": [float(env[i, i].max()) for i in range(n)],
    }
    out.append(write_json(cfg.out / "summary.json", summary))
    if gnuplot:
        out.append(write_gnuplot(cfg.out / "decoded.gp", "decoded.csv", 1,
                                 list(range(2, 2 + 2 * n)),
                                 [f"|z_{i + 1}|" for i in range(n)] + [f"|x_{i + 1}|" for i in range(n)]))
    return out


def run_mai_dist(cfg: ExperimentConfig, gnuplot: bool = False) -> list[Path]:
    """Worst-case MAI histogram, Gaussian fit and variance."""
    p, codes = cfg.params, cfg.codes
    bins = int(cfg.extra.get("bins", 50))
    trials = max(cfg.trials, 1)
    if len(codes) < 2:
        log.warning("no interferers: the MAI histogram is empty")
        out = [write_csv(cfg.out / "histogram.csv",
                         ["bin_left", "bin_right", "count", "density", "gaussian_pdf"], [])]
        out.append(write_json(cfg.out / "stats.json", {"n_samples": 0, "warning": "no interferers"}))
        return out
    samples = sample_mai(p, codes, cfg.ensemble, trials, seed=cfg.seed, workers=cfg.workers)
    st = mai_stats(samples.pooled, bins=bins)
    edges, counts = st.histogram
    width = np.diff(edges)
    density = counts / (st.n_samples * width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    pdf = gaussian_pdf(centers, st) if st.sigma_sq_hat > 0 else np.zeros_like(centers)
    out = [write_csv(cfg.out / "histogram.csv",
                     ["bin_left", "bin_right", "count", "density", "gaussian_pdf"],
                     zip(edges[:-1], edges[1:], counts, density, pdf))]
    norm = None
    if samples.single.size >= 5 * 50:
        norm = normality_test(samples.single, codes=codes).to_dict()
    if not st.reliable:
        log.warning("only %d samples; moments are indicative", st.n_samples)
    res = {
        "mu_hat": st.mu_hat,
        "sigma_sq_hat": st.sigma_sq_hat,
        "sir_statistical": sir_statistical(st) if st.sigma_sq_hat > 0 else None,
        "sir_analytic": sir_analytic(p, len(codes),
                                     0.5 * (cfg.ensemble.alpha_min_sq + cfg.ensemble.alpha_max_sq)),
        "n_samples": st.n_samples,
        "normality": norm,
        "histogram": {"edges": edges, "counts": counts},
    }
    out.append(write_json(cfg.out / "stats.json", res))
    if gnuplot:
        out.append(write_gnuplot(cfg.out / "histogram.gp", "histogram.csv", 1, [4, 5],
                                 ["MAI density", "normal fit"]))
    return out


def _sweep(cfg: ExperimentConfig) -> tuple[str, list[float]]:
    sweep = cfg.extra.get("sweep", {})
    if len(sweep) != 1 or next(iter(sweep)) not in ("delta_tau", "delta_f"):
        raise ConfigError("sweep must hold exactly one of 'delta_tau' or 'delta_f'")
    key, values = next(iter(sweep.items()))
    return key, [float(v) for v in values]


def run_bep_vs_n(cfg: ExperimentConfig, gnuplot: bool = False) -> list[Path]:
    """Noiseless BEP against N for all-odd sets.

    ``bep_closed_form`` uses the closed-form SIR with the ensemble's mean
    intensity; ``bep_statistical`` (when trials > 0) measures each
    receiver's MAI variance by simulation.
    """
    key, values = _sweep(cfg)
    ns = [int(n) for n in cfg.extra.get("n_values", [])]
    if not ns or min(ns) < 2:
        raise ConfigError("n_values must be integers >= 2")
    mean_sq = 0.5 * (cfg.ensemble.alpha_min_sq + cfg.ensemble.alpha_max_sq)
    realizations = int(cfg.extra.get("realizations", 10))
    if cfg.ensemble.alpha_min_sq == cfg.ensemble.alpha_max_sq:
        realizations = 1
    rows = []
    for v in values:
        for n in ns:
            p = SystemParams.create(f0=cfg.params.f0, n_users=n, fs=cfg.params.fs,
                                    **{"delta_f": cfg.params.delta_f,
                                       "delta_tau": cfg.params.delta_tau, key: v})
            closed = bep_analytic(p, n, mean_sq)
            stat = float("nan")
            if cfg.trials > 0:
                r = bep_random_gain(p, all_odd_code_set(n), cfg.ensemble, realizations,
                                    cfg.trials, seed=cfg.seed, workers=cfg.workers)
                stat = r.bep_statistical
            rows.append((n, p.delta_tau, p.delta_f, stat, closed, spectral_efficiency(n, p)))
    out = [write_csv(cfg.out / "bep_vs_n.csv",
                     ["n_users", "delta_tau", "delta_f", "bep_statistical", "bep_closed_form",
                      "eta"], rows)]
    if gnuplot:
        out.append(write_gnuplot(cfg.out / "bep_vs_n.gp", "bep_vs_n.csv", 1, [4, 5],
                                 ["statistical SIR", "closed-form SIR"], logy=True))
    return out


def run_bep_vs_snr(cfg: ExperimentConfig, gnuplot: bool = False) -> list[Path]:
    """BEP against SNR for several N, plus optional Monte Carlo columns."""
    p0 = cfg.params
    ns = [int(n) for n in cfg.extra.get("n_values", [])]
    snrs = [float(s) for s in cfg.extra.get("snr_db", [])]
    if not ns or not snrs:
        raise ConfigError("n_values and snr_db must be non-empty")
    header = ["snr_db"] + [f"bep_n{n}" for n in ns]
    mc_ns = [int(n) for n in cfg.extra.get("monte_carlo_n", [])] if cfg.trials > 0 else []
    header += [f"mc_bep_n{n}" for n in mc_ns]
    rows = []
    for s in snrs:
        snr = float(from_db(s))
        row = [s]
        for n in ns:
            row.append(bep_analytic(p0.replace(n_users=n), n, snr=snr))
        for n in mc_ns:
            p = SystemParams.create(f0=p0.f0, delta_f=p0.delta_f, delta_tau=p0.delta_tau,
                                    n_users=n, fs=p0.fs)
            p = p.replace(noise_sigma=sigma_for_snr(p, snr))
            r = bep_monte_carlo(p, all_odd_code_set(n), cfg.ensemble, cfg.trials,
                                seed=cfg.seed, worst_case=True, workers=cfg.workers)
            row.append(r.estimate)
        rows.append(row)
    out = [write_csv(cfg.out / "bep_vs_snr.csv", header, rows)]
    need = {}
    for n in ns:
        req = snr_for_bep(1e-3, sir_analytic(p0, n))
        need[str(n)] = None if np.isinf(req) else float(10 * np.log10(req))
    out.append(write_json(cfg.out / "snr_for_1e-3.json", need))
    if gnuplot:
        out.append(write_gnuplot(cfg.out / "bep_vs_snr.gp", "bep_vs_snr.csv", 1,
                                 list(range(2, 2 + len(ns))), [f"N={n}" for n in ns], logy=True))
    return out


def run_demo_2x2(cfg: ExperimentConfig, gnuplot: bool = False) -> list[Path]:
    """Idealized two-pair link with edge-triggered (DOOK) pulses.

    Reports the ratio of the decoded desired peak intensity to the peak
    envelope power of the decoded MAI, and the design SIR.
    """
    p, codes = cfg.params, cfg.codes
    if len(codes) != 2:
        raise ConfigError("demo-2x2 needs exactly two codes")
    rate = float(cfg.extra["data_rate"])
    period = 1.0 / rate
    if period < p.bit_period:
        raise ConfigError("data period shorter than the dispersion spread 2*delta_tau")
    xor_delay = float(cfg.extra["xor_delay"])
    n_bits = int(cfg.extra["n_data_bits"])
    offsets = [float(x) for x in cfg.extra["tx_offsets"]]
    rng = np.random.default_rng(cfg.seed)
    data = [rng.integers(0, 2, n_bits) for _ in range(2)]
    for d in data:
        d[0] = 1  # start with an edge so every user transmits
    instants = [dook_modulate(d, period, xor_delay) + off + p.delta_tau
                for d, off in zip(data, offsets)]
    span = n_bits * period + max(offsets) + 2 * p.tau0 + 3 * p.delta_tau + period
    p = p.with_window(span)
    grid = make_grid(p)
    bank = PhaserBank(p, codes, grid)
    scale = 1.0 / (2 * p.delta_f)
    pulses = [dirac_train(t, grid) for t in instants]
    enc = [pulses[k] * bank.tx(k) for k in range(2)]
    rx_sum = enc[0] + enc[1]
    t = grid.times()
    cols, names = [], []
    for k in range(2):
        cols.append(np.abs(impulse_response(enc[k].scaled(scale)).samples) ** 2)
        names.append(f"encoded_{k + 1}")
    cols.append(np.abs(impulse_response(rx_sum.scaled(scale)).samples) ** 2)
    names.append("received")
    ratios = []
    for i in range(2):
        desired = impulse_response((enc[i] * bank.rx(i)).scaled(scale)).samples
        mai = impulse_response((enc[1 - i] * bank.rx(i)).scaled(scale)).samples
        cols.append(np.abs(desired + mai) ** 2)
        names.append(f"decoded_{i + 1}")
        ratios.append(float(np.max(np.abs(desired) ** 2) / np.max(np.abs(mai) ** 2)))
    out = [write_csv(cfg.out / "demo.csv", ["time"] + names, zip(t, *cols))]
    summary = {
        "sir_design": sir_analytic(cfg.params, 2),
        "peak_to_mai_pep": ratios,
        "data": [d.tolist() for d in data],
        "pulse_instants": [x.tolist() for x in instants],
        "bep_design": bep([sir_analytic(cfg.params, 2)]).average,
    }
    out.append(write_json(cfg.out / "summary.json", summary))
    if gnuplot:
        out.append(write_gnuplot(cfg.out / "demo.gp", "demo.csv", 1, list(range(2, 2 + len(names))),
                                 names))
    return out


RUNNERS = {
    "waveforms": run_waveforms,
    "mai-dist": run_mai_dist,
    "bep-vs-n": run_bep_vs_n,
    "bep-vs-snr": run_bep_vs_snr,
    "demo-2x2": run_demo_2x2,
}

HELP = {
    "waveforms": "cascaded delay profiles and decoded envelopes (synchronized, shorted links)",
    "mai-dist": "worst-case MAI histogram with Gaussian fit and sampled variance",
    "bep-vs-n": "noiseless BEP versus number of users for all-odd code sets",
    "bep-vs-snr": "BEP versus SNR for several user counts",
    "demo-2x2": "idealized 2x2 link with DOOK pulses and the peak-to-MAI-PEP ratio",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file; keys override the experiment defaults")
    common.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--workers", type=int, help="worker processes (default 1)")
    common.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./dcma-out)")
    common.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    parser = argparse.ArgumentParser(
        prog="dcma",
        description="Dispersion code multiple access experiments.",
        epilog=(
            "System parameters use SI units. Unless given, fs is the smallest "
            "power-of-two multiple of 1 GHz covering twice the upper band edge, "
            "n_fft the smallest power of two >= 4096 whose window holds two bit "
            "periods (grown automatically for long bit trains), and tau0 = delta_tau."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {"seed": args.seed, "trials": args.trials, "out": args.out,
                 "workers": args.workers}
    try:
        cfg = load_config(args.command, args.config, overrides)
        cfg.out.mkdir(parents=True, exist_ok=True)
        outputs = RUNNERS[args.command](cfg, gnuplot=args.gnuplot)
        outputs.append(write_manifest(cfg, outputs))
    except (ConfigError, DomainError, GridMismatchError, TypeError, KeyError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    except (WindowOverflowError, InsufficientTrialsError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 1
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
