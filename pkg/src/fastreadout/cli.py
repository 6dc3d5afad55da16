"""Command-line front end.

Subcommands: derive, signal, rate, simulate, analyze, optimize, calibrate.
Configuration comes from a flat ``key = value`` file; any key can be
overridden on the command line with ``--set key=value`` (overrides win).
Every output file starts with '#'-prefixed header lines echoing the full
resolved configuration and seed, so a run is reproducible from its outputs
alone. Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, calib, optimize, shots
from .config import load_config, parse_bool, parse_int, parse_quantity
from .dynamics import (PulseEnvelope, full_model_signal, integrated_rate,
                       mean_quadrature_traces, qss_signal, to_sqrt_mhz)
from .errors import ConfigError, FastReadoutError
from .params import DeviceParams, derive

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

# key -> (type tag, default); quantities accept unit suffixes
SCHEMA = {
    # device
    "g": ("quantity", None),
    "omega_q": ("quantity", None),
    "omega_r": ("quantity", None),
    "omega_p": ("quantity", None),
    "alpha": ("quantity", None),
    "J": ("quantity", None),
    "Q_p": ("float", None),
    "T1": ("quantity", None),
    "eta": ("float", None),
    "n_drive": ("float", None),
    "delta_p": ("quantity", "none"),
    "gamma_int": ("quantity", 0.0),
    "omega_d": ("quantity", "none"),
    "dispersive_guard": ("float", 10.0),
    # pulse
    "pulse_kind": ("str", "gated"),
    "pulse_amplitude": ("float", 1.0),
    "boost_factor": ("float", 2.5),
    "boost_duration": ("quantity", 4e-9),
    "pulse_duration": ("quantity", 300e-9),
    # shots
    "n_shots": ("int", 20000),
    "p_thermal": ("float", 0.003),
    "gamma_mix_up": ("quantity", 0.0),
    "gamma_mix_down": ("quantity", 0.0),
    "preselect": ("bool", False),
    "prep_error": ("float", 0.0),
    "dt_bin": ("quantity", 8e-9),
    "measure_duration": ("quantity", "none"),
    "premeasure_duration": ("quantity", 152e-9),
    "premeasure_window": ("quantity", 48e-9),
    "premeasure_amplitude": ("float", 1.0),
    "reset_gap": ("quantity", 100e-9),
    # analysis
    "tau": ("quantity", 56e-9),
    "amp_bandwidth": ("quantity", 27e6),
    "bin_mode": ("str", "mean"),
    "delay_compensate": ("bool", True),
    "grid_step": ("quantity", 0.5e-9),
    # optimize
    "ratio_tau_grid": ("floats", (2.0, 4.5, 8.0, 12.0, 20.0)),
    "power_grid": ("floats", (1.0, 1.5, 2.0, 2.5, 3.5, 5.0)),
    "mix_coeff": ("quantity", optimize.DEFAULT_MIX_COEFF),
    # run control
    "seed": ("int", 0),
    "output_dir": ("str", "."),
}

_DEVICE_KEYS = ("g", "omega_q", "omega_r", "omega_p", "alpha", "J", "Q_p",
                "T1", "eta", "n_drive", "delta_p", "gamma_int", "omega_d",
                "dispersive_guard")


def _parse_value(key: str, raw):
    kind, _ = SCHEMA[key]
    if isinstance(raw, (int, float, bool, tuple)) or raw is None:
        return raw
    text = str(raw).strip()
    if kind == "quantity":
        if text.lower() == "none":
            return None
        return parse_quantity(text)
    if kind == "float":
        return float(parse_quantity(text))
    if kind == "int":
        return parse_int(text)
    if kind == "bool":
        return parse_bool(text)
    if kind == "floats":
        try:
            return tuple(float(v) for v in text.split(","))
        except ValueError as exc:
            raise ConfigError(f"cannot parse list value {text!r} for {key}") from exc
    return text


def resolve_config(path: str | None, overrides) -> dict:
    """Merge file values, defaults, and --set overrides into a typed dict."""
    raw: dict = {}
    if path is not None:
        raw.update(load_config(path))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    out = {}
    for key, (kind, default) in SCHEMA.items():
        if key in raw:
            out[key] = _parse_value(key, raw[key])
        elif default == "none":
            out[key] = None
        else:
            out[key] = default
    missing = [k for k in _DEVICE_KEYS
               if out[k] is None and SCHEMA[k][1] is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return out


def build_device(cfg: dict) -> DeviceParams:
    return DeviceParams(
        g=cfg["g"], omega_q=cfg["omega_q"], omega_r=cfg["omega_r"],
        omega_p=cfg["omega_p"], alpha=cfg["alpha"], J=cfg["J"],
        Q_p=cfg["Q_p"], T1=cfg["T1"], eta=cfg["eta"], n_drive=cfg["n_drive"],
        delta_p=cfg["delta_p"], gamma_int=cfg["gamma_int"],
        omega_d=cfg["omega_d"], dispersive_guard=cfg["dispersive_guard"],
    )


def build_pulse(cfg: dict) -> PulseEnvelope:
    return PulseEnvelope(kind=cfg["pulse_kind"], amplitude=cfg["pulse_amplitude"],
                         boost_factor=cfg["boost_factor"],
                         boost_duration=cfg["boost_duration"],
                         total_duration=cfg["pulse_duration"])


def build_shot_config(cfg: dict) -> shots.ShotConfig:
    return shots.ShotConfig(
        n_shots=cfg["n_shots"], master_seed=cfg["seed"], dt_bin=cfg["dt_bin"],
        p_thermal=cfg["p_thermal"], gamma_mix_up=cfg["gamma_mix_up"],
        gamma_mix_down=cfg["gamma_mix_down"], preselect=cfg["preselect"],
        prep_error=cfg["prep_error"], measure_duration=cfg["measure_duration"],
        premeasure_duration=cfg["premeasure_duration"],
        premeasure_window=cfg["premeasure_window"],
        premeasure_amplitude=cfg["premeasure_amplitude"],
        reset_gap=cfg["reset_gap"],
    )


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.9g" % v
    if isinstance(v, tuple):
        return ",".join("%.9g" % x for x in v)
    if v is None:
        return "none"
    return str(v)


def _header_lines(cfg: dict, command: str) -> list[str]:
    lines = [f"# command = {command}"]
    for key in sorted(cfg):
        lines.append(f"# {key} = {_fmt(cfg[key])}")
    return lines


def _write_report(path: Path, cfg: dict, command: str, items):
    with open(path, "w") as fh:
        for line in _header_lines(cfg, command):
            fh.write(line + "\n")
        for key, value in items:
            fh.write(f"{key} = {_fmt(value)}\n")


def _write_csv(path: Path, cfg: dict, command: str, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in _header_lines(cfg, command):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _bin_centers_and_index(cfg: dict, n_bins: int):
    centers = (np.arange(n_bins) + 0.5) * cfg["dt_bin"]
    idx = np.round(centers / cfg["grid_step"]).astype(int)
    return centers, idx


def cmd_derive(cfg: dict, args) -> int:
    device = build_device(cfg)
    d = derive(device)
    items = [
        ("chi_Hz", d.chi), ("n_crit", d.n_crit), ("kappa_eff_Hz", d.kappa_eff),
        ("kappa_p_Hz", d.kappa_p), ("lambda_mix", d.lambda_mix),
        ("delta_Hz", d.delta),
    ]
    out = Path(cfg["output_dir"]) / "derived.txt"
    _write_report(out, cfg, "derive", items)
    for key, value in items:
        print(f"{key} = {_fmt(value)}")
    return 0


def _fine_times(cfg: dict):
    return np.arange(0.0, cfg["pulse_duration"], cfg["grid_step"])


def cmd_signal(cfg: dict, args) -> int:
    device = build_device(cfg)
    d = derive(device)
    pulse = build_pulse(cfg)
    times = _fine_times(cfg)
    full = full_model_signal(device, pulse, times, derived=d, method="exact")
    qt = mean_quadrature_traces(device, pulse, times, derived=d, method="exact")
    qss = qss_signal(device.n_drive, d.chi, d.kappa_eff, times)
    rows = [
        (t * 1e9, s, qg, qe, "full")
        for t, s, qg, qe in zip(times, to_sqrt_mhz(full.values),
                                qt.q_g, qt.q_e)
    ]
    rows += [
        (t * 1e9, s, float("nan"), float("nan"), "QSS")
        for t, s in zip(times, to_sqrt_mhz(qss))
    ]
    _write_csv(Path(cfg["output_dir"]) / "signal.csv", cfg, "signal",
               ("t_ns", "S_sqrtMHz", "Qg", "Qe", "model"), rows)
    return 0


def cmd_rate(cfg: dict, args) -> int:
    device = build_device(cfg)
    pulse = build_pulse(cfg)
    times = _fine_times(cfg)
    trace = full_model_signal(device, pulse, times, method="exact")
    taus = np.arange(cfg["dt_bin"], times[-1], cfg["dt_bin"])
    rows = [(tau * 1e9, integrated_rate(trace, tau)) for tau in taus]
    _write_csv(Path(cfg["output_dir"]) / "rate.csv", cfg, "rate",
               ("tau_ns", "s_tau"), rows)
    return 0


def cmd_simulate(cfg: dict, args) -> int:
    device = build_device(cfg)
    pulse = build_pulse(cfg)
    shot_cfg = build_shot_config(cfg)
    batch = shots.simulate_batch(device, pulse, shot_cfg)
    out_dir = Path(cfg["output_dir"])
    if args.wide:
        n_bins = len(batch[0].samples)
        cols = ["shot_id", "prep", "preselect_value"] + \
               [f"q{k}" for k in range(n_bins)]
        rows = [
            [i, rec.prep,
             float("nan") if rec.preselect_value is None else rec.preselect_value,
             *rec.samples]
            for i, rec in enumerate(batch)
        ]
        _write_csv(out_dir / "shots.csv", cfg, "simulate", cols, rows)
    else:
        rows = []
        for i, rec in enumerate(batch):
            for k, q in enumerate(rec.samples):
                rows.append((i, rec.prep, (k + 0.5) * cfg["dt_bin"] * 1e9, q))
        _write_csv(out_dir / "shots.csv", cfg, "simulate",
                   ("shot_id", "prep", "t_ns", "Q"), rows)
    if shot_cfg.preselect:
        kept, rejected = shots.run_preselection(device, shot_cfg, batch)
        _write_report(out_dir / "preselect_summary.txt", cfg, "simulate",
                      [("n_shots", len(batch)), ("n_kept", len(kept)),
                       ("rejected_fraction", rejected)])
    return 0


def _read_shot_csv(path: str):
    """Read wide-format shot CSV back into (prep, samples, preselect) arrays."""
    preps, samples, presel = [], [], []
    with open(path) as fh:
        reader = csv.reader(r for r in fh if not r.startswith("#"))
        header = next(reader)
        if header[:2] != ["shot_id", "prep"]:
            raise ConfigError("analyze expects the wide shot CSV format")
        for row in reader:
            preps.append(row[1])
            presel.append(float(row[2]))
            samples.append([float(v) for v in row[3:]])
    records = []
    for p, s, pre in zip(preps, samples, presel):
        rec = shots.ShotRecord(prep=p, samples=np.asarray(s),
                               preselect_value=None if math.isnan(pre) else pre)
        records.append(rec)
    return records


def cmd_analyze(cfg: dict, args) -> int:
    if args.input is None:
        raise ConfigError("analyze requires --input shots.csv")
    device = build_device(cfg)
    d = derive(device)
    pulse = build_pulse(cfg)
    records = _read_shot_csv(args.input)
    n_bins = len(records[0].samples)
    times = np.arange(0.0, n_bins * cfg["dt_bin"] + cfg["grid_step"],
                      cfg["grid_step"])
    qt = mean_quadrature_traces(device, pulse, times, derived=d, method="exact")
    centers, idx = _bin_centers_and_index(cfg, n_bins)
    weights = analysis.build_weights(centers, qt.q_g[idx], qt.q_e[idx], cfg["tau"])
    q, prep = analysis.integrate_batch(records, weights, d.kappa_p)
    fit, bin_centers, hist_g, hist_e = analysis.fit_shot_histograms(q, prep)
    budget = analysis.error_budget(q, prep, fit)
    out_dir = Path(cfg["output_dir"])
    _write_report(out_dir / "report.txt", cfg, "analyze", [
        ("fidelity", budget.fidelity),
        ("avg_assignment_fidelity", budget.avg_assignment_fidelity),
        ("eps_g", budget.eps_g), ("eps_e", budget.eps_e),
        ("eps_o", budget.eps_o), ("eps_o_g", budget.eps_o_g),
        ("eps_o_e", budget.eps_o_e),
        ("eps_t_g", budget.eps_t_g), ("eps_t_e", budget.eps_t_e),
        ("mu_g", fit.mu_g), ("mu_e", fit.mu_e),
        ("sigma_g", fit.sigma_g), ("sigma_e", fit.sigma_e),
        ("A_gg", fit.A_gg), ("A_eg", fit.A_eg),
        ("A_ge", fit.A_ge), ("A_ee", fit.A_ee),
        ("threshold", fit.threshold),
    ])
    rows = zip(bin_centers, hist_g, hist_e,
               fit.counts_g(bin_centers), fit.counts_e(bin_centers))
    _write_csv(out_dir / "histogram.csv", cfg, "analyze",
               ("bin_center", "count_g", "count_e", "fit_g", "fit_e"), rows)
    print(f"fidelity = {_fmt(budget.fidelity)}")
    return 0


def cmd_optimize(cfg: dict, args) -> int:
    device = build_device(cfg)
    d = derive(device)
    out_dir = Path(cfg["output_dir"])
    if args.mode == "ratio":
        x_grid = np.asarray(cfg["ratio_tau_grid"], dtype=float)
        taus = x_grid / (2.0 * math.pi * abs(d.chi))
        r_qss = optimize.optimal_ratio_vs_tau(device, taus, "qss")
        r_full = optimize.optimal_ratio_vs_tau(device, taus, "full")
        rows = zip(taus * 1e9, r_qss, r_full)
        _write_csv(out_dir / "ratio.csv", cfg, "optimize",
                   ("tau_ns", "ratio_qss", "ratio_full"), rows)
    else:
        points = optimize.power_tradeoff(
            device, cfg["power_grid"], cfg["tau"],
            mix_coeff=cfg["mix_coeff"], n_shots=cfg["n_shots"],
            master_seed=cfg["seed"])
        rows = [(p.n_drive, p.eps_o, 1.0 - p.fidelity_mc) for p in points]
        _write_csv(out_dir / "power.csv", cfg, "optimize",
                   ("n_drive", "eps_o", "infidelity_mc"), rows)
    return 0


def _read_two_column_csv(path: str):
    xs, ys = [], []
    with open(path) as fh:
        reader = csv.reader(r for r in fh if not r.startswith("#"))
        for row in reader:
            if not row:
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                continue  # header row
            xs.append(x)
            ys.append(y)
    return np.asarray(xs), np.asarray(ys)


def cmd_calibrate(cfg: dict, args) -> int:
    out_dir = Path(cfg["output_dir"])
    if args.mode == "spectrum":
        if args.input_g is None or args.input_e is None:
            raise ConfigError("calibrate spectrum requires --input-g and --input-e")
        om_g, s_g = _read_two_column_csv(args.input_g)
        om_e, s_e = _read_two_column_csv(args.input_e)
        if len(om_g) != len(om_e) or np.any(om_g != om_e):
            raise ConfigError("spectrum files must share the frequency grid")
        fit = calib.fit_transmission(om_g, s_g, s_e)
        _write_report(out_dir / "spectrum_fit.txt", cfg, "calibrate", [
            ("omega_p_Hz", fit.omega_p), ("omega_r_Hz", fit.omega_r),
            ("J_Hz", fit.J), ("chi_Hz", fit.chi), ("Q_p", fit.Q_p),
            ("gamma_Hz", fit.gamma), ("scale", fit.scale),
            ("kappa_p_Hz", fit.kappa_p),
        ])
    else:
        if args.input is None:
            raise ConfigError("calibrate stark requires --input")
        device = build_device(cfg)
        d = derive(device)
        powers, freqs = _read_two_column_csv(args.input)
        fit = calib.stark_calibration(powers, freqs, d.chi)
        _write_report(out_dir / "stark_fit.txt", cfg, "calibrate", [
            ("photons_per_watt", fit.photons_per_watt),
            ("nu_q0_Hz", fit.nu_q0),
            ("degenerate", fit.degenerate),
        ])
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastreadout",
        description="Dispersive-readout simulation and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       dest="overrides", help="override a configuration key")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--output-dir", help="directory for output files")

    for name in ("derive", "signal", "rate"):
        common(sub.add_parser(name))
    p_sim = sub.add_parser("simulate")
    common(p_sim)
    p_sim.add_argument("--n-shots", type=int, help="override n_shots")
    p_sim.add_argument("--wide", action="store_true",
                       help="one row per shot instead of one row per bin")
    p_an = sub.add_parser("analyze")
    common(p_an)
    p_an.add_argument("--input", help="wide-format shot CSV to analyze")
    p_opt = sub.add_parser("optimize")
    common(p_opt)
    p_opt.add_argument("--mode", choices=("ratio", "power"), default="ratio")
    p_cal = sub.add_parser("calibrate")
    common(p_cal)
    p_cal.add_argument("--mode", choices=("spectrum", "stark"),
                       default="spectrum")
    p_cal.add_argument("--input", help="two-column CSV (power, qubit frequency)")
    p_cal.add_argument("--input-g", help="two-column CSV (frequency, |S21|), qubit in g")
    p_cal.add_argument("--input-e", help="two-column CSV (frequency, |S21|), qubit in e")
    return parser


_COMMANDS = {
    "derive": cmd_derive,
    "signal": cmd_signal,
    "rate": cmd_rate,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.config, args.overrides)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.output_dir is not None:
            cfg["output_dir"] = args.output_dir
        if getattr(args, "n_shots", None) is not None:
            cfg["n_shots"] = args.n_shots
        Path(cfg["output_dir"]).mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FastReadoutError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
