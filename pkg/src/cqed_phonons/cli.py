"""Command-line interface: ``cqed-phonons {spectrum,sweep,hom,synth-hom}``.

Every command reads an optional JSON config, applies ``--set key=value``
overrides and dedicated flags, and writes its outputs together with
``resolved_config.json``.  Passing that file back through ``--config``
reproduces the outputs byte for byte.

Physical keys carry their unit in the name (``g_ueV``, ``gamma0_per_ns``,
``D_eV`` ...).  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from cqed_phonons import __version__
from cqed_phonons.devices import (
    PRESETS,
    DeviceConfig,
    SweepSpec,
    counterfactual_curves,
    run_sweep,
    without_mode_splitting,
)
from cqed_phonons.dynamics import GridSpanError, IntegrationError
from cqed_phonons.hom import (
    DegenerateHistogramError,
    FitConvergenceError,
    InsufficientPeaksError,
    analyze,
    expected_hom_ratio,
    load_histogram,
    save_histogram,
    synthesize_histogram,
)
from cqed_phonons.phonons import (
    PhononBath,
    QDParams,
    QuadratureError,
    SidebandWindowError,
    SpectrumResolutionError,
    bulk_spectrum,
    emission_grid,
    pure_dephasing_rate,
)
from cqed_phonons.purcell import CavityParams, cavity_spectrum, effective_purcell_with_psb

log = logging.getLogger("cqed_phonons")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
SIDECAR = "resolved_config.json"
NUMERICAL_ERRORS = (QuadratureError, SidebandWindowError, SpectrumResolutionError, IntegrationError,
                    GridSpanError, FitConvergenceError, DegenerateHistogramError,
                    InsufficientPeaksError, FloatingPointError)


class ConfigError(ValueError):
    pass


# unit-suffixed key -> (section, field)
DEVICE_KEYS = {
    "g_ueV": ("cavity", "g"),
    "kappa_ueV": ("cavity", "kappa"),
    "delta_ueV": ("cavity", "delta"),
    "delta_EM_ueV": ("cavity", "delta_EM"),
    "split_modes": ("cavity", "split_modes"),
    "gamma0_per_ns": ("qd", "gamma0"),
    "alpha_ueV": ("qd", "alpha"),
    "eps_p_meV": ("qd", "eps_p"),
    "D_eV": ("bath", "D"),
    "sigma_nm": ("bath", "sigma"),
    "c_s_m_per_s": ("bath", "c_s"),
    "rho_m_kg_per_m3": ("bath", "rho_m"),
    "fss_ueV": (None, "fss"),
}


def device_to_config(device: DeviceConfig) -> dict:
    out = {"name": device.name}
    for key, (section, name) in DEVICE_KEYS.items():
        obj = device if section is None else getattr(device, section)
        out[key] = getattr(obj, name)
    return out


def device_from_config(cfg) -> DeviceConfig:
    if isinstance(cfg, str):
        if cfg not in PRESETS:
            raise ConfigError(f"unknown device preset {cfg!r}; choose from {sorted(PRESETS)}")
        return PRESETS[cfg]
    if not isinstance(cfg, dict):
        raise ConfigError("device must be a preset name or an object")
    cfg = dict(cfg)
    base = PRESETS[cfg.pop("preset")] if "preset" in cfg else None
    parts = {"cavity": {}, "qd": {}, "bath": {}, None: {}}
    if base is not None:
        for key, value in device_to_config(base).items():
            if key != "name":
                parts[DEVICE_KEYS[key][0]][DEVICE_KEYS[key][1]] = value
    name = cfg.pop("name", base.name if base else "custom")
    for key, value in cfg.items():
        if key not in DEVICE_KEYS:
            raise ConfigError(f"unknown device key {key!r}; allowed: {sorted(DEVICE_KEYS)}")
        section, field = DEVICE_KEYS[key]
        parts[section][field] = value
    if "g" not in parts["cavity"] or "kappa" not in parts["cavity"]:
        raise ConfigError("inline device needs g_ueV and kappa_ueV")
    try:
        return DeviceConfig(name, CavityParams(**parts["cavity"]), QDParams(**parts["qd"]),
                            PhononBath(**parts["bath"]), **parts[None])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid device: {exc}") from exc


DEFAULTS = {
    "spectrum": {
        "device": "device2",
        "single_mode": False,
        "temperatures_K": [9.0, 20.0],
        "window_ueV": 4000.0,
        "points_per_fwhm": 10,
        "core_widths": 20.0,
        "n_wing": 400,
    },
    "sweep": {
        "device": "device1",
        "single_mode": False,
        "counterfactual": False,
        "sweep": {
            "parameter": "temperature",
            "start": 0.0,
            "stop": 20.0,
            "num": 11,
            "constraint": "none",
            "dephasing": "full",
            "temperature_K": 4.0,
            "nominal_purcell": 24.0,
            "n_points": 600,
            "lifetimes": 12.0,
        },
    },
    "hom": {
        "g2_file": None,
        "hom_file": None,
        "R": 0.5,
        "T": 0.5,
        "epsilon": 0.0,
        "window_ns": [-15.0, 615.0],
        "rep_period_ns": 12.195,
        "hom_delay_ns": 12.2,
        "n_uncorrelated_g2": 50,
        "n_uncorrelated_hom": 49,
        "residuals": False,
    },
    "synth-hom": {
        "seed": None,
        "I": 0.9,
        "g2": 0.02,
        "R": 0.5,
        "T": 0.5,
        "epsilon": 0.0,
        "tau_ns": 0.25,
        "amplitude_counts": 1000.0,
        "baseline_counts": 2.0,
        "delay_peak_ratio": 0.75,
        "bin_width_ns": 0.1,
        "window_ns": [-15.0, 615.0],
        "rep_period_ns": 12.195,
        "hom_delay_ns": 12.2,
    },
}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in out:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def _parse_set(items) -> dict:
    update: dict = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = update
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return update


def _load_config_file(path, command: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError:
        raise
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "command" in data and "config" in data:  # a provenance sidecar
        if data["command"] != command:
            raise ConfigError(f"{path} was written by {data['command']!r}, not {command!r}")
        data = data["config"]
    return data


def resolve_config(command: str, args) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if args.config:
        cfg = _merge(cfg, _load_config_file(args.config, command))
    cfg = _merge(cfg, _parse_set(args.set))
    for flag in ("device", "seed"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    if "device" in cfg:
        cfg["device"] = device_to_config(device_from_config(cfg["device"]))
    return cfg


def _write_sidecar(out: Path, command: str, cfg: dict) -> None:
    meta = {"command": command, "package_version": __version__, "config": cfg}
    (out / SIDECAR).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


def _device(cfg) -> DeviceConfig:
    device = device_from_config(cfg["device"])
    return without_mode_splitting(device) if cfg.get("single_mode") else device


def cmd_spectrum(cfg: dict, out: Path, jobs: int) -> int:
    device = _device(cfg)
    with_cavity = device.cavity.g > 0
    for T in cfg["temperatures_K"]:
        bath = device.bath.at(float(T))
        gs = pure_dephasing_rate(device.qd, bath.T)
        fwhm = device.qd.linewidth + gs
        omega = emission_grid(fwhm, float(cfg["window_ueV"]),
                              points_per_fwhm=int(cfg["points_per_fwhm"]),
                              core_widths=float(cfg["core_widths"]), n_wing=int(cfg["n_wing"]))
        bulk = bulk_spectrum(bath, device.qd, omega)
        header = ["omega_ueV", "bulk", "bulk_zpl", "bulk_sideband"]
        cols = [omega, bulk.intensity, bulk.zpl, bulk.sideband]
        if with_cavity:
            zpl, side = cavity_spectrum(device.cavity, device.qd, bath, omega, gs)
            header += ["cavity", "cavity_zpl", "cavity_sideband"]
            cols += [zpl + side, zpl, side]
            budget = effective_purcell_with_psb(device.cavity, device.qd, bath, gs)
            log.info("T=%g K: F_eff=%.4g eta_zpl=%.4g eta_zpl_cav=%.4g", T, budget.F_eff,
                     budget.eta_zpl, budget.eta_zpl_cav)
        _write_csv(out / f"spectrum_{float(T)!r}K.csv", header, zip(*cols))
    return EXIT_OK


def _sweep_spec(s: dict) -> SweepSpec:
    try:
        return SweepSpec(parameter=s["parameter"], start=float(s["start"]), stop=float(s["stop"]),
                         num=int(s["num"]), constraint=s["constraint"], dephasing=s["dephasing"],
                         temperature=float(s["temperature_K"]),
                         nominal_purcell=float(s["nominal_purcell"]), n_points=int(s["n_points"]),
                         lifetimes=float(s["lifetimes"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sweep: {exc}") from exc


def cmd_sweep(cfg: dict, out: Path, jobs: int) -> int:
    device = _device(cfg)
    spec = _sweep_spec(cfg["sweep"])
    if cfg["counterfactual"]:
        pair = counterfactual_curves(device, spec, jobs)
        (out / "sweep.csv").write_text(pair.full.to_csv())
        (out / "sweep_zero_dephasing.csv").write_text(pair.zero.to_csv())
        (out / "counterfactual.csv").write_text(pair.to_csv())
        results = (pair.full, pair.zero)
    else:
        res = run_sweep(device, spec, jobs)
        (out / "sweep.csv").write_text(res.to_csv())
        results = (res,)
    failed = [r for res in results for r in res.rows if r["status"] != "ok"]
    for r in failed:
        log.error("sweep point %r failed: %s", r["swept_value"], r["status"])
    return EXIT_NUMERICAL if failed else EXIT_OK


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def cmd_hom(cfg: dict, out: Path, jobs: int) -> int:
    for key in ("g2_file", "hom_file"):
        if not cfg[key]:
            raise ConfigError(f"{key} is required")
    kw = dict(rep_period=float(cfg["rep_period_ns"]), hom_delay=float(cfg["hom_delay_ns"]))
    try:
        g2_hist = load_histogram(cfg["g2_file"], **kw)
        hom_hist = load_histogram(cfg["hom_file"], **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        an = analyze(g2_hist, hom_hist, R=float(cfg["R"]), T=float(cfg["T"]),
                     epsilon=float(cfg["epsilon"]), window=tuple(cfg["window_ns"]),
                     n_g2=int(cfg["n_uncorrelated_g2"]), n_hom=int(cfg["n_uncorrelated_hom"]))
    except (DegenerateHistogramError, InsufficientPeaksError, FitConvergenceError):
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = an.report()
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    if cfg["residuals"]:
        for name, fit, hist in (("g2", an.g2_fit, g2_hist), ("hom", an.hom_fit, hom_hist)):
            w = hist.window(*cfg["window_ns"])
            model = fit.model(w.bin_centers)
            _write_csv(out / f"residuals_{name}.csv", ["delay_ns", "counts", "model", "residual"],
                       zip(w.bin_centers, w.counts, model, w.counts - model))
    r = an.result
    log.info("g2=%.4g A0/<A>=%.4g I_raw=%.4g I=%.4g +%.3g/-%.3g", r.g2_zero, r.A0_over_mean,
             r.I_raw, r.I_corrected, r.err_plus, r.err_minus)
    return EXIT_OK


def cmd_synth_hom(cfg: dict, out: Path, jobs: int) -> int:
    if cfg["seed"] is None:
        raise ConfigError("synth-hom needs a seed (--seed or config 'seed')")
    if not 0 <= cfg["I"] <= 1 or cfg["g2"] < 0:
        raise ConfigError("need 0 <= I <= 1 and g2 >= 0")
    if abs(cfg["R"] + cfg["T"] - 1) > 1e-6:
        raise ConfigError("R + T must equal 1")
    rng = np.random.default_rng(int(cfg["seed"]))
    ratio = expected_hom_ratio(cfg["I"], cfg["g2"], cfg["R"], cfg["T"], cfg["epsilon"])
    common = dict(amplitude=float(cfg["amplitude_counts"]), baseline=float(cfg["baseline_counts"]),
                  tau=float(cfg["tau_ns"]), bin_width=float(cfg["bin_width_ns"]),
                  window=tuple(cfg["window_ns"]), rep_period=float(cfg["rep_period_ns"]),
                  hom_delay=float(cfg["hom_delay_ns"]), rng=rng)
    g2_hist = synthesize_histogram(cfg["g2"], **common)
    hom_hist = synthesize_histogram(ratio, delay_peak_ratio=float(cfg["delay_peak_ratio"]), **common)
    save_histogram(g2_hist, out / "g2_histogram.txt", header=f"synthetic autocorrelation, g2={cfg['g2']!r}")
    save_histogram(hom_hist, out / "hom_histogram.txt",
                   header=f"synthetic interference, I={cfg['I']!r}, A0/<A>={ratio!r}")
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "sweep": cmd_sweep, "hom": cmd_hom, "synth-hom": cmd_synth_hom}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqed-phonons", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "bulk and cavity emission spectra",
        "sweep": "figures of merit over a parameter grid",
        "hom": "fit g2 and interference histograms",
        "synth-hom": "Poisson-sampled synthetic histograms",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="JSON config (or a resolved_config.json)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value; dotted keys, JSON values")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("spectrum", "sweep"):
            p.add_argument("--device", help=f"device preset ({', '.join(sorted(PRESETS))})")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name == "synth-hom":
            p.add_argument("--seed", type=int)
        if name == "hom":
            p.add_argument("g2_file", nargs="?", help="autocorrelation histogram")
            p.add_argument("hom_file", nargs="?", help="interference histogram")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        if args.command == "hom":
            for key in ("g2_file", "hom_file"):
                if getattr(args, key):
                    cfg[key] = getattr(args, key)
        jobs = getattr(args, "jobs", 1)
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        _write_sidecar(args.out, args.command, cfg)
        return COMMANDS[args.command](cfg, args.out, jobs)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
