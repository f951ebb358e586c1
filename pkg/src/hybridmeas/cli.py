"""Batch entry point: ``hybridmeas <subcommand> [--preset NAME] [--config PATH] [--out DIR] [--seed N]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import io
import logging
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import output
from .analysis import (contractive_state_experiment, resolution_sweep, stationary_resolution,
                       width_relaxation_experiment)
from .dynamics import WidthCollapseError, simulate
from .integrator import IntegrationError, StepControl
from .lyapunov import (LyapunovError, divergence_series, fit_exponent, make_offset,
                       renormalized_exponent, saturation_time)
from .model import STATE_FIELDS, HybridParams, HybridState, ParameterError, params_from_mapping
from .pde_oracle import GridError, certify_ansatz, default_grid
from .wavepacket import BohmEnsemble, advance_ensemble

log = logging.getLogger("hybridmeas")

SUBCOMMANDS = ("simulate", "lyapunov", "width", "stationary", "certify", "bohm")
PRESETS = ("chaotic-default", "harmonic", "free-particle")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# section -> key -> (type, default)
_SCHEMA = {
    "initial": {
        "X": (float, 0.1), "Xdot": (float, 0.0), "xbar": (float, 0.1),
        "xbardot": (float, 0.0), "delta": (str, "stationary"), "deltadot": (float, 0.0),
    },
    "integrator": {
        "dt": (float, 0.01), "adaptive": (bool, False), "rtol": (float, 1e-8),
        "atol": (float, 1e-10), "dt_min": (float, 1e-12), "dt_max": (float, 0.1),
    },
    "run": {"t_end": (float, 100.0), "stride": (int, 1), "seed": (int, 0)},
    "lyapunov": {
        "offset": (float, 1e-7), "coordinate": (str, "X"), "t_end": (float, 300.0),
        "saturation": (float, 1.0), "skip": (float, 1.0), "renorm_interval": (float, 1.0),
        "n_intervals": (int, 1000), "discard": (int, 100), "stride": (int, 1),
    },
    "grid": {
        "n_points": (int, 2048), "span": (float, 12.0), "t_end": (float, 20.0),
        "dt": (float, 1e-3), "xbar_shift": (float, 0.5), "record_every": (int, 10),
        "snapshot_times": (str, ""),
    },
    "width": {
        "relax_delta_factor": (float, 2.0), "relax_deltadot": (float, 0.0),
        "relax_t_end": (float, 300.0), "relax_dt": (float, 1e-2),
        "contract_delta": (float, 0.5), "contract_deltadot": (float, -0.5),
        "contract_t_end": (float, 10.0), "contract_dt": (float, 1e-3),
    },
    "stationary": {
        "tau": (float, 1.0), "omega_tau_min": (float, 1e-3), "omega_tau_max": (float, 1e3),
        "points": (int, 61),
    },
    "bohm": {
        "n_particles": (int, 10000), "t_end": (float, 100.0), "dt": (float, 0.01),
        "record_every": (int, 1000), "guidance": (str, "transport"),
    },
}


@dataclass
class RunConfig:
    params: HybridParams
    initial: HybridState
    sections: dict
    seed: int
    text: str

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def step_control(self) -> StepControl:
        g = self.sections["integrator"]
        if g["adaptive"]:
            return StepControl.adaptive_mode(g["rtol"], g["atol"], g["dt_min"], g["dt_max"], g["dt"])
        return StepControl.fixed(g["dt"])


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return resources.files("hybridmeas").joinpath("presets", f"{name}.ini").read_text()


def _parse(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cp


def _convert(kind, raw: str, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from None


def load_config(config_path: str | None = None, preset: str | None = None,
                seed: int | None = None) -> RunConfig:
    """Merge preset (if any) and config file (if any) into a validated RunConfig.

    Without a preset every ``[params]`` key except ``gamma_cl`` must be given.
    """
    layers = []
    if preset is not None:
        layers.append((preset_text(preset), f"preset:{preset}"))
    if config_path is not None:
        try:
            layers.append((Path(config_path).read_text(), str(config_path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc.strerror}") from None
    if not layers:
        raise ConfigError("give --config and/or --preset")

    merged: dict[str, dict[str, str]] = {}
    for text, source in layers:
        cp = _parse(text, source)
        for sec in cp.sections():
            if sec != "params" and sec not in _SCHEMA:
                raise ConfigError(f"{source}: unknown section [{sec}]")
            merged.setdefault(sec, {}).update(cp[sec])
    if "params" not in merged:
        raise ConfigError("missing section [params]")
    try:
        params = params_from_mapping(merged["params"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    sections = {}
    for sec, keys in _SCHEMA.items():
        given = merged.get(sec, {})
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"[{sec}]: unknown key(s) {', '.join(sorted(unknown))}")
        sections[sec] = {k: _convert(kind, given[k], f"[{sec}] {k}") if k in given else default
                         for k, (kind, default) in keys.items()}

    if sections["lyapunov"]["coordinate"] not in STATE_FIELDS:
        raise ConfigError(f"[lyapunov] coordinate must be one of {', '.join(STATE_FIELDS)}")
    if sections["bohm"]["guidance"] not in ("transport", "phase"):
        raise ConfigError("[bohm] guidance must be 'transport' or 'phase'")

    ini = sections["initial"]
    dspec = str(ini["delta"]).strip()
    if dspec == "stationary":
        delta = params.stationary_width()
        if not math.isfinite(delta):
            raise ConfigError("[initial] delta = stationary needs omega > 0 or finite tau")
    else:
        delta = _convert(float, dspec, "[initial] delta")
    try:
        initial = HybridState(0.0, ini["X"], ini["Xdot"], ini["xbar"], ini["xbardot"], delta, ini["deltadot"])
    except ParameterError as exc:
        raise ConfigError(f"[initial] {exc}") from None

    run_seed = sections["run"]["seed"] if seed is None else seed
    sections["run"]["seed"] = run_seed
    text = _render(merged, sections)
    cfg = RunConfig(params, initial, sections, run_seed, text)
    try:
        cfg.step_control()
    except ValueError as exc:
        raise ConfigError(f"[integrator] {exc}") from None
    return cfg


def _render(merged, sections) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["params"] = dict(sorted(merged["params"].items()))
    for sec, values in sections.items():
        cp[sec] = {k: str(v) for k, v in values.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# subcommands ---------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path) -> list[Path]:
    r = cfg.sections["run"]
    traj = simulate(cfg.params, cfg.initial, r["t_end"], cfg.step_control(), r["stride"])
    return [output.write_trajectory(out / "trajectory.csv", traj)]


def cmd_lyapunov(cfg: RunConfig, out: Path) -> list[Path]:
    ly = cfg.sections["lyapunov"]
    ctl = cfg.step_control()
    p, s0 = cfg.params, cfg.initial
    series = divergence_series(p, s0, make_offset(ly["offset"], ly["coordinate"]),
                               ly["t_end"], ctl, ly["stride"])
    files = [output.write_divergence(out / "divergence.csv", series)]

    records = []
    own = {"cl": "X", "qu": "xbar", "width": "delta"}
    for ch, coord in own.items():
        ser = series if coord == ly["coordinate"] else divergence_series(
            p, s0, make_offset(ly["offset"], coord), ly["t_end"], ctl, ly["stride"])
        t_max = saturation_time(ser, "cl", ly["saturation"]) if ch != "cl" else None
        try:
            est = fit_exponent(ser, ch, ly["saturation"], ly["skip"], t_max=t_max)
            records.append(est.to_record())
        except LyapunovError as exc:
            records.append({"channel": ch, "method": "regression", "error": str(exc)})
    ren = renormalized_exponent(p, s0, ly["offset"], ly["renorm_interval"], ly["n_intervals"],
                                ctl, discard=ly["discard"])
    records.extend(e.to_record() for e in ren.values())
    files.append(output.write_json(out / "estimates.json", records))
    for rec in records:
        if "exponent" in rec:
            log.info("%-6s %-13s exponent=%.6g", rec["channel"], rec["method"], rec["exponent"])
    return files


def cmd_width(cfg: RunConfig, out: Path) -> list[Path]:
    w = cfg.sections["width"]
    p = cfg.params
    files = []
    summary = {}
    d0 = p.stationary_width()
    if math.isfinite(d0):
        rel = width_relaxation_experiment(p, w["relax_delta_factor"] * d0, w["relax_deltadot"],
                                          w["relax_t_end"], w["relax_dt"])
        files.append(output.write_csv(out / "width_relaxation.csv", ("t", "delta", "deltadot"),
                                      np.column_stack([rel.t, rel.delta, rel.deltadot])))
        summary["relaxation"] = rel.summary()
    else:
        summary["relaxation"] = None
    con = contractive_state_experiment(p, w["contract_delta"], w["contract_deltadot"],
                                       w["contract_t_end"], w["contract_dt"])
    files.append(output.write_csv(out / "contractive.csv", ("t", "delta", "delta_baseline"),
                                  np.column_stack([con.t, con.delta, con.baseline])))
    summary["contractive"] = con.summary()
    files.append(output.write_json(out / "width_report.json", summary))
    return files


def cmd_stationary(cfg: RunConfig, out: Path) -> list[Path]:
    st = cfg.sections["stationary"]
    p = cfg.params
    wts = np.geomspace(st["omega_tau_min"], st["omega_tau_max"], st["points"])
    table = resolution_sweep(wts, tau=st["tau"], m=p.m, hbar=p.hbar)
    files = [output.write_csv(out / "stationary_sweep.csv", output.SWEEP_HEADER, table)]
    if math.isfinite(p.tau):
        res = stationary_resolution(p)
        rec = {"sigma0_sq": res.sigma0_sq, "delta0": res.delta0, "regime": res.regime,
               "omega_tau": p.omega * p.tau}
    else:
        rec = None
    files.append(output.write_json(out / "stationary.json", rec))
    return files


def cmd_certify(cfg: RunConfig, out: Path) -> list[Path]:
    g = cfg.sections["grid"]
    p = cfg.params
    traj = simulate(p, cfg.initial, g["t_end"], StepControl.fixed(g["dt"]))
    grid = default_grid(traj, g["n_points"], g["span"])
    snaps = [float(s) for s in str(g["snapshot_times"]).replace(",", " ").split()]
    rep = certify_ansatz(p, traj, grid, g["t_end"], g["dt"], record_every=g["record_every"],
                         snapshot_times=snaps)
    files = [output.write_deviation(out / "certify.csv", rep)]
    summary = {"consistent": rep.summary()}
    if g["xbar_shift"] != 0.0:
        shifted = default_grid(traj, g["n_points"], g["span"] + abs(g["xbar_shift"]) / float(np.min(traj.delta)))
        neg = certify_ansatz(p, traj, shifted, g["t_end"], g["dt"], xbar_shift=g["xbar_shift"],
                             record_every=g["record_every"])
        files.append(output.write_deviation(out / "certify_negative.csv", neg))
        summary["negative_control"] = dict(neg.summary(), xbar_shift=g["xbar_shift"])
    for t, rho in sorted(rep.snapshots.items()):
        files.append(output.write_csv(out / f"snapshot_t{t:g}.csv", ("x", "rho"),
                                      np.column_stack([grid.x, rho])))
    files.append(output.write_json(out / "certify.json", summary))
    log.info("certificate: %s", summary["consistent"])
    return files


def cmd_bohm(cfg: RunConfig, out: Path) -> list[Path]:
    b = cfg.sections["bohm"]
    traj = simulate(cfg.params, cfg.initial, b["t_end"], StepControl.fixed(b["dt"]))
    ens = BohmEnsemble.sample(traj, b["n_particles"], cfg.seed)
    times, pos = advance_ensemble(ens, guidance=b["guidance"], record_stride=b["record_every"])
    return [output.write_ensemble(out / "ensemble.csv", times, pos)]


COMMANDS = {
    "simulate": cmd_simulate,
    "lyapunov": cmd_lyapunov,
    "width": cmd_width,
    "stationary": cmd_stationary,
    "certify": cmd_certify,
    "bohm": cmd_bohm,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridmeas", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="INI file; its keys override the preset")
    ap.add_argument("--preset", choices=PRESETS, help="bundled parameter set")
    ap.add_argument("--out", default="run", help="output directory (default: ./run)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides [run] seed)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(subcommand: str, config: str | None = None, preset: str | None = None,
        out: str | Path = "run", seed: int | None = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        if seed is not None and not 0 <= seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        cfg = load_config(config, preset, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[subcommand](cfg, out_dir)
        output.write_manifest(out_dir, subcommand, cfg.text, cfg.seed, files)
    except (IntegrationError, WidthCollapseError, ArithmeticError, LyapunovError, GridError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    return run(args.subcommand, args.config, args.preset, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
