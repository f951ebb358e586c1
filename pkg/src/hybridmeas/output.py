"""CSV writers and the per-run manifest."""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__

TRAJECTORY_HEADER = ("t", "X", "Xdot", "xbar", "xbardot", "delta", "deltadot")
DIVERGENCE_HEADER = ("t", "delta_cl", "delta_qu")
ENSEMBLE_HEADER = ("t", "particle_id", "x")
DEVIATION_HEADER = ("t", "l2_dev", "mean_dev", "var_dev", "norm_drift")
SWEEP_HEADER = ("omega_tau", "sigma0_sq_exact", "sigma0_sq_low", "sigma0_sq_high")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows) -> Path:
    """Write rows at full double precision (17 significant digits)."""
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Return ``(header, data)`` for a numeric CSV written by ``write_csv``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_trajectory(path, traj) -> Path:
    return write_csv(path, TRAJECTORY_HEADER, np.column_stack([traj.t, traj.states]))


def write_divergence(path, series) -> Path:
    return write_csv(path, DIVERGENCE_HEADER, np.column_stack([series.t, series.delta_cl, series.delta_qu]))


def write_ensemble(path, times, positions) -> Path:
    def rows():
        for t, xs in zip(times, positions):
            for i, x in enumerate(xs):
                yield (float(t), i, float(x))
    return write_csv(path, ENSEMBLE_HEADER, rows())


def write_deviation(path, report) -> Path:
    return write_csv(path, DEVIATION_HEADER, np.column_stack(
        [report.t, report.l2_dev, report.mean_dev, report.var_dev, report.norm_drift]))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import scipy

    return {"hybridmeas": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(out_dir, subcommand: str, config_text: str, seed, artifacts) -> Path:
    out_dir = Path(out_dir)
    resolved = out_dir / "config.resolved.ini"
    resolved.write_text(config_text)
    artifacts = list(artifacts) + [resolved]
    manifest = {
        "subcommand": subcommand,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "seed": seed,
        "versions": versions(),
        "artifacts": [{"file": Path(a).name, "sha256": sha256_file(a)} for a in artifacts],
    }
    return write_json(out_dir / "manifest.json", manifest)
