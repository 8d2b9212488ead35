"""CSV and JSON artifacts: surfaces, Monte Carlo sweeps and run summaries.

Output is byte-deterministic: floats use 17 significant digits, lines end in
LF and JSON keys keep insertion order.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name

FLOAT_FMT = "%.17g"


def _fmt(x):
    return FLOAT_FMT % x


def surface_rows(series, levels=None):
    """Yield ``(t, D, E, value)`` for the chosen stored levels, D-major then E."""
    g = series.grid
    ks = series.levels if levels is None else levels
    d = g.d_nodes
    e = g.e_nodes
    for k in ks:
        vals = series.level(int(k))
        t = int(k) * g.delta_t
        for i in range(g.n_d + 1):
            for j in range(g.n_e + 1):
                yield t, d[i], e[j], vals[i, j]


def write_surface_csv(path, series, levels=None):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,D,E,value\n")
        for row in surface_rows(series, levels):
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def grid_metadata(grid):
    return {
        "n_d": grid.n_d, "n_e": grid.n_e, "n_t": grid.n_t,
        "delta_d": grid.delta_d, "delta_e": grid.delta_e, "delta_t": grid.delta_t,
        "xi_max": grid.xi_max, "e_max": grid.e_max, "horizon": grid.horizon,
    }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, payload):
    path = Path(path)
    text = json.dumps(_clean(payload), indent=2, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def surface_sidecar(series, levels, config_echo=None, extra=None):
    g = series.grid
    return {
        "format": "t,D,E,value",
        "label": series.label,
        "grid": grid_metadata(g),
        "levels": [int(k) for k in levels],
        "times": [int(k) * g.delta_t for k in levels],
        "meta": series.meta,
        "backend": backend_name(),
        "version": __version__,
        **(extra or {}),
        "config": config_echo,
    }


def export_surfaces(out_dir, stem, series, levels, config_echo=None, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv = write_surface_csv(out_dir / f"{stem}.csv", series, levels)
    js = write_json(out_dir / f"{stem}.json", surface_sidecar(series, levels, config_echo, extra))
    return csv, js


def write_mc_csv(path, results):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("penalty,mean,std_error\n")
        for r in results:
            fh.write(f"{_fmt(r.penalty)},{_fmt(r.mean_emissions)},{_fmt(r.std_error)}\n")
    return path


def read_surface_csv(path):
    """Load a surface CSV back as an ``(n, 4)`` array."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


__all__ = [
    "export_surfaces", "grid_metadata", "read_surface_csv", "surface_rows", "surface_sidecar",
    "write_json", "write_mc_csv", "write_surface_csv",
]
