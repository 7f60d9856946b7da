"""Result files: self-describing CSV series, NDJSON traces, JSON reports and
comparison figures."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FIGURES = {
    "active": ("fig1_active_nodes.png", "Percentage of active nodes", "active nodes (%)"),
    "stealth": ("fig2_stealth_time.png", "Mean stealth time", "stealth time (s)"),
    "stealth_window": ("fig3_stealth_time_window20.png", "Stealth time, sliding window of 20", "stealth time (s)"),
    "energy_std": ("fig4_energy_std.png", "Standard deviation of the energy level", "battery std (units)"),
}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def atomic_write(path: Path | str, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence], config: dict) -> str:
    """Header line, a ``#``-prefixed JSON config line, then the rows."""
    lines = [",".join(header), "#" + json.dumps(config, sort_keys=True, separators=(",", ":"))]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows, config) -> None:
    atomic_write(path, csv_text(header, rows, config))


def read_csv(path) -> tuple[list[str], dict, list[list[float]]]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        cfg_line = fh.readline()
        if not cfg_line.startswith("#"):
            raise ValueError(f"{path}: second line must be the JSON config comment")
        config = json.loads(cfg_line[1:])
        rows = [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
    return header, config, rows


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_run_series(outdir: Path, stem: str, metrics, config: dict) -> list[Path]:
    outdir = Path(outdir)
    paths = []
    p = outdir / f"{stem}_active.csv"
    write_csv(p, ["time_s", "active_pct"], zip(metrics.snapshot_time, metrics.active_pct), config)
    paths.append(p)
    p = outdir / f"{stem}_stealth.csv"
    write_csv(p, ["time_s", "stealth_s", "running_mean_s", "window20_mean_s"],
              zip(metrics.stealth_time, metrics.stealth_value, metrics.stealth_running_mean,
                  metrics.stealth_window_mean), config)
    paths.append(p)
    p = outdir / f"{stem}_energy.csv"
    write_csv(p, ["time_s", "energy_mean", "energy_std"],
              zip(metrics.snapshot_time, metrics.energy_mean, metrics.energy_std), config)
    paths.append(p)
    return paths


def write_aggregate(outdir: Path, agg: dict, config: dict) -> list[Path]:
    outdir = Path(outdir)
    paths = []
    for name in ("active_pct", "stealth", "stealth_window", "energy_std", "energy_mean"):
        p = outdir / f"aggregate_{name}.csv"
        write_csv(p, ["time_s", "mean", "std"], zip(agg["time"], agg[name + "_mean"], agg[name + "_std"]), config)
        paths.append(p)
    return paths


def plot_comparison(outdir: Path, aggregates: dict[str, dict]) -> list[Path]:
    """One PNG per figure series, every policy on the same axes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    keys = {"active": "active_pct", "stealth": "stealth", "stealth_window": "stealth_window",
            "energy_std": "energy_std"}
    paths = []
    for fig_key, (fname, title, ylabel) in FIGURES.items():
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for policy, agg in aggregates.items():
            ax.plot(agg["time"], agg[keys[fig_key] + "_mean"], lw=1.2, label=policy)
        ax.set_title(title)
        ax.set_xlabel("time (s)")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(frameon=False)
        fig.tight_layout()
        p = outdir / fname
        fig.savefig(p, dpi=120, metadata={"Software": None})
        plt.close(fig)
        paths.append(p)
    return paths
