"""Static plots rebuilt from CSV artifacts; nothing here touches the simulation."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import FIG3_ROWS, read_csv  # noqa: E402


def _floats(values) -> np.ndarray:
    return np.array([float(v) if v != "" else np.nan for v in values])


def _save(fig, path: Path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path.name


def plot_trajectory(csv_path: Path, png_path: Path, target=None) -> str:
    cols = read_csv(csv_path)
    step = _floats(cols["step"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(step, _floats(cols["T1"]), label="cavity 1")
    t2 = _floats(cols["T2"])
    if not np.all(np.isnan(t2)):
        ax.plot(step, t2, label="cavity 2")
    if target is not None:
        ax.axhline(target, color="k", ls=":", lw=1, label="T_phi")
    ax.set_xlabel("collision")
    ax.set_ylabel("T")
    ax.legend()
    return _save(fig, png_path)


def _ensemble_curves(cols: dict, key: str):
    ids = cols["run_id"]
    pick = lambda label: _floats([v for i, v in zip(ids, cols[key]) if i == label])
    steps = _floats([s for i, s in zip(ids, cols["step"]) if i == "mean"])
    return steps, pick("mean"), pick("std")


def plot_ensemble(csv_path: Path, png_path: Path, reference: Path | None = None) -> str:
    cols = read_csv(csv_path)
    ref = read_csv(reference) if reference is not None and reference.exists() else None
    keys = ["T1", "T2"] if not np.all(np.isnan(_ensemble_curves(cols, "T2")[1])) else ["T1"]
    fig, axes = plt.subplots(1, len(keys), figsize=(5 * len(keys), 4), squeeze=False)
    for ax, key in zip(axes[0], keys):
        steps, mean, std = _ensemble_curves(cols, key)
        ax.plot(steps, mean, label="ensemble mean")
        ax.fill_between(steps, mean - std, mean + std, alpha=0.3)
        if ref is not None:
            ax.plot(_floats(ref["step"]), _floats(ref[key]), ":", color="k", label="noiseless")
        ax.set_title(f"cavity {key[1]}")
        ax.set_xlabel("collision")
        ax.set_ylabel("T")
        ax.legend()
    return _save(fig, png_path)


def plot_landscape(csv_path: Path, png_path: Path) -> str:
    cols = read_csv(csv_path)
    alpha, phi, temp = _floats(cols["alpha"]), _floats(cols["phi"]), _floats(cols["T"])
    a_vals, p_vals = np.unique(alpha), np.unique(phi)
    grid = temp.reshape(len(a_vals), len(p_vals))
    grid = np.where(np.isfinite(grid), grid, np.nan)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(p_vals, a_vals, grid, shading="auto", cmap="inferno")
    fig.colorbar(mesh, ax=ax, label="T")
    ax.set_xlabel("phi")
    ax.set_ylabel("alpha")
    return _save(fig, png_path)


def plot_sweep(csv_path: Path, png_path: Path, axis: str) -> str:
    cols = read_csv(csv_path)
    x = _floats(cols["value"])
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in ("steps_to_1pct_T1", "steps_to_1pct_T2"):
        y = _floats(cols[key])
        if not np.all(np.isnan(y)):
            ax.plot(x, y, "o-", label=key.replace("steps_to_1pct_", "cavity "))
    ax.set_xlabel(axis)
    ax.set_ylabel("collisions to 1% band")
    if ax.lines:
        ax.legend()
    return _save(fig, png_path)


def plot_gaussian(csv_path: Path, png_path: Path) -> str:
    cols = read_csv(csv_path)
    t = _floats(cols["t"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(t, _floats(cols["n1"]), label="n1")
    ax1.plot(t, _floats(cols["n2"]), label="n2")
    ax1.set_xlabel("t")
    ax1.legend()
    ax2.plot(t, _floats(cols["MI"]), label="mutual information")
    ax2.plot(t, _floats(cols["log_negativity"]), label="log negativity")
    ax2.set_xlabel("t")
    ax2.legend()
    return _save(fig, png_path)


def plot_fig3(out: Path, png_path: Path) -> str:
    fig, axes = plt.subplots(len(FIG3_ROWS), 2, figsize=(10, 10), sharey=True)
    for row, dts in enumerate(FIG3_ROWS):
        for cav, key in enumerate(("T1", "T2")):
            ax = axes[row, cav]
            for i, dt in enumerate(dts):
                for curve, color in (("hot", "tab:red"), ("cold", "tab:blue")):
                    cols = read_csv(out / f"row{row}_dt{dt:.2f}_{curve}.csv")
                    ax.plot(_floats(cols["step"]), _floats(cols[key]), color=color, alpha=0.4 + 0.3 * i,
                            label=f"{curve} dt={dt:.2f}")
            ax.set_title(f"cavity {cav + 1}")
            ax.set_xlabel("collision")
            ax.legend(fontsize=6)
    return _save(fig, png_path)


def render(kind: str, out: Path, record) -> list:
    """Draw the standard plot(s) for a finished run directory."""
    out = Path(out)
    target = record.summary.get("target")
    target = target if isinstance(target, (int, float)) and math.isfinite(target) else None
    if kind in ("trajectory", "protocol"):
        return [plot_trajectory(out / "trajectory.csv", out / "trajectory.png", target)]
    if kind in ("noisy-dt", "noisy-phi"):
        return [plot_ensemble(out / "ensemble.csv", out / "ensemble.png", out / "reference.csv")]
    if kind == "landscape":
        return [plot_landscape(out / "landscape.csv", out / "landscape.png")]
    if kind == "sweep":
        return [plot_sweep(out / "sweep.csv", out / "sweep.png", record.summary["axis"])]
    if kind == "gaussian":
        return [plot_gaussian(out / "gaussian.csv", out / "gaussian.png")]
    if kind == "figure":
        if record.summary["figure"] == "fig3":
            return [plot_fig3(out, out / "fig3.png")]
        made = []
        for branch in record.summary["branches"]:
            sub = out / branch["branch"]
            made.append(f"{branch['branch']}/" + plot_ensemble(sub / "ensemble.csv", sub / "ensemble.png", sub / "reference.csv"))
        return made
    return []
