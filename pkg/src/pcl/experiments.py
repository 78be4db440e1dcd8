"""Config-driven experiments: each command writes CSV payloads plus a ``run.json`` record."""
from __future__ import annotations

import copy
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import yaml

from . import __version__
from .evolution import (
    CollisionConfig,
    EnsembleRecord,
    NoiseSpec,
    TrajectoryRecord,
    run_stochastic_ensemble,
    run_trajectory,
    steps_to_band,
)
from .fock import HilbertSpec
from .gaussian import CovarianceState, gaussian_measures, lindblad_generator, propagate_covariance, steady_covariance
from .phaseonium import PhaseoniumParams, RATIO_MARGIN, solve_alpha, solve_phi, steady_temperature

KINDS = ("landscape", "trajectory", "noisy-dt", "noisy-phi", "gaussian", "sweep", "protocol", "figure")

DEFAULTS: dict = {
    "seed": 0,
    "out": None,
    "jobs": None,
    "plot": False,
    "params": {"alpha": 0.25, "phi": 2.404315987, "epsilon": 0.0},
    "dt": 0.4,
    "omega": 1.0,
    "n_steps": 3000,
    "initial_temperatures": [1.0, 1.0],
    "space": {"cutoff": 30, "margin": 2},
    "tol": 1e-3,
    "window": 50,
    "stop_on_convergence": True,
    "leakage_threshold": 1e-6,
    "noise": {"sigma": 0.2, "mean": None, "low": None, "high": None, "n_runs": 10, "tail": 500},
    "landscape": {
        "alpha": {"start": 0.0, "stop": 0.9, "num": 91},
        "phi": {"start": -3.1, "stop": 3.1, "num": 125},
    },
    "sweep": {"axis": "dt", "values": [0.05, 0.1, 0.15, 0.4, 0.6, 1.2, 1.25, 1.3]},
    "protocol": {"target": 1.5, "phi": 2.404315987, "alpha": None},
    "gaussian": {
        "gamma_alpha_prime": None,
        "gamma_beta_prime": None,
        "initial_occupations": None,
        "dt_step": 0.01,
        "t_total": 50.0,
        "sample_every": 10,
    },
    "figure": {"name": "fig3"},
}

SWEEP_AXES = ("dt", "omega", "alpha", "phi", "epsilon", "initial_temperature")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# -- configuration -----------------------------------------------------------

def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(text: str) -> dict:
    """``a.b=1.5`` -> ``{"a": {"b": 1.5}}`` with the value parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    value = yaml.safe_load(raw) if raw.strip() else None
    out: dict = {}
    node = out
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return out


def load_config(path: Optional[str] = None, overrides: Optional[list] = None, **flags) -> dict:
    """Defaults, then the YAML file, then ``--set`` overrides, then explicit flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg = _merge(cfg, data)
    for text in overrides or []:
        cfg = _merge(cfg, parse_override(text))
    for key, value in flags.items():
        if value is not None:
            cfg[key] = value
    return cfg


def _num(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def _grid(spec, name: str) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(_num(spec["start"], name), _num(spec["stop"], name), int(spec["num"]))
    if isinstance(spec, (list, tuple)):
        return np.array([_num(v, name) for v in spec])
    raise ConfigError(f"{name} must be a list or a start/stop/num mapping")


def build_params(cfg: dict) -> PhaseoniumParams:
    p = cfg["params"]
    return PhaseoniumParams(_num(p["alpha"], "alpha"), _num(p["phi"], "phi"), _num(p.get("epsilon", 0.0), "epsilon"))


def build_collision(cfg: dict, noise: Optional[NoiseSpec] = None) -> CollisionConfig:
    temps = cfg["initial_temperatures"]
    temps = [temps] if np.isscalar(temps) else list(temps)
    return CollisionConfig(
        params=build_params(cfg),
        dt=_num(cfg["dt"], "dt"),
        omega=_num(cfg["omega"], "omega"),
        n_steps=int(cfg["n_steps"]),
        initial_temperatures=tuple(_num(t, "initial_temperatures") for t in temps),
        space=HilbertSpec(int(cfg["space"]["cutoff"]), int(cfg["space"]["margin"])),
        noise=noise,
        tol=_num(cfg["tol"], "tol"),
        window=int(cfg["window"]),
        stop_on_convergence=bool(cfg["stop_on_convergence"]),
        leakage_threshold=_num(cfg["leakage_threshold"], "leakage_threshold"),
    )


def build_noise(cfg: dict, target: str) -> NoiseSpec:
    n = cfg["noise"]
    opt = lambda key: None if n.get(key) is None else _num(n[key], f"noise.{key}")
    return NoiseSpec(
        target=target,
        sigma=_num(n["sigma"], "noise.sigma"),
        mean=opt("mean"),
        low=opt("low"),
        high=opt("high"),
        n_runs=int(n["n_runs"]),
        seed=int(cfg["seed"]),
        tail=int(n["tail"]),
    )


def resolve_jobs(cfg: dict) -> int:
    jobs = cfg.get("jobs")
    if jobs is None:
        jobs = os.environ.get("PCL_JOBS", 1)
    return max(1, int(jobs))


def resolve_out(cfg: dict, kind: str) -> Path:
    out = cfg.get("out")
    if out is None:
        out = Path(os.environ.get("PCL_OUT", "pcl-out")) / kind
    return Path(out)


# -- output helpers ------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    """Floats are written with ``repr`` so equal data gives identical bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path: Path) -> dict:
    """Columns of a CSV as lists of strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class RunRecord:
    kind: str
    config: dict
    seed: int
    summary: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    version: str = __version__
    started: str = ""
    finished: str = ""

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.__dict__), indent=2, sort_keys=True)

    def save(self, out: Path) -> Path:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "run.json"
        path.write_text(self.to_json() + "\n")
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_trajectory(path: Path, record: TrajectoryRecord) -> Path:
    return write_csv(path, TrajectoryRecord.COLUMNS, record.rows())


ENSEMBLE_COLUMNS = ("run_id",) + TrajectoryRecord.COLUMNS


def write_ensemble(path: Path, ensemble: EnsembleRecord) -> Path:
    def rows():
        for i, run in enumerate(ensemble.runs):
            for row in run.rows():
                yield (i,) + row
        stacked = {c: np.array([getattr(r, c) for r in ensemble.runs]) for c in TrajectoryRecord.COLUMNS[1:]}
        steps = ensemble.runs[0].step
        for label, fn in (("mean", np.mean), ("std", np.std)):
            agg = {c: fn(v, axis=0) for c, v in stacked.items()}
            for k, step in enumerate(steps):
                yield (label, step) + tuple(agg[c][k] for c in TrajectoryRecord.COLUMNS[1:])

    return write_csv(path, ENSEMBLE_COLUMNS, rows())


# -- commands ----------------------------------------------------------------

def landscape_temperature(alpha: float, phi: float) -> float:
    """``T_phi`` on a grid cell: 0 without gain, ``inf`` where gain >= loss."""
    ga = 2 * alpha ** 2
    gb = (1 - alpha ** 2) * (1 + math.cos(phi))
    if ga == 0:
        return 0.0
    if ga >= gb * (1 - RATIO_MARGIN):
        return math.inf
    return -1.0 / math.log(ga / gb)


def cmd_landscape(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    alphas = _grid(cfg["landscape"]["alpha"], "landscape.alpha")
    phis = _grid(cfg["landscape"]["phi"], "landscape.phi")
    if np.any(alphas ** 2 > 1):
        raise ConfigError("landscape alpha values must satisfy alpha^2 <= 1")
    rows = [(a, p, landscape_temperature(a, p)) for a in alphas for p in phis]
    path = write_csv(out / "landscape.csv", ("alpha", "phi", "T"), rows)
    finite = [t for _, _, t in rows if math.isfinite(t)]
    summary = {
        "cells": len(rows),
        "divergent": len(rows) - len(finite),
        "T_max_finite": max(finite) if finite else None,
    }
    return RunRecord("landscape", cfg, int(cfg["seed"]), summary, [path.name])


def cmd_trajectory(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    record = run_trajectory(build_collision(cfg))
    path = write_trajectory(out / "trajectory.csv", record)
    return RunRecord("trajectory", cfg, int(cfg["seed"]), record.summary(), [path.name])


def _noisy(cfg: dict, out: Path, jobs: int, target: str) -> RunRecord:
    noise = build_noise(cfg, target)
    config = build_collision(cfg, noise)
    ensemble = run_stochastic_ensemble(config, jobs=jobs)
    reference = run_trajectory(replace(config, noise=None, stop_on_convergence=False))
    paths = [write_ensemble(out / "ensemble.csv", ensemble), write_trajectory(out / "reference.csv", reference)]
    summary = ensemble.summary()
    if ensemble.target is not None:
        summary["reference_steps_to_1pct_T1"] = steps_to_band(reference.T1, ensemble.target)
        if config.mode_count == 2:
            summary["reference_steps_to_1pct_T2"] = steps_to_band(reference.T2, ensemble.target)
    return RunRecord(f"noisy-{target}", cfg, int(cfg["seed"]), summary, [p.name for p in paths])


def cmd_noisy_dt(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    return _noisy(cfg, out, jobs, "dt")


def cmd_noisy_phi(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    return _noisy(cfg, out, jobs, "phi")


GAUSSIAN_COLUMNS = ("t", "n1", "n2", "purity", "S1", "S2", "MI", "log_negativity")


def cmd_gaussian(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    g = cfg["gaussian"]
    if g.get("gamma_alpha_prime") is None or g.get("gamma_beta_prime") is None:
        params = build_params(cfg)
        dt = _num(cfg["dt"], "dt")
        theta = _num(cfg["omega"], "omega") * dt
        ga, gb = params.gamma_alpha * theta ** 2 / dt, params.gamma_beta * theta ** 2 / dt
    else:
        ga, gb = _num(g["gamma_alpha_prime"], "gamma_alpha_prime"), _num(g["gamma_beta_prime"], "gamma_beta_prime")
    generator = lindblad_generator(ga, gb)
    occ = g.get("initial_occupations")
    if occ is None:
        temps = list(cfg["initial_temperatures"]) * 2
        occ = [0.0 if t == 0 else 1.0 / math.expm1(1.0 / _num(t, "initial_temperatures")) for t in temps[:2]]
    start = CovarianceState.thermal(_num(occ[0], "n1"), _num(occ[1], "n2"))
    traj = propagate_covariance(start, generator, _num(g["dt_step"], "dt_step"), _num(g["t_total"], "t_total"))
    every = max(1, int(g.get("sample_every", 1)))

    def rows():
        for t, state in list(zip(traj.times, traj.states))[::every]:
            m = gaussian_measures(state)
            n1, n2 = state.occupations()
            yield (t, n1, n2, m.purity, m.entropy1, m.entropy2, m.mutual_information, m.log_negativity)

    path = write_csv(out / "gaussian.csv", GAUSSIAN_COLUMNS, rows())
    summary = {"gamma_alpha_prime": ga, "gamma_beta_prime": gb, "stable": generator.is_stable}
    if generator.is_stable:
        steady = steady_covariance(generator)
        n1, n2 = steady.occupations()
        summary.update(steady_n1=n1, steady_n2=n2, steady_MI=gaussian_measures(steady).mutual_information)
        if ga > 0:
            summary["T_phi"] = -1.0 / math.log(ga / gb)
    final = traj.states[-1].occupations()
    summary.update(final_n1=final[0], final_n2=final[1])
    return RunRecord("gaussian", cfg, int(cfg["seed"]), summary, [path.name])


SWEEP_COLUMNS = ("value", "T1", "T2", "target", "converged_at", "steps_to_1pct_T1", "steps_to_1pct_T2", "n_steps", "status")


def _sweep_cell(cfg: dict, axis: str, value: float) -> tuple:
    cell = copy.deepcopy(cfg)
    if axis in ("alpha", "phi", "epsilon"):
        cell["params"][axis] = value
    elif axis == "initial_temperature":
        cell["initial_temperatures"] = [value] * len(list(np.atleast_1d(cfg["initial_temperatures"])))
    else:
        cell[axis] = value
    try:
        record = run_trajectory(build_collision(cell))
    except (ValueError, RuntimeError) as err:
        return (value, None, None, None, None, None, None, None, f"error: {err}")
    s = record.summary()
    return (
        value,
        s["final_T1"],
        s["final_T2"],
        s["target"],
        s["converged_at"],
        s.get("steps_to_1pct_T1"),
        s.get("steps_to_1pct_T2"),
        s["n_steps"],
        "ok",
    )


def run_sweep(cfg: dict, jobs: int = 1) -> list:
    axis = cfg["sweep"]["axis"]
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = [float(v) for v in _grid(cfg["sweep"]["values"], "sweep.values")]
    if jobs > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, [cfg] * len(values), [axis] * len(values), values))
    return [_sweep_cell(cfg, axis, v) for v in values]


def cmd_sweep(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    rows = run_sweep(cfg, jobs)
    path = write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    failed = [r for r in rows if r[-1] != "ok"]
    summary = {"axis": cfg["sweep"]["axis"], "cells": len(rows), "failed": len(failed)}
    return RunRecord("sweep", cfg, int(cfg["seed"]), summary, [path.name])


def cmd_protocol(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    """Solve the free ancilla parameter for a target temperature, then thermalise."""
    p = cfg["protocol"]
    target = _num(p["target"], "protocol.target")
    if p.get("alpha") is not None:
        alpha = _num(p["alpha"], "protocol.alpha")
        phi = solve_phi(target, alpha)
    elif p.get("phi") is not None:
        phi = _num(p["phi"], "protocol.phi")
        alpha = solve_alpha(target, phi)
    else:
        raise ConfigError("protocol needs either alpha or phi")
    cell = _merge(cfg, {"params": {"alpha": alpha, "phi": phi, "epsilon": 0.0}})
    record = run_trajectory(build_collision(cell))
    path = write_trajectory(out / "trajectory.csv", record)
    summary = record.summary()
    summary.update(alpha=alpha, phi=phi, requested=target)
    summary["rel_error_T1"] = abs(record.T1[-1] - target) / target
    if not np.isnan(record.T2[-1]):
        summary["rel_error_T2"] = abs(record.T2[-1] - target) / target
    return RunRecord("protocol", cell, int(cfg["seed"]), summary, [path.name])


# -- canned figures ------------------------------------------------------------

HOT_PHI = 2.404315987
COLD_PHI = 1.585589386
FIG3_ROWS = ((0.05, 0.10, 0.15), (0.55, 0.60, 0.65), (1.20, 1.25, 1.30))

FIGURES: dict = {
    "fig3": {"n_steps": 3000, "cutoff": 24, "alpha": 0.25},
    "fig4": {"n_steps": 600, "cutoff": 24, "n_runs": 10, "tail": 200, "sigma": 0.2, "dt": 0.4},
    "fig5": {"n_steps": 3000, "cutoff": 32, "n_runs": 10, "tail": 500, "sigma": 0.2, "dt": 0.2},
}


def _figure_base(cfg: dict, settings: dict) -> dict:
    base = _merge(cfg, {"space": {"cutoff": settings["cutoff"], "margin": 2}, "n_steps": settings["n_steps"]})
    base["initial_temperatures"] = [1.0, 1.0]
    return base


def _fig3(cfg: dict, out: Path, jobs: int, settings: dict) -> tuple[dict, list]:
    base = _figure_base(cfg, settings)
    cells = []
    for row, dts in enumerate(FIG3_ROWS):
        for dt in dts:
            for curve, phi in (("hot", HOT_PHI), ("cold", COLD_PHI)):
                cells.append((row, dt, curve, _merge(base, {"dt": dt, "params": {"alpha": settings["alpha"], "phi": phi}})))
    configs = [c[-1] for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_trajectory, [build_collision(c) for c in configs]))
    else:
        records = [run_trajectory(build_collision(c)) for c in configs]
    artifacts, runs = [], []
    for (row, dt, curve, _), rec in zip(cells, records):
        name = f"row{row}_dt{dt:.2f}_{curve}.csv"
        write_trajectory(out / name, rec)
        artifacts.append(name)
        runs.append({"row": row, "dt": dt, "curve": curve, "csv": name, **rec.summary()})
    panels = [
        {"row": row, "cavity": cav + 1, "dts": list(dts), "curves": ["hot", "cold"]}
        for row, dts in enumerate(FIG3_ROWS)
        for cav in range(2)
    ]
    return {"panels": panels, "runs": runs}, artifacts


def _fig_noise(cfg, out, jobs, settings, target, branches) -> tuple[dict, list]:
    base = _figure_base(cfg, settings)
    base["dt"] = settings["dt"]
    base["noise"] = {"sigma": settings["sigma"], "mean": None, "low": None, "high": None,
                     "n_runs": settings["n_runs"], "tail": settings["tail"]}
    artifacts, out_branches = [], []
    for label, overrides in branches:
        branch_cfg = _merge(base, overrides)
        record = _noisy(branch_cfg, out / label, jobs, target)
        artifacts += [f"{label}/{a}" for a in record.artifacts]
        out_branches.append({"branch": label, **record.summary})
    return {"branches": out_branches}, artifacts


def cmd_figure(cfg: dict, out: Path, jobs: int = 1) -> RunRecord:
    fig = dict(cfg.get("figure") or {})
    name = fig.pop("name", "fig3")
    if name not in FIGURES:
        raise ConfigError(f"figure name must be one of {sorted(FIGURES)}, got {name!r}")
    settings = {**FIGURES[name], **fig}
    if name == "fig3":
        summary, artifacts = _fig3(cfg, out, jobs, settings)
    elif name == "fig4":
        half_pi = math.pi / 2
        branches = [
            ("hot", {"params": {"alpha": solve_alpha(1.5, half_pi), "phi": half_pi, "epsilon": 0.0}}),
            ("cold", {"params": {"alpha": solve_alpha(0.5, half_pi), "phi": half_pi, "epsilon": 0.0}}),
        ]
        summary, artifacts = _fig_noise(cfg, out, jobs, settings, "dt", branches)
    else:
        branches = [
            (f"T0_{t0:g}", {"params": {"alpha": 0.25, "phi": HOT_PHI, "epsilon": 0.0}, "initial_temperatures": [t0, t0]})
            for t0 in (1.0, 2.0)
        ]
        summary, artifacts = _fig_noise(cfg, out, jobs, settings, "phi", branches)
    summary["figure"] = name
    summary["settings"] = settings
    return RunRecord("figure", cfg, int(cfg["seed"]), summary, artifacts)


COMMANDS: dict[str, Callable[..., RunRecord]] = {
    "landscape": cmd_landscape,
    "trajectory": cmd_trajectory,
    "noisy-dt": cmd_noisy_dt,
    "noisy-phi": cmd_noisy_phi,
    "gaussian": cmd_gaussian,
    "sweep": cmd_sweep,
    "protocol": cmd_protocol,
    "figure": cmd_figure,
}


def run_experiment(kind: str, cfg: dict, out: Optional[Path] = None, jobs: Optional[int] = None, plot: Optional[bool] = None) -> RunRecord:
    """Run one command, write its artifacts and ``run.json`` under ``out``."""
    if kind not in COMMANDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    out = resolve_out(cfg, kind) if out is None else Path(out)
    jobs = resolve_jobs(cfg) if jobs is None else jobs
    started = _now()
    record = COMMANDS[kind](cfg, out, jobs)
    record.started = started
    if cfg.get("plot") if plot is None else plot:
        from .plotting import render

        record.artifacts += render(kind, out, record)
    record.finished = _now()
    record.save(out)
    return record
