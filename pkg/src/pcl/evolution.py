"""Stroboscopic collision dynamics for one cavity or two cascaded cavities."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import linalg, sparse, stats

from .fock import (
    CavityState,
    HilbertSpec,
    leakage,
    photonic_bands,
    product_state,
    temperature_from_occupation,
    thermal_state,
)
from .kraus import (
    DENSE_LIMIT,
    KrausSet,
    _cascade_bare,
    _cascade_weights,
    apply_kraus,
    cascade_bare_operators,
    dense_unitary_oracle,
    kraus_cascade,
    kraus_single,
    kraus_weights,
)
from .phaseonium import (
    AncillaState,
    NoSteadyStateError,
    PhaseoniumParams,
    RATIO_MARGIN,
    steady_temperature,
    temperature_from_ratio,
)

log = logging.getLogger(__name__)

LEAKAGE_ABORT = 1e-6
PHI_BOUND = np.pi - 0.05
DT_FLOOR = 0.02


class LeakageError(RuntimeError):
    """Population at the Fock boundary exceeded the configured threshold."""


def _check_leak(value: float, threshold: float, step: Optional[int] = None):
    if value > threshold:
        where = "" if step is None else f" at step {step}"
        raise LeakageError(f"leakage {value:.3e} exceeds threshold {threshold:.1e}{where}; raise the cutoff")


# -- single collisions -----------------------------------------------------

def collide_single(state: CavityState, kraus: KrausSet, leakage_threshold: float = LEAKAGE_ABORT) -> CavityState:
    """One collision on a single cavity, ``rho -> sum_i E_i rho E_i^dag``."""
    if state.mode_count != 1 or kraus.mode_count != 1 or state.space != kraus.space:
        raise ValueError("collide_single needs a one-mode state and a matching one-mode Kraus set")
    out = CavityState(apply_kraus(kraus, np.asarray(state.matrix)), state.space)
    _check_leak(leakage(out), leakage_threshold)
    return out


def collide_cascade(state: CavityState, kraus: KrausSet, leakage_threshold: float = LEAKAGE_ABORT) -> CavityState:
    """One ancilla crossing cavity 1 and then cavity 2."""
    if state.mode_count != 2 or kraus.mode_count != 2 or state.space != kraus.space:
        raise ValueError("collide_cascade needs a two-mode state and a matching two-mode Kraus set")
    rho = sparse.csr_matrix(np.asarray(state.matrix))
    out = CavityState(apply_kraus(kraus, rho).toarray(), state.space, 2)
    _check_leak(leakage(out), leakage_threshold)
    return out


def _second_mode_unitary(u: np.ndarray, d: int) -> np.ndarray:
    # acts on (ancilla, n1, n2) as u on (ancilla, n2), identity on n1
    u4 = u.reshape(3, d, 3, d)
    full = np.einsum("anbm,ij->ainbjm", u4, np.eye(d))
    return full.reshape(3 * d * d, 3 * d * d)


def collide_via_unitary(state: CavityState, ancilla: AncillaState, theta: float) -> tuple[CavityState, AncillaState]:
    """Collision by explicit joint unitary evolution and partial traces.

    Returns the evolved cavity state and the outgoing ancilla.  Two-mode
    states see the ancilla interact with cavity 1 first, then cavity 2.
    Dense, so only practical for small cutoffs.
    """
    d = state.space.cutoff
    if d > DENSE_LIMIT or (state.mode_count == 2 and d > 16):
        raise ValueError(f"dense unitary path too large for D={d} with {state.mode_count} mode(s)")
    u = dense_unitary_oracle(theta, state.space)
    if state.mode_count == 2:
        u1 = np.kron(u, np.eye(d)).reshape(3, d, d, 3, d, d)
        u1 = u1.reshape(3 * d * d, 3 * d * d)
        u = _second_mode_unitary(u, d) @ u1
    rho = np.asarray(state.matrix)
    n = rho.shape[0]
    chi = u @ np.kron(ancilla.matrix, rho) @ u.conj().T
    chi = chi.reshape(3, n, 3, n)
    cavity = np.einsum("aiaj->ij", chi)
    eta = np.einsum("aibi->ab", chi)
    eta = 0.5 * (eta + eta.conj().T)
    return CavityState(cavity, state.space, state.mode_count), AncillaState(eta / np.real(np.trace(eta)))


def steady_state_analytic(params: PhaseoniumParams, space: HilbertSpec) -> CavityState:
    """Diagonal fixed point with ``p_{n+1}/p_n = gamma_alpha/gamma_beta``."""
    ratio = params.ratio
    if not ratio < 1 - RATIO_MARGIN:
        raise NoSteadyStateError(f"gamma_alpha/gamma_beta = {ratio} >= 1: no stationary state")
    p = ratio ** np.arange(space.cutoff, dtype=float)
    return CavityState(np.diag(p / p.sum()).astype(complex), space)


# -- configuration and records --------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise on ``dt`` or ``phi``, resampled independently each collision.

    Samples outside ``[low, high]`` are redrawn.  Defaults: ``dt >= 0.02`` and
    ``|phi| <= pi - 0.05``; ``mean`` defaults to the noiseless config value.
    """

    target: str
    sigma: float
    mean: Optional[float] = None
    low: Optional[float] = None
    high: Optional[float] = None
    n_runs: int = 10
    seed: int = 0
    tail: int = 500

    def __post_init__(self):
        if self.target not in ("dt", "phi"):
            raise ValueError(f"noise target must be 'dt' or 'phi', got {self.target!r}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.n_runs < 1:
            raise ValueError("n_runs must be positive")
        lo, hi = self.bounds
        if self.target == "dt" and lo <= 0:
            raise ValueError("dt bounds must keep dt > 0")
        if self.target == "phi" and max(abs(lo), abs(hi)) >= np.pi:
            raise ValueError("phi bounds must keep |phi| < pi")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.target == "dt":
            return (DT_FLOOR if self.low is None else self.low, np.inf if self.high is None else self.high)
        return (-PHI_BOUND if self.low is None else self.low, PHI_BOUND if self.high is None else self.high)


@dataclass(frozen=True)
class CollisionConfig:
    params: PhaseoniumParams
    dt: float
    omega: float = 1.0
    n_steps: int = 3000
    initial_temperatures: tuple = (1.0, 1.0)
    space: HilbertSpec = field(default_factory=HilbertSpec)
    noise: Optional[NoiseSpec] = None
    tol: float = 1e-3
    window: int = 50
    stop_on_convergence: bool = True
    leakage_threshold: float = LEAKAGE_ABORT

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        temps = self.initial_temperatures
        temps = (float(temps),) if np.isscalar(temps) else tuple(float(t) for t in temps)
        if len(temps) not in (1, 2) or min(temps) < 0:
            raise ValueError("initial_temperatures must hold one or two non-negative values")
        object.__setattr__(self, "initial_temperatures", temps)

    @property
    def theta(self) -> float:
        return self.omega * self.dt

    @property
    def mode_count(self) -> int:
        return len(self.initial_temperatures)

    @property
    def target_temperature(self) -> Optional[float]:
        try:
            return steady_temperature(self.params)
        except NoSteadyStateError:
            return None


@dataclass
class TrajectoryRecord:
    """Per-step observables; index 0 is the initial state.

    ``T2``/``n2`` are NaN for single-cavity runs.  ``converged_at`` is the
    first step of the convergence window, or None.
    """

    step: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    purity: np.ndarray
    leakage: np.ndarray
    converged_at: Optional[int]
    final_state: CavityState
    target: Optional[float]

    COLUMNS = ("step", "T1", "T2", "n1", "n2", "purity", "leakage")

    def __len__(self):
        return len(self.step)

    @property
    def n_steps(self) -> int:
        return len(self.step) - 1

    @property
    def trace_loss(self) -> float:
        return 1.0 - self.final_state.trace

    def temperatures(self, mode: int = 0) -> np.ndarray:
        return self.T1 if mode == 0 else self.T2

    def rows(self):
        for i in range(len(self.step)):
            yield tuple(getattr(self, c)[i] for c in self.COLUMNS)

    def summary(self) -> dict:
        out = {
            "n_steps": self.n_steps,
            "converged_at": self.converged_at,
            "target": self.target,
            "final_T1": float(self.T1[-1]),
            "final_T2": None if np.isnan(self.T2[-1]) else float(self.T2[-1]),
            "trace_loss": self.trace_loss,
            "max_leakage": float(self.leakage.max()),
        }
        if self.target is not None:
            out["steps_to_1pct_T1"] = steps_to_band(self.T1, self.target)
            if not np.isnan(self.T2[-1]):
                out["steps_to_1pct_T2"] = steps_to_band(self.T2, self.target)
        return out


def steps_to_band(series: Sequence[float], target: float, rel_tol: float = 0.01) -> Optional[int]:
    """First step after which ``series`` stays within ``rel_tol * target`` of ``target``.

    None if the last point is still outside the band.
    """
    series = np.asarray(series)
    outside = np.nonzero(np.abs(series - target) > rel_tol * abs(target))[0]
    if len(outside) == 0:
        return 0
    last = int(outside[-1])
    return None if last == len(series) - 1 else last + 1


# -- propagators -----------------------------------------------------------

def _weights(alpha: float, phi: float) -> np.ndarray:
    return kraus_weights(PhaseoniumParams(alpha, phi))


def _bare_single(theta: float, cutoff: int) -> tuple:
    c, cp, s = photonic_bands(float(theta), cutoff)
    sm = np.diag(s, -1)
    return (np.diag(c), sm, np.diag(cp), sm.T.copy())


class _SinglePropagator:
    """Dense one-mode map ``w0 rho + sum_i w_i M_i rho M_i^dag``."""

    def __init__(self, rho: np.ndarray, space: HilbertSpec):
        self.space = space
        self.rho = np.array(rho, dtype=complex)
        self.levels = np.arange(space.cutoff)
        self.inner = space.interior_mask()

    def step(self, params: PhaseoniumParams, theta: float):
        if params.epsilon != 0:
            self.rho = apply_kraus(kraus_single(params, theta, self.space), self.rho)
            return
        w = kraus_weights(params)
        bare = _bare_single(theta, self.space.cutoff)
        rho = self.rho
        out = w[0] * rho
        for wi, m in zip(w[1:], bare):
            out = out + wi * (m @ rho @ m.conj().T)
        self.rho = out

    def observables(self):
        p = np.real(np.diag(self.rho))
        trace = p.sum()
        n1 = float(np.dot(self.levels, p) / trace)
        return n1, np.nan, float(np.real(np.vdot(self.rho.conj().T, self.rho))), float(p[~self.inner].sum())

    def distance_bound(self, previous: np.ndarray) -> float:
        diff = self.rho - previous
        return float(0.5 * np.abs(linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())

    def snapshot(self) -> np.ndarray:
        return self.rho.copy()

    def state(self) -> CavityState:
        return CavityState(self.rho, self.space, 1)


def _excitation_numbers(cutoff: int) -> np.ndarray:
    n = np.arange(cutoff)
    return np.add.outer(n, n).ravel()


@lru_cache(maxsize=8)
def _sector_layout(cutoff: int):
    """Positions of the entries (i, j) with equal total excitation number."""
    total = _excitation_numbers(cutoff)
    dim = cutoff * cutoff
    pos = -np.ones((dim, dim), dtype=np.int64)
    rows, cols = [], []
    for sector in range(2 * cutoff - 1):
        idx = np.nonzero(total == sector)[0]
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    pos[rows, cols] = np.arange(len(rows))
    pos.flags.writeable = False
    return rows, cols, pos, total


def _sector_superoperator(m: sparse.csr_matrix, cutoff: int) -> sparse.csr_matrix:
    """Matrix of ``rho -> M rho M^dag`` restricted to excitation-diagonal entries."""
    rows, cols, pos, total = _sector_layout(cutoff)
    coo = m.tocoo()
    r, c, v = coo.row, coo.col, coo.data
    sec = total[c]
    out_idx, in_idx, vals = [], [], []
    for s in np.unique(sec):
        k = np.nonzero(sec == s)[0]
        ri, ci, vi = r[k], c[k], v[k]
        out_p = pos[ri[:, None], ri[None, :]]
        in_p = pos[ci[:, None], ci[None, :]]
        val = vi[:, None] * np.conj(vi)[None, :]
        keep = out_p >= 0
        out_idx.append(out_p[keep])
        in_idx.append(in_p[keep])
        vals.append(val[keep])
    size = len(rows)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(out_idx), np.concatenate(in_idx))), shape=(size, size)
    )


@lru_cache(maxsize=16)
def _sector_bare(theta: float, space: HilbertSpec) -> tuple:
    return tuple(_sector_superoperator(m, space.cutoff) for m in cascade_bare_operators(theta, space)[1:])


def _is_excitation_diagonal(rho: np.ndarray, cutoff: int) -> bool:
    total = _excitation_numbers(cutoff)
    off = total[:, None] != total[None, :]
    return not np.any(np.abs(rho[off]) > 0)


class _SectorPropagator:
    """Two-mode map on states block-diagonal in ``n1 + n2`` (fixed theta only)."""

    def __init__(self, rho: np.ndarray, space: HilbertSpec):
        self.space = space
        rows, cols, _, _ = _sector_layout(space.cutoff)
        self.rows, self.cols = rows, cols
        self.vec = np.asarray(rho)[rows, cols].astype(complex)
        d = space.cutoff
        diag = np.nonzero(rows == cols)[0]
        self.diag = diag
        self.n1 = rows[diag] // d
        self.n2 = rows[diag] % d
        self.leak = ~space.interior_mask(2)[rows[diag]]

    def step(self, params: PhaseoniumParams, theta: float):
        bare = _sector_bare(float(theta), self.space)
        w = _cascade_weights(params)
        vec = self.vec
        out = w[0] * vec
        for wi, op in zip(w[1:], bare):
            out += wi * (op @ vec)
        self.vec = out

    def observables(self):
        p = np.real(self.vec[self.diag])
        trace = p.sum()
        n1 = float(np.dot(self.n1, p) / trace)
        n2 = float(np.dot(self.n2, p) / trace)
        return n1, n2, float(np.vdot(self.vec, self.vec).real), float(p[self.leak].sum())

    def distance_bound(self, previous: np.ndarray) -> float:
        # entrywise l1 norm bounds the trace norm from above
        return float(0.5 * np.abs(self.vec - previous).sum())

    def snapshot(self) -> np.ndarray:
        return self.vec.copy()

    def state(self) -> CavityState:
        d = self.space.cutoff
        rho = np.zeros((d * d, d * d), dtype=complex)
        rho[self.rows, self.cols] = self.vec
        return CavityState(rho, self.space, 2)


class _SparsePropagator:
    """Two-mode map with a sparse density matrix; handles any theta sequence."""

    def __init__(self, rho: np.ndarray, space: HilbertSpec):
        self.space = space
        self.rho = sparse.csr_matrix(np.asarray(rho))
        d = space.cutoff
        idx = np.arange(d * d)
        self.n1, self.n2 = idx // d, idx % d
        self.leak = ~space.interior_mask(2)
        self._theta = None
        self._bare = None

    def step(self, params: PhaseoniumParams, theta: float):
        if params.epsilon != 0:
            self.rho = apply_kraus(kraus_cascade(params, theta, self.space), self.rho)
            return
        if theta != self._theta:
            bare = _cascade_bare(float(theta), self.space)[1:]
            self._bare = [(m, m.conj().T.tocsr()) for m in bare]
            self._theta = theta
        w = _cascade_weights(params)
        rho = self.rho
        out = w[0] * rho
        for wi, (m, mh) in zip(w[1:], self._bare):
            out = out + wi * (m @ rho @ mh)
        self.rho = out

    def observables(self):
        p = np.real(self.rho.diagonal())
        trace = p.sum()
        purity = float(np.sum(np.abs(self.rho.data) ** 2))
        return float(np.dot(self.n1, p) / trace), float(np.dot(self.n2, p) / trace), purity, float(p[self.leak].sum())

    def distance_bound(self, previous) -> float:
        return float(0.5 * np.abs((self.rho - previous).data).sum())

    def snapshot(self):
        return self.rho.copy()

    def state(self) -> CavityState:
        return CavityState(self.rho.toarray(), self.space, 2)


def initial_state(config: CollisionConfig) -> CavityState:
    states = [thermal_state(t, config.space) for t in config.initial_temperatures]
    if len(states) == 1:
        return states[0]
    return product_state(*states)


def _make_propagator(config: CollisionConfig, rho0: CavityState, varying_theta: bool, method: str = "auto"):
    if config.mode_count == 1:
        return _SinglePropagator(rho0.matrix, config.space)
    rho = np.asarray(rho0.matrix)
    if method == "auto":
        sector_ok = (
            not varying_theta
            and config.params.epsilon == 0
            and _is_excitation_diagonal(rho, config.space.cutoff)
        )
        method = "sector" if sector_ok else "sparse"
    if method == "sector":
        return _SectorPropagator(rho, config.space)
    if method == "sparse":
        return _SparsePropagator(rho, config.space)
    raise ValueError(f"unknown propagation method {method!r}")


def iterate_states(config: CollisionConfig, state: Optional[CavityState] = None, every: int = 1):
    """Yield ``(k, state)`` every ``every`` collisions for ``k = 0..n_steps`` (noise ignored)."""
    rho0 = initial_state(config) if state is None else state
    prop = _make_propagator(config, rho0, False)
    yield 0, rho0
    for k in range(1, config.n_steps + 1):
        prop.step(config.params, config.theta)
        if k % every == 0:
            _check_leak(prop.observables()[3], config.leakage_threshold, k)
            yield k, prop.state()


def _sample(rng: np.random.Generator, mean: float, sigma: float, bounds: tuple[float, float]) -> float:
    if sigma == 0:
        return mean
    low, high = bounds
    while True:
        x = rng.normal(mean, sigma)
        if low <= x <= high:
            return float(x)


def run_trajectory(
    config: CollisionConfig,
    rng: Optional[np.random.Generator] = None,
    state: Optional[CavityState] = None,
    method: str = "auto",
) -> TrajectoryRecord:
    """Iterate collisions from thermal initial states, recording observables.

    With ``config.noise`` set, ``dt`` or ``phi`` is redrawn for every
    collision from ``rng`` (seeded from the noise spec when omitted).
    Raises :class:`LeakageError` when the boundary population grows too large.
    """
    noise = config.noise
    if noise is not None and rng is None:
        rng = np.random.default_rng([noise.seed, 0])
    rho0 = initial_state(config) if state is None else state
    if rho0.mode_count != config.mode_count:
        raise ValueError("initial state does not match the configured number of cavities")
    varying_theta = noise is not None and noise.target == "dt" and noise.sigma > 0
    prop = _make_propagator(config, rho0, varying_theta, method)
    target = config.target_temperature
    base = config.params
    stop = config.stop_on_convergence and noise is None

    n1, n2, pur, leak = prop.observables()
    _check_leak(leak, config.leakage_threshold, 0)
    cols = {name: [] for name in ("n1", "n2", "purity", "leakage")}

    def record(values):
        for name, v in zip(("n1", "n2", "purity", "leakage"), values):
            cols[name].append(v)

    record((n1, n2, pur, leak))

    def within(values) -> bool:
        if target is None:
            return False
        temps = [temperature_from_occupation(values[0])]
        if config.mode_count == 2:
            temps.append(temperature_from_occupation(values[1]))
        return max(abs(t - target) for t in temps) < config.tol

    run_length = 1 if within((n1, n2)) else 0
    converged_at = 0 if run_length >= config.window else None
    previous = prop.snapshot() if target is None else None

    for k in range(1, config.n_steps + 1):
        params, theta = base, config.theta
        if noise is not None:
            if noise.target == "dt":
                mean = config.dt if noise.mean is None else noise.mean
                theta = config.omega * _sample(rng, mean, noise.sigma, noise.bounds)
            else:
                mean = base.phi if noise.mean is None else noise.mean
                params = replace(base, phi=_sample(rng, mean, noise.sigma, noise.bounds))
        prop.step(params, theta)
        values = prop.observables()
        _check_leak(values[3], config.leakage_threshold, k)
        record(values)

        if target is None:
            close = prop.distance_bound(previous) < config.tol
            previous = prop.snapshot()
        else:
            close = within(values)
        run_length = run_length + 1 if close else 0
        if converged_at is None and run_length >= config.window:
            converged_at = k - config.window + 1
            if stop:
                break

    n1 = np.array(cols["n1"])
    n2 = np.array(cols["n2"])
    to_t = np.vectorize(temperature_from_occupation, otypes=[float])
    t2 = to_t(n2) if config.mode_count == 2 else np.full(len(n2), np.nan)
    return TrajectoryRecord(
        step=np.arange(len(n1)),
        T1=to_t(n1),
        T2=t2,
        n1=n1,
        n2=n2,
        purity=np.array(cols["purity"]),
        leakage=np.array(cols["leakage"]),
        converged_at=converged_at,
        final_state=prop.state(),
        target=target,
    )


# -- ensembles -------------------------------------------------------------

class EnsembleRecord(NamedTuple):
    runs: list
    mean_T1: np.ndarray
    std_T1: np.ndarray
    mean_T2: np.ndarray
    std_T2: np.ndarray
    final_T1: tuple
    final_T2: tuple
    target: Optional[float]

    def summary(self) -> dict:
        out = {
            "n_runs": len(self.runs),
            "n_steps": len(self.mean_T1) - 1,
            "target": self.target,
            "final_T1_mean": self.final_T1[0],
            "final_T1_std": self.final_T1[1],
            "final_T2_mean": self.final_T2[0],
            "final_T2_std": self.final_T2[1],
        }
        if self.target is not None:
            out["steps_to_1pct_mean_T1"] = steps_to_band(self.mean_T1, self.target)
            if not np.all(np.isnan(self.mean_T2)):
                out["steps_to_1pct_mean_T2"] = steps_to_band(self.mean_T2, self.target)
        return out


def _run_member(config: CollisionConfig, run_index: int) -> TrajectoryRecord:
    rng = np.random.default_rng([config.noise.seed, run_index])
    return run_trajectory(config, rng=rng)


def _tail_stats(runs, attr: str, tail: int) -> tuple:
    finals = np.array([np.mean(getattr(r, attr)[-tail:]) for r in runs])
    if np.all(np.isnan(finals)):
        return (None, None)
    return (float(finals.mean()), float(finals.std()))


def run_stochastic_ensemble(config: CollisionConfig, jobs: int = 1) -> EnsembleRecord:
    """Independent noisy trajectories, seeded by ``(noise.seed, run_index)``.

    Members run in a process pool when ``jobs > 1``; results are merged by run
    index, so the output does not depend on the worker count.  The final
    temperature statistics are the mean and spread across runs of each run's
    average over its trailing ``noise.tail`` steps.
    """
    if config.noise is None:
        raise ValueError("run_stochastic_ensemble needs a NoiseSpec")
    config = replace(config, stop_on_convergence=False)
    indices = range(config.noise.n_runs)
    if jobs > 1 and config.noise.n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_member, [config] * len(indices), indices))
    else:
        runs = [_run_member(config, i) for i in indices]
    t1 = np.array([r.T1 for r in runs])
    t2 = np.array([r.T2 for r in runs])
    tail = min(config.noise.tail, config.n_steps)
    return EnsembleRecord(
        runs=runs,
        mean_T1=t1.mean(axis=0),
        std_T1=t1.std(axis=0),
        mean_T2=t2.mean(axis=0),
        std_T2=t2.std(axis=0),
        final_T1=_tail_stats(runs, "T1", tail),
        final_T2=_tail_stats(runs, "T2", tail),
        target=config.target_temperature,
    )


class DistributionSummary(NamedTuple):
    mean: float
    mode: float
    skewness: float
    temperature_at_mean_phi: float
    n_accepted: int
    n_rejected: int


def apparent_temperature_distribution(
    params: PhaseoniumParams, sigma: float, n_samples: int = 100_000, seed: int = 0, bins: int = 256
) -> DistributionSummary:
    """Statistics of the stationary temperature seen by ancillas with noisy phase.

    Phases are drawn from ``N(phi, sigma)``; draws outside ``|phi| <= pi - 0.05``
    or without a finite temperature are rejected and counted.  The mode is the
    centre of the fullest histogram bin between the 0.5% and 99.5% quantiles.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    t_ref = steady_temperature(params)
    rng = np.random.default_rng(seed)
    phi = rng.normal(params.phi, sigma, size=n_samples) if sigma > 0 else np.full(n_samples, params.phi)
    ga = params.gamma_alpha
    gb = params.beta2 * (1 + np.cos(phi))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gb > 0, ga / gb, np.inf)
    ok = (np.abs(phi) <= PHI_BOUND) & (ratio < 1 - RATIO_MARGIN)
    ratio = ratio[ok]
    if ga == 0:
        temps = np.zeros(len(ratio))
    else:
        temps = -1.0 / np.log(ratio)
    if len(temps) == 0:
        raise ValueError("every sample was rejected")
    if np.ptp(temps) == 0:
        mode, skew = float(temps[0]), 0.0
    else:
        lo, hi = np.quantile(temps, [0.005, 0.995])
        counts, edges = np.histogram(temps, bins=bins, range=(lo, hi))
        i = int(np.argmax(counts))
        mode = float(0.5 * (edges[i] + edges[i + 1]))
        skew = float(stats.skew(temps))
    return DistributionSummary(
        mean=float(temps.mean()),
        mode=mode,
        skewness=skew,
        temperature_at_mean_phi=t_ref,
        n_accepted=int(ok.sum()),
        n_rejected=int((~ok).sum()),
    )
