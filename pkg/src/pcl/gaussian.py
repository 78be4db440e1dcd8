"""Continuous-time cascade limit on second moments.

Quadratures are ``q = (a + a^dag)/sqrt(2)``, ``p = i(a^dag - a)/sqrt(2)``,
ordered ``(q1, p1, q2, p2)``; covariances are ``sigma_kl = <{dr_k, dr_l}>/2``
so the vacuum has ``sigma = I/2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import sparse

from .fock import CavityOperator, CavityState, HilbertSpec, annihilation, embed, identity
from .kraus import KrausSet
from .phaseonium import NoSteadyStateError

OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
UNCERTAINTY_TOL = 1e-9
SYM_TOL = 1e-12

# rows: coefficients of a and a^dag on (q, p)
_A_ROW = np.array([1.0, 1.0j]) / np.sqrt(2)
_AD_ROW = np.array([1.0, -1.0j]) / np.sqrt(2)


def _collective(row: np.ndarray) -> np.ndarray:
    return np.concatenate([row, row])


def drift_diffusion(hamiltonian: np.ndarray, jumps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drift and diffusion for ``H = r^T G r / 2`` and linear jumps ``L_j = c_j . r``.

    ``A = Omega (G + Im C^dag C)`` and ``Dif = Omega Re(C^dag C) Omega^T``;
    rates are folded into the rows of ``jumps``.
    """
    g = np.asarray(hamiltonian, dtype=float)
    c = np.atleast_2d(np.asarray(jumps, dtype=complex))
    gram = c.conj().T @ c
    drift = OMEGA @ (g + gram.imag)
    diffusion = OMEGA @ gram.real @ OMEGA.T
    return drift, 0.5 * (diffusion + diffusion.T)


@dataclass(frozen=True)
class LindbladGenerator:
    """Cascade generator with gain ``D[a^dag + b^dag]``, loss ``D[a + b]`` and
    ``H_eff = i (gb - ga)(a^dag b - b^dag a)/2``."""

    gamma_alpha_prime: float
    gamma_beta_prime: float

    def __post_init__(self):
        if min(self.gamma_alpha_prime, self.gamma_beta_prime) < 0:
            raise ValueError("rates must be non-negative")

    @property
    def coupling(self) -> float:
        return self.gamma_beta_prime - self.gamma_alpha_prime

    def hamiltonian_matrix(self) -> np.ndarray:
        # i g/2 (a^dag b - b^dag a) = -g/2 (q1 p2 - p1 q2)
        g = np.zeros((4, 4))
        half = self.coupling / 2
        g[0, 3] = g[3, 0] = -half
        g[1, 2] = g[2, 1] = half
        return g

    def jump_matrix(self) -> np.ndarray:
        return np.array([
            np.sqrt(self.gamma_alpha_prime) * _collective(_AD_ROW),
            np.sqrt(self.gamma_beta_prime) * _collective(_A_ROW),
        ])

    @property
    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return drift_diffusion(self.hamiltonian_matrix(), self.jump_matrix())

    @property
    def drift(self) -> np.ndarray:
        return self.matrices[0]

    @property
    def diffusion(self) -> np.ndarray:
        return self.matrices[1]

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(np.linalg.eigvals(self.drift).real))

    @property
    def is_stable(self) -> bool:
        return self.spectral_abscissa < 0

    @classmethod
    def from_collisions(cls, gamma_alpha: float, gamma_beta: float, theta: float, dt: float) -> "LindbladGenerator":
        """Rates ``gamma' = gamma theta^2 / dt`` of the coarse-grained collision map."""
        scale = theta ** 2 / dt
        return cls(gamma_alpha * scale, gamma_beta * scale)


def lindblad_generator(gamma_alpha_prime: float, gamma_beta_prime: float) -> LindbladGenerator:
    return LindbladGenerator(float(gamma_alpha_prime), float(gamma_beta_prime))


def _uncertainty_margin(sigma: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sigma + 0.5j * OMEGA)[0])


@dataclass(frozen=True, eq=False)
class CovarianceState:
    mean: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        sigma = np.array(self.sigma, dtype=float)
        if sigma.shape != (4, 4):
            raise ValueError("covariance must be 4x4")
        if np.max(np.abs(sigma - sigma.T)) > SYM_TOL:
            raise ValueError("covariance must be symmetric")
        margin = _uncertainty_margin(sigma)
        if margin < -UNCERTAINTY_TOL:
            raise ValueError(f"uncertainty relation violated (min eigenvalue {margin:.3e})")
        mean.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def thermal(cls, n1: float, n2: float = 0.0) -> "CovarianceState":
        return cls(np.zeros(4), np.diag([n1 + 0.5, n1 + 0.5, n2 + 0.5, n2 + 0.5]))

    @classmethod
    def vacuum(cls) -> "CovarianceState":
        return cls.thermal(0.0, 0.0)

    def occupations(self) -> tuple[float, float]:
        """``<n_i> = (sigma_qq + sigma_pp - 1)/2 + |mean|^2/2`` per mode."""
        s, m = self.sigma, self.mean
        return tuple(float((s[k, k] + s[k + 1, k + 1] - 1 + m[k] ** 2 + m[k + 1] ** 2) / 2) for k in (0, 2))

    def mode(self, index: int) -> np.ndarray:
        k = 2 * index
        return self.sigma[k:k + 2, k:k + 2]


def _derivative(drift, diffusion, sigma):
    return drift @ sigma + sigma @ drift.T + diffusion


def _rk4(drift, diffusion, mean, sigma, h):
    k1 = _derivative(drift, diffusion, sigma)
    k2 = _derivative(drift, diffusion, sigma + 0.5 * h * k1)
    k3 = _derivative(drift, diffusion, sigma + 0.5 * h * k2)
    k4 = _derivative(drift, diffusion, sigma + h * k3)
    sigma = sigma + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    m1 = drift @ mean
    m2 = drift @ (mean + 0.5 * h * m1)
    m3 = drift @ (mean + 0.5 * h * m2)
    m4 = drift @ (mean + h * m3)
    mean = mean + h / 6 * (m1 + 2 * m2 + 2 * m3 + m4)
    return mean, 0.5 * (sigma + sigma.T)


class CovarianceTrajectory(NamedTuple):
    times: np.ndarray
    states: list

    def sigmas(self) -> np.ndarray:
        return np.array([s.sigma for s in self.states])

    def occupations(self) -> np.ndarray:
        return np.array([s.occupations() for s in self.states])


def _integrate(state, drift, diffusion, dt_step, n_steps):
    mean, sigma = np.array(state.mean), np.array(state.sigma)
    out = [(mean, sigma)]
    for k in range(n_steps):
        mean, sigma = _rk4(drift, diffusion, mean, sigma, dt_step)
        margin = _uncertainty_margin(sigma)
        if margin < -UNCERTAINTY_TOL:
            raise ValueError(
                f"uncertainty relation violated at t={(k + 1) * dt_step:.4g} (margin {margin:.3e}); reduce dt_step"
            )
        out.append((mean, sigma))
    return out


def propagate_covariance(
    state: CovarianceState,
    generator: LindbladGenerator,
    dt_step: float,
    t_total: float,
    halving_tol: Optional[float] = None,
) -> CovarianceTrajectory:
    """Fixed-step RK4 for ``d sigma/dt = A sigma + sigma A^T + Dif`` and ``d mean/dt = A mean``.

    ``t_total`` is rounded to a whole number of steps.  With ``halving_tol``
    the run is repeated at ``dt_step/2`` and a ``ValueError`` is raised if the
    two disagree by more than the tolerance at any shared time.
    """
    if not dt_step > 0 or t_total < 0:
        raise ValueError("dt_step must be positive and t_total non-negative")
    n_steps = int(round(t_total / dt_step))
    drift, diffusion = generator.matrices
    path = _integrate(state, drift, diffusion, dt_step, n_steps)
    if halving_tol is not None:
        fine = _integrate(state, drift, diffusion, dt_step / 2, 2 * n_steps)[::2]
        gap = max(np.max(np.abs(a[1] - b[1])) for a, b in zip(path, fine))
        if gap > halving_tol:
            raise ValueError(f"step-halving check failed: deviation {gap:.3e} > {halving_tol:.1e}")
    times = dt_step * np.arange(n_steps + 1)
    return CovarianceTrajectory(times, [CovarianceState(m, s) for m, s in path])


def _vech_index():
    return [(i, j) for i in range(4) for j in range(i, 4)]


def steady_covariance(generator: LindbladGenerator) -> CovarianceState:
    """Solve ``A S + S A^T + Dif = 0`` for the 10 independent entries of ``S``."""
    drift, diffusion = generator.matrices
    if not generator.is_stable:
        raise NoSteadyStateError(
            f"drift is not stable (spectral abscissa {generator.spectral_abscissa:.3e}); no steady state"
        )
    index = _vech_index()
    system = np.empty((10, 10))
    for col, (i, j) in enumerate(index):
        basis = np.zeros((4, 4))
        basis[i, j] = basis[j, i] = 1.0
        image = drift @ basis + basis @ drift.T
        system[:, col] = [image[a, b] for a, b in index]
    rhs = -np.array([diffusion[a, b] for a, b in index])
    x = np.linalg.solve(system, rhs)
    sigma = np.zeros((4, 4))
    for value, (i, j) in zip(x, index):
        sigma[i, j] = sigma[j, i] = value
    return CovarianceState(np.zeros(4), sigma)


def lyapunov_residual(generator: LindbladGenerator, state: CovarianceState) -> float:
    drift, diffusion = generator.matrices
    return float(np.max(np.abs(_derivative(drift, diffusion, state.sigma))))


# -- information measures ----------------------------------------------------

def symplectic_eigenvalues(sigma: np.ndarray) -> np.ndarray:
    omega = OMEGA[: len(sigma), : len(sigma)]
    vals = np.abs(np.linalg.eigvals(1j * omega @ sigma))
    return np.sort(vals)[::2]


def _entropy_term(nu: float) -> float:
    if nu <= 0.5:
        return 0.0
    return float((nu + 0.5) * np.log(nu + 0.5) - (nu - 0.5) * np.log(nu - 0.5))


class GaussianMeasures(NamedTuple):
    purity: float
    entropy1: float
    entropy2: float
    mutual_information: float
    log_negativity: float


def gaussian_measures(state: CovarianceState, tol: float = 1e-9) -> GaussianMeasures:
    """Purity, per-mode entropies, mutual information and log-negativity (nats)."""
    sigma = state.sigma
    nus = symplectic_eigenvalues(sigma)
    if nus[0] < 0.5 - tol:
        raise ValueError(f"invalid state: symplectic eigenvalue {nus[0]:.6g} < 1/2")
    s1 = _entropy_term(np.sqrt(np.linalg.det(state.mode(0))))
    s2 = _entropy_term(np.sqrt(np.linalg.det(state.mode(1))))
    s12 = sum(_entropy_term(nu) for nu in nus)
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    nu_pt = symplectic_eigenvalues(flip @ sigma @ flip)[0]
    purity = 1.0 / (4.0 * np.sqrt(np.linalg.det(sigma)))
    return GaussianMeasures(
        purity=float(purity),
        entropy1=s1,
        entropy2=s2,
        mutual_information=float(max(s1 + s2 - s12, 0.0)),
        log_negativity=float(max(0.0, -np.log(2 * nu_pt))),
    )


# -- Heisenberg picture --------------------------------------------------------

def dual_step(observable: CavityOperator, kraus: KrausSet) -> CavityOperator:
    """``O -> sum_i E_i^dag O E_i``."""
    if observable.space != kraus.space or observable.mode_count != kraus.mode_count:
        raise ValueError("observable and Kraus set live on different spaces")
    o = observable.matrix
    total = None
    for op in kraus.operators:
        m = op.matrix
        term = m.conj().T @ o @ m
        total = term if total is None else total + term
    return CavityOperator(total, observable.space, observable.mode_count)


# -- truncated-Fock bridge ---------------------------------------------------

def _quadratures(space: HilbertSpec) -> list:
    a = annihilation(space)
    q = (a + a.dag) * (1 / np.sqrt(2))
    p = (a.dag - a) * (1j / np.sqrt(2))
    return [embed(q, 0).matrix, embed(p, 0).matrix, embed(q, 1).matrix, embed(p, 1).matrix]


def covariance_from_state(state: CavityState) -> CovarianceState:
    """First and second quadrature moments of a two-mode density matrix.

    No validity check is applied beyond the constructor: truncation can make
    moments of boundary-heavy states unphysical.
    """
    if state.mode_count != 2:
        raise ValueError("covariance_from_state needs a two-mode state")
    rho = sparse.csr_matrix(np.asarray(state.matrix))
    trace = state.trace
    ops = _quadratures(state.space)
    ev = lambda op: float(np.real((op @ rho).diagonal().sum()) / trace)
    mean = np.array([ev(r) for r in ops])
    sigma = np.empty((4, 4))
    for k in range(4):
        for l in range(k, 4):
            anti = ops[k] @ ops[l] + ops[l] @ ops[k]
            sigma[k, l] = sigma[l, k] = 0.5 * ev(anti) - mean[k] * mean[l]
    return CovarianceState(mean, sigma)


def fock_lindbladian(generator: LindbladGenerator, space: HilbertSpec):
    """Right-hand side ``rho -> L(rho)`` of the cascade master equation on a truncated space."""
    a = embed(annihilation(space), 0).matrix
    b = embed(annihilation(space), 1).matrix
    loss = (a + b).tocsr()
    gain = loss.conj().T.tocsr()
    h = 0.5j * generator.coupling * (a.conj().T @ b - b.conj().T @ a)
    ops = [(generator.gamma_alpha_prime, gain), (generator.gamma_beta_prime, loss)]
    anti = sum(rate * (m.conj().T @ m) for rate, m in ops)
    eff = (-1j * h - 0.5 * anti).toarray()
    jumps = [(rate, m.toarray()) for rate, m in ops if rate > 0]

    def rhs(rho):
        out = eff @ rho
        out = out + out.conj().T
        for rate, m in jumps:
            out = out + rate * (m @ rho @ m.conj().T)
        return out

    return rhs


def fock_lindblad_trajectory(
    state: CavityState, generator: LindbladGenerator, dt_step: float, t_total: float, every: int = 1
) -> tuple[np.ndarray, list]:
    """Brute-force RK4 integration of the cascade master equation in Fock space.

    Returns the sample times and the states at every ``every``-th step.
    """
    rhs = fock_lindbladian(generator, state.space)
    rho = np.array(state.matrix, dtype=complex)
    n_steps = int(round(t_total / dt_step))
    times, states = [0.0], [state]
    for k in range(1, n_steps + 1):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt_step * k1)
        k3 = rhs(rho + 0.5 * dt_step * k2)
        k4 = rhs(rho + dt_step * k3)
        rho = rho + dt_step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % every == 0:
            times.append(k * dt_step)
            states.append(CavityState(0.5 * (rho + rho.conj().T), state.space, 2))
    return np.array(times), states
