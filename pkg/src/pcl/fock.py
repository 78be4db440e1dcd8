"""Truncated Fock-space arithmetic for one or two single-mode cavities.

Units are hbar = k_B = omega = 1 throughout, so temperatures are measured in
units of the photon energy.  Two-mode objects use the Kronecker ordering
``index = n1 * D + n2`` (mode 1 is the slow index).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import sparse

LEAKAGE_WARN = 1e-8

Matrix = Union[np.ndarray, sparse.spmatrix]


class TruncationWarning(UserWarning):
    """Raised when too much population sits at the top of the Fock ladder."""


@dataclass(frozen=True)
class HilbertSpec:
    """Fock cutoff ``D`` (levels ``0..D-1``) and the boundary margin ``m``.

    The top ``m`` levels are excluded from exactness checks and count as
    leaked population.
    """

    cutoff: int = 40
    margin: int = 2

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"cutoff must be an integer >= 2, got {self.cutoff}")
        if int(self.margin) != self.margin or not 0 <= self.margin < self.cutoff:
            raise ValueError(f"margin must satisfy 0 <= m < D, got m={self.margin}")

    @property
    def interior(self) -> int:
        """Number of levels considered exact, ``D - m``."""
        return self.cutoff - self.margin

    def dim(self, mode_count: int = 1) -> int:
        return self.cutoff ** mode_count

    def interior_mask(self, mode_count: int = 1) -> np.ndarray:
        """Boolean mask over basis indices whose occupations are all interior."""
        inner = np.arange(self.cutoff) < self.interior
        if mode_count == 1:
            return inner
        return np.logical_and.outer(inner, inner).ravel()


def _freeze(matrix: Matrix) -> Matrix:
    if sparse.issparse(matrix):
        return sparse.csr_matrix(matrix)
    out = np.array(matrix, dtype=complex, copy=True)
    out.flags.writeable = False
    return out


def _check_shape(matrix, space: HilbertSpec, mode_count: int):
    if mode_count not in (1, 2):
        raise ValueError(f"mode_count must be 1 or 2, got {mode_count}")
    dim = space.dim(mode_count)
    if matrix.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got {matrix.shape}")


@dataclass(frozen=True, eq=False)
class CavityOperator:
    """An operator on the truncated Fock space of one or two modes.

    ``matrix`` is either a dense array or a scipy sparse matrix (two-mode
    Kraus operators are stored sparse).  Instances are read-only.
    """

    matrix: Matrix
    space: HilbertSpec
    mode_count: int = 1

    def __post_init__(self):
        _check_shape(self.matrix, self.space, self.mode_count)
        object.__setattr__(self, "matrix", _freeze(self.matrix))

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.matrix.toarray()
        return np.asarray(self.matrix)

    @property
    def dag(self) -> "CavityOperator":
        return CavityOperator(self.matrix.conj().T, self.space, self.mode_count)

    def _wrap(self, matrix) -> "CavityOperator":
        return CavityOperator(matrix, self.space, self.mode_count)

    def _other(self, other: "CavityOperator"):
        if not isinstance(other, CavityOperator):
            return NotImplemented
        if other.space != self.space or other.mode_count != self.mode_count:
            raise ValueError("operators live on different spaces")
        return other.matrix

    def __matmul__(self, other):
        m = self._other(other)
        if m is NotImplemented:
            return m
        return self._wrap(self.matrix @ m)

    def __add__(self, other):
        m = self._other(other)
        if m is NotImplemented:
            return m
        return self._wrap(self.matrix + m)

    def __sub__(self, other):
        m = self._other(other)
        if m is NotImplemented:
            return m
        return self._wrap(self.matrix - m)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self._wrap(self.matrix * scalar)

    __rmul__ = __mul__

    def kron(self, other: "CavityOperator") -> "CavityOperator":
        """Two-mode operator ``self (mode 1) x other (mode 2)``, stored sparse."""
        if self.mode_count != 1 or other.mode_count != 1 or self.space != other.space:
            raise ValueError("kron needs two one-mode operators on the same space")
        return CavityOperator(
            sparse.kron(sparse.csr_matrix(self.matrix), sparse.csr_matrix(other.matrix), format="csr"),
            self.space,
            2,
        )

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"CavityOperator(D={self.space.cutoff}, modes={self.mode_count}, {kind})"


@dataclass(frozen=True, eq=False)
class CavityState:
    """Density matrix of one or two cavity modes (dense, read-only).

    Construction only checks the shape; call :meth:`validate` to enforce the
    trace, Hermiticity and positivity invariants.
    """

    matrix: np.ndarray
    space: HilbertSpec
    mode_count: int = 1

    def __post_init__(self):
        if sparse.issparse(self.matrix):
            object.__setattr__(self, "matrix", self.matrix.toarray())
        _check_shape(self.matrix, self.space, self.mode_count)
        object.__setattr__(self, "matrix", _freeze(self.matrix))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def validate(self, trace_tol: float = 1e-12, herm_tol: float = 1e-12, pos_tol: float = 1e-10) -> "CavityState":
        rho = np.asarray(self.matrix)
        if abs(np.trace(rho) - 1) > trace_tol:
            raise ValueError(f"trace deviates from 1 by {abs(np.trace(rho) - 1):.3e}")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > herm_tol:
            raise ValueError(f"state is not Hermitian (max deviation {herm:.3e})")
        lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lowest < -pos_tol:
            raise ValueError(f"state has a negative eigenvalue {lowest:.3e}")
        return self

    def __repr__(self):
        return f"CavityState(D={self.space.cutoff}, modes={self.mode_count}, trace={self.trace:.12f})"


# -- ladder operators ------------------------------------------------------

def annihilation(space: HilbertSpec) -> CavityOperator:
    """Truncated annihilation operator with ``<n-1|a|n> = sqrt(n)``."""
    d = space.cutoff
    return CavityOperator(np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex), space)


def creation(space: HilbertSpec) -> CavityOperator:
    return annihilation(space).dag


def number_operator(space: HilbertSpec) -> CavityOperator:
    return CavityOperator(np.diag(np.arange(space.cutoff)).astype(complex), space)


def identity(space: HilbertSpec, mode_count: int = 1) -> CavityOperator:
    dim = space.dim(mode_count)
    if mode_count == 1:
        return CavityOperator(np.eye(dim, dtype=complex), space)
    return CavityOperator(sparse.identity(dim, dtype=complex, format="csr"), space, 2)


def embed(op: CavityOperator, mode: int) -> CavityOperator:
    """Lift a one-mode operator to the two-mode space acting on ``mode`` (0 or 1)."""
    eye = identity(op.space)
    return op.kron(eye) if mode == 0 else eye.kron(op)


# -- photonic operators ----------------------------------------------------

@lru_cache(maxsize=512)
def photonic_bands(theta: float, cutoff: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonzero entries of the photonic operators for Rabi phase ``theta``.

    Returns ``(c, cp, s)`` where ``C = diag(c)``, ``C' = diag(cp)`` and ``S``
    has ``s[n]`` at row ``n+1``, column ``n``.  ``C`` is evaluated through
    ``a a^dagger = n + 1``; the factor ``sqrt(n+1)`` from the raising operator
    cancels the ``sqrt(2(n+1))`` denominator, so no 0/0 limit ever arises.
    """
    n = np.arange(cutoff, dtype=float)
    c = np.cos(theta * np.sqrt(2.0 * (n + 1.0)))
    cp = np.cos(theta * np.sqrt(2.0 * n))
    s = np.sin(theta * np.sqrt(2.0 * (n[:-1] + 1.0))) / np.sqrt(2.0)
    for arr in (c, cp, s):
        arr.flags.writeable = False
    return c, cp, s


def photonic_ops(theta: float, space: HilbertSpec) -> tuple[CavityOperator, CavityOperator, CavityOperator]:
    """Return ``(C, C', S)`` for the accumulated Rabi phase ``theta``.

    ``C = cos(theta sqrt(2 a a^dag))``, ``C' = cos(theta sqrt(2 a^dag a))`` and
    ``S = a^dag sin(theta sqrt(2 a a^dag)) / sqrt(2 a a^dag)``, evaluated
    directly on the number-operator spectrum.
    """
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    c, cp, s = photonic_bands(float(theta), space.cutoff)
    return (
        CavityOperator(np.diag(c), space),
        CavityOperator(np.diag(cp), space),
        CavityOperator(np.diag(s, -1), space),
    )


# -- states ----------------------------------------------------------------

def thermal_populations(temperature: float, cutoff: int) -> np.ndarray:
    if temperature < 0 or not np.isfinite(temperature):
        raise ValueError(f"temperature must be finite and non-negative, got {temperature}")
    p = np.zeros(cutoff)
    if temperature == 0:
        p[0] = 1.0
        return p
    p = np.exp(-np.arange(cutoff) / temperature)
    return p / p.sum()


def thermal_state(temperature: float, space: HilbertSpec) -> CavityState:
    """Gibbs state ``p_n ~ exp(-n/T)`` renormalised on the truncated ladder."""
    state = CavityState(np.diag(thermal_populations(temperature, space.cutoff)).astype(complex), space)
    leakage(state, warn=True)
    return state


def product_state(first: CavityState, second: CavityState) -> CavityState:
    if first.mode_count != 1 or second.mode_count != 1 or first.space != second.space:
        raise ValueError("product_state needs two one-mode states on the same space")
    return CavityState(np.kron(first.matrix, second.matrix), first.space, 2)


def partial_trace(state: CavityState, keep: int) -> CavityState:
    """Reduced state of mode ``keep`` (0 or 1) of a two-mode state."""
    if state.mode_count == 1:
        return state
    d = state.space.cutoff
    rho = np.asarray(state.matrix).reshape(d, d, d, d)
    reduced = np.einsum("ijkj->ik", rho) if keep == 0 else np.einsum("ijil->jl", rho)
    return CavityState(reduced, state.space)


def mean_photon_number(state: CavityState, mode: int = 0) -> float:
    """Trace-normalised mean occupation of ``mode``."""
    pops = state.populations()
    d = state.space.cutoff
    if state.mode_count == 2:
        grid = pops.reshape(d, d)
        pops = grid.sum(axis=1) if mode == 0 else grid.sum(axis=0)
    return float(np.dot(np.arange(d), pops) / pops.sum())


def temperature_from_occupation(nbar: float) -> float:
    """Invert the Bose-Einstein occupancy, ``T = 1/ln(1 + 1/nbar)``."""
    if nbar <= 0:
        return 0.0
    return float(1.0 / np.log1p(1.0 / nbar))


def effective_temperature(state: CavityState, mode: int = 0) -> float:
    """Temperature whose Gibbs state has the same mean photon number.

    Exact on Gibbs states; for anything else it is an estimator, see
    :func:`thermal_mismatch`.
    """
    return temperature_from_occupation(mean_photon_number(state, mode))


def thermal_mismatch(state: CavityState, mode: int = 0) -> float:
    """``|p1/p0 - exp(-1/T)|`` with ``T`` from :func:`effective_temperature`.

    Zero for Gibbs states; a cheap flag for non-thermal ones.
    """
    reduced = partial_trace(state, mode)
    p = reduced.populations()
    t = effective_temperature(reduced)
    expected = 0.0 if t == 0 else np.exp(-1.0 / t)
    if p[0] <= 0:
        return float("inf")
    return float(abs(p[1] / p[0] - expected))


def leakage(state: CavityState, warn: bool = False) -> float:
    """Population in the top ``margin`` levels of any mode."""
    pops = state.populations()
    mask = ~state.space.interior_mask(state.mode_count)
    value = float(pops[mask].sum())
    if warn and value > LEAKAGE_WARN:
        warnings.warn(
            f"leakage {value:.2e} at cutoff D={state.space.cutoff}: cutoff too small",
            TruncationWarning,
            stacklevel=2,
        )
    return value


def purity(state: CavityState) -> float:
    rho = np.asarray(state.matrix)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def trace_distance(first: CavityState, second: CavityState) -> float:
    diff = np.asarray(first.matrix) - np.asarray(second.matrix)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())
