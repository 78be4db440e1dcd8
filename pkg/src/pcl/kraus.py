"""Exact finite-time collision unitaries and the Kraus maps they induce.

Joint cavity-ancilla matrices are ordered ancilla-major: ``(e, g1, g2) x |n>``,
so index ``k * D + n`` belongs to ancilla level ``k`` and photon number ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import linalg, sparse

from .fock import CavityOperator, HilbertSpec, annihilation, identity, photonic_bands, photonic_ops
from .phaseonium import AncillaState, PhaseoniumParams, make_phaseonium

DENSE_LIMIT = 64


@dataclass(frozen=True, eq=False)
class BlockUnitary:
    """3x3 grid of one-mode operators forming the collision unitary."""

    blocks: tuple
    theta: float

    @property
    def space(self) -> HilbertSpec:
        return self.blocks[0][0].space

    def assemble(self) -> np.ndarray:
        return np.block([[blk.dense() for blk in row] for row in self.blocks])


def evolution_block(theta: float, space: HilbertSpec) -> BlockUnitary:
    """Closed form of ``exp(-i theta V)`` in terms of ``C``, ``C'`` and ``S``."""
    c, cp, s = photonic_ops(theta, space)
    one = identity(space)
    sd = s.dag
    ground_plus = 0.5 * (cp + one)
    ground_minus = 0.5 * (cp - one)
    blocks = (
        (c, -1j * sd, -1j * sd),
        (-1j * s, ground_plus, ground_minus),
        (-1j * s, ground_minus, ground_plus),
    )
    return BlockUnitary(blocks, float(theta))


def interaction_matrix(space: HilbertSpec) -> np.ndarray:
    """Dense ``V = a (s1+ + s2+) + a^dag (s1- + s2-)`` with ``s_i+ = |e><g_i|``."""
    a = annihilation(space).dense()
    ad = a.conj().T
    z = np.zeros_like(a)
    return np.block([[z, a, a], [ad, z, z], [ad, z, z]])


def dense_unitary_oracle(theta: float, space: HilbertSpec) -> np.ndarray:
    """``exp(-i theta V)`` by dense matrix exponentiation (truncated ladder)."""
    if space.cutoff > DENSE_LIMIT:
        raise ValueError(f"dense exponential limited to D <= {DENSE_LIMIT}, got {space.cutoff}")
    return linalg.expm(-1j * theta * interaction_matrix(space))


class KrausSet(NamedTuple):
    operators: tuple
    params: PhaseoniumParams
    theta: float
    mode_count: int

    @property
    def space(self) -> HilbertSpec:
        return self.operators[0].space


def _single_bare(theta: float, space: HilbertSpec):
    c, cp, s = photonic_ops(theta, space)
    return identity(space), c, s, cp, s.dag


def kraus_weights(params: PhaseoniumParams) -> np.ndarray:
    """Squared prefactors of the five Kraus operators.

    Completeness rests on ``w0 + w1 + w3 = 1`` with ``w2 = 2 w1``, ``w4 = 2 w3``.
    """
    cos_phi = np.cos(params.phi)
    ga, gb = params.gamma_alpha, params.gamma_beta
    return np.array([params.beta2 * (1 - cos_phi) / 2, ga / 2, ga, gb / 2, gb])


def _cascade_weights(params: PhaseoniumParams) -> np.ndarray:
    # E3 and E4 swap roles relative to the single-cavity ordering
    w = kraus_weights(params)
    return np.array([w[0], w[1], w[2], w[4], w[3]])


@lru_cache(maxsize=256)
def kraus_single(params: PhaseoniumParams, theta: float, space: HilbertSpec) -> KrausSet:
    """Five Kraus operators of one collision on a single cavity.

    ``E0 ~ 1``, ``E1 ~ C``, ``E2 ~ S``, ``E3 ~ C'``, ``E4 ~ S^dag``.  For a
    nonzero ground splitting the set is rebuilt from the ancilla spectrum
    instead (see :func:`kraus_from_ancilla`).
    """
    if params.epsilon != 0:
        ops = kraus_from_ancilla(make_phaseonium(params), theta, space)
        return KrausSet(ops, params, float(theta), 1)
    weights = np.sqrt(kraus_weights(params))
    ops = tuple(w * op for w, op in zip(weights, _single_bare(theta, space)))
    return KrausSet(ops, params, float(theta), 1)


def _sparse_bands(theta: float, cutoff: int):
    c, cp, s = photonic_bands(float(theta), cutoff)
    return (
        sparse.diags(c.astype(complex), format="csr"),
        sparse.diags(cp.astype(complex), format="csr"),
        sparse.diags(s.astype(complex), -1, format="csr"),
    )


@lru_cache(maxsize=64)
def cascade_bare_operators(theta: float, space: HilbertSpec) -> tuple:
    """Unweighted two-mode operators; ``kron(X, Y)`` puts ``X`` on cavity 1."""
    return _cascade_bare(theta, space)


def _cascade_bare(theta: float, space: HilbertSpec) -> tuple:
    # uncached: noisy time steps would flood the cache
    c, cp, s = _sparse_bands(theta, space.cutoff)
    sd = s.conj().T.tocsr()
    kron = lambda x, y: sparse.kron(x, y, format="csr")
    eye = sparse.identity(space.cutoff ** 2, dtype=complex, format="csr")
    return (
        eye,
        kron(c, c) - 2 * kron(s, sd),
        kron(s, cp) + kron(c, s),
        kron(sd, c) + kron(cp, sd),
        kron(cp, cp) - 2 * kron(sd, s),
    )


@lru_cache(maxsize=64)
def kraus_cascade(params: PhaseoniumParams, theta: float, space: HilbertSpec) -> KrausSet:
    """Five two-mode Kraus operators for one ancilla crossing both cavities.

    ``E1 = sqrt(ga/2)(C x C - 2 S x S^dag)``,
    ``E2 = sqrt(ga)(S x C' + C x S)``,
    ``E3 = sqrt(gb)(S^dag x C + C' x S^dag)``,
    ``E4 = sqrt(gb/2)(C' x C' - 2 S^dag x S)`` and ``E0`` proportional to the identity.
    """
    if params.epsilon != 0:
        ops = cascade_kraus_from_ancilla(make_phaseonium(params), theta, space)
        return KrausSet(ops, params, float(theta), 2)
    weights = np.sqrt(_cascade_weights(params))
    ops = tuple(
        CavityOperator(w * m, space, 2) for w, m in zip(weights, cascade_bare_operators(float(theta), space))
    )
    return KrausSet(ops, params, float(theta), 2)


def _ancilla_spectrum(ancilla: AncillaState, cutoff: float = 1e-15):
    vals, vecs = np.linalg.eigh(ancilla.matrix)
    keep = vals > cutoff
    return vals[keep], vecs[:, keep]


def kraus_from_ancilla(ancilla: AncillaState, theta: float, space: HilbertSpec) -> tuple:
    """Kraus operators ``sqrt(lam_j) <i|U|psi_j>`` for an arbitrary ancilla state."""
    u = evolution_block(theta, space).blocks
    vals, vecs = _ancilla_spectrum(ancilla)
    ops = []
    for lam, psi in zip(vals, vecs.T):
        for i in range(3):
            m = sum(psi[x] * u[i][x].dense() for x in range(3))
            ops.append(CavityOperator(np.sqrt(lam) * m, space))
    return tuple(ops)


def cascade_kraus_from_ancilla(ancilla: AncillaState, theta: float, space: HilbertSpec) -> tuple:
    """Two-mode Kraus operators ``sqrt(lam_j) <i|U2 U1|psi_j>`` for any ancilla."""
    u = evolution_block(theta, space).blocks
    vals, vecs = _ancilla_spectrum(ancilla)
    ops = []
    for lam, psi in zip(vals, vecs.T):
        first = [sum(psi[x] * u[m][x].dense() for x in range(3)) for m in range(3)]
        for i in range(3):
            m_op = sum(sparse.kron(first[m], u[i][m].dense(), format="csr") for m in range(3))
            ops.append(CavityOperator(np.sqrt(lam) * m_op, space, 2))
    return tuple(ops)


class CompletenessDefect(NamedTuple):
    interior: float
    boundary: float


def completeness_defect(kraus: KrausSet) -> CompletenessDefect:
    """Max deviation of ``sum E^dag E`` from the identity, interior vs boundary."""
    total = None
    for op in kraus.operators:
        term = op.matrix.conj().T @ op.matrix
        total = term if total is None else total + term
    total = total.toarray() if sparse.issparse(total) else np.asarray(total)
    dev = np.abs(total - np.eye(total.shape[0]))
    mask = kraus.space.interior_mask(kraus.mode_count)
    inner = dev[np.ix_(mask, mask)]
    outer = dev.copy()
    outer[np.ix_(mask, mask)] = 0.0
    return CompletenessDefect(float(inner.max()), float(outer.max()))


def apply_kraus(kraus: KrausSet, rho):
    """``sum_i E_i rho E_i^dag`` on a raw (dense or sparse) matrix."""
    out = None
    for op in kraus.operators:
        m = op.matrix
        term = m @ rho @ m.conj().T
        out = term if out is None else out + term
    return out
