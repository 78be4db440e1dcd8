"""Phaseonium ancillas: construction, rates, temperatures and inverse solves.

Ancilla matrices use the ordered basis ``(e, g1, g2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import CavityState, leakage, photonic_bands

PHI_MARGIN = 1e-9
RATIO_MARGIN = 1e-9


class NoSteadyStateError(ValueError):
    """The gain/loss ratio is >= 1, so no finite stationary temperature exists."""


class NoSolutionError(ValueError):
    """An inverse parameter solve has no admissible solution."""


@dataclass(frozen=True)
class PhaseoniumParams:
    """Excited amplitude ``alpha``, coherence phase ``phi`` and ground splitting ``epsilon``."""

    alpha: float
    phi: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.phi) and np.isfinite(self.epsilon)):
            raise ValueError("phaseonium parameters must be finite")
        if self.alpha ** 2 > 1:
            raise ValueError(f"alpha^2 must not exceed 1, got alpha={self.alpha}")
        if abs(self.phi) >= np.pi - PHI_MARGIN:
            raise ValueError(f"|phi| must stay below pi, got phi={self.phi}")
        if abs(self.epsilon) > self.beta2 / 2:
            raise ValueError("epsilon would make a ground population negative")

    @property
    def beta2(self) -> float:
        return 1.0 - self.alpha ** 2

    @property
    def gamma_alpha(self) -> float:
        return 2.0 * self.alpha ** 2

    @property
    def gamma_beta(self) -> float:
        return self.beta2 * (1.0 + np.cos(self.phi))

    @property
    def ratio(self) -> float:
        """``gamma_alpha / gamma_beta`` (``inf`` when the loss rate vanishes)."""
        if self.gamma_beta == 0:
            return np.inf if self.gamma_alpha > 0 else np.nan
        return self.gamma_alpha / self.gamma_beta

    @property
    def is_valid(self) -> bool:
        """True when a finite stationary temperature exists."""
        return bool(self.ratio < 1 - RATIO_MARGIN)


@dataclass(frozen=True, eq=False)
class AncillaState:
    """3x3 density matrix of one ancilla, checked on construction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex, copy=True)
        if m.shape != (3, 3):
            raise ValueError(f"ancilla state must be 3x3, got {m.shape}")
        if abs(np.trace(m) - 1) > 1e-12:
            raise ValueError("ancilla trace must be 1")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("ancilla state must be Hermitian")
        if np.linalg.eigvalsh(m)[0] < -1e-12:
            raise ValueError("ancilla state must be positive semidefinite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


def make_phaseonium(params: PhaseoniumParams) -> AncillaState:
    """Phaseonium ancilla with ground coherence ``(beta^2/2) e^{-i phi}`` at (g1, g2).

    For ``epsilon != 0`` the coherence modulus is reduced to
    ``sqrt(beta^4/4 - epsilon^2)``, the largest value compatible with
    positivity; at ``epsilon = 0`` the matrix is the usual rank-2 phaseonium.
    """
    b = params.beta2 / 2
    eps = params.epsilon
    coherence = np.sqrt(max(b * b - eps * eps, 0.0)) * np.exp(-1j * params.phi)
    m = np.zeros((3, 3), dtype=complex)
    m[0, 0] = params.alpha ** 2
    m[1, 1] = b + eps
    m[2, 2] = b - eps
    m[1, 2] = coherence
    m[2, 1] = np.conj(coherence)
    return AncillaState(m)


def thermal_ancilla(alpha: float) -> AncillaState:
    """Incoherent ancilla ``diag(alpha^2, beta^2/2, beta^2/2)``."""
    b2 = 1.0 - alpha ** 2
    return AncillaState(np.diag([alpha ** 2, b2 / 2, b2 / 2]).astype(complex))


def gamma_rates(params: PhaseoniumParams) -> tuple[float, float]:
    return params.gamma_alpha, params.gamma_beta


def temperature_from_ratio(ratio: float) -> float:
    """``T = -1/ln(ratio)`` for a Boltzmann ratio in ``[0, 1)``."""
    if ratio == 0:
        return 0.0
    if not 0 < ratio < 1 - RATIO_MARGIN:
        raise NoSteadyStateError(f"ratio {ratio} admits no finite stationary temperature")
    return float(-1.0 / np.log(ratio))


def steady_temperature(params: PhaseoniumParams) -> float:
    """Stationary cavity temperature ``-1/ln(gamma_alpha/gamma_beta)``.

    Raises :class:`NoSteadyStateError` when the ratio reaches 1; a vanishing
    gain rate gives zero temperature.
    """
    return temperature_from_ratio(params.ratio)


def _check_target(temperature: float):
    if not temperature > 0 or not np.isfinite(temperature):
        raise NoSolutionError(f"target temperature must be positive and finite, got {temperature}")


def solve_alpha(temperature: float, phi: float) -> float:
    """Excited amplitude giving stationary temperature ``temperature`` at phase ``phi``."""
    _check_target(temperature)
    if abs(phi) >= np.pi - PHI_MARGIN:
        raise NoSolutionError("phi = pi leaves the loss rate at zero")
    x = np.exp(-1.0 / temperature) * (1.0 + np.cos(phi))
    alpha2 = x / (2.0 + x)
    if not 0 <= alpha2 < 1:
        raise NoSolutionError(f"required alpha^2 = {alpha2} outside [0, 1)")
    return float(np.sqrt(alpha2))


def solve_phi(temperature: float, alpha: float) -> float:
    """Coherence phase in ``[0, pi)`` giving stationary temperature ``temperature``.

    The mirror solution ``-phi`` is equally valid.
    """
    _check_target(temperature)
    if not 0 <= alpha ** 2 < 1:
        raise NoSolutionError(f"alpha^2 = {alpha ** 2} outside [0, 1)")
    cos_phi = 2.0 * alpha ** 2 * np.exp(1.0 / temperature) / (1.0 - alpha ** 2) - 1.0
    if not -1.0 < cos_phi <= 1.0:
        raise NoSolutionError(
            f"no phase reaches T={temperature} with alpha={alpha} (cos phi would be {cos_phi:.6g})"
        )
    phi = float(np.arccos(cos_phi))
    if phi >= np.pi - PHI_MARGIN:
        raise NoSolutionError("solution sits at phi = pi")
    return phi


_RAISE = np.array([[0, 1, 1], [0, 0, 0], [0, 0, 0]], dtype=complex)  # sum_i |e><g_i|


def apparent_temperature(ancilla: AncillaState) -> float:
    """Temperature assigned by the collective absorption/emission ratio.

    With ``J+ = |e>(<g1| + <g2|)`` the ratio ``<J- J+> / <J+ J->`` plays the
    role of ``exp(1/T)``; for fresh phaseonium this reproduces
    :func:`steady_temperature`.
    """
    eta = ancilla.matrix
    emission = float(np.real(np.trace(_RAISE @ _RAISE.conj().T @ eta)))
    absorption = float(np.real(np.trace(_RAISE.conj().T @ _RAISE @ eta)))
    if absorption <= 0:
        raise ValueError("apparent temperature undefined: no absorption channel")
    if emission <= 0:
        return 0.0
    log_arg = absorption / emission
    if log_arg <= 1:
        raise ValueError(f"apparent temperature undefined (absorption/emission = {log_arg:.6g})")
    return float(1.0 / np.log(log_arg))


def ancilla_after_steady(params: PhaseoniumParams, theta: float, rho_star: CavityState) -> AncillaState:
    """Ancilla leaving a cavity that sits in the stationary Gibbs state.

    Populations are untouched; the (g1, g2) coherence becomes
    ``(beta^2/2) Gamma`` with ``Gamma = cos(phi) - i sin(phi) Tr[C' rho*]``.
    """
    if rho_star.mode_count != 1:
        raise ValueError("rho_star must be a one-mode state")
    leakage(rho_star, warn=True)
    _, cp, _ = photonic_bands(float(theta), rho_star.space.cutoff)
    tr_cp = float(np.real(np.dot(cp, rho_star.populations())))
    gamma = np.cos(params.phi) - 1j * np.sin(params.phi) * tr_cp
    b = params.beta2 / 2
    m = np.diag([params.alpha ** 2, b, b]).astype(complex)
    m[1, 2] = b * gamma
    m[2, 1] = b * np.conj(gamma)
    return AncillaState(m)


def coherence_energy_gap(phi: float) -> float:
    """``ln(1 + cos phi)``: inverse-temperature shift paid for the coherence."""
    if abs(phi) >= np.pi:
        raise ValueError("|phi| must be below pi")
    return float(np.log1p(np.cos(phi)))
