"""Cavity thermalisation by repeated collisions with phaseonium ancillas."""

__version__ = "0.1.0"

from .fock import CavityOperator, CavityState, HilbertSpec, thermal_state  # noqa: E402
from .phaseonium import PhaseoniumParams, solve_alpha, solve_phi, steady_temperature  # noqa: E402
from .kraus import kraus_cascade, kraus_single  # noqa: E402
from .evolution import CollisionConfig, NoiseSpec, run_stochastic_ensemble, run_trajectory  # noqa: E402
from .gaussian import lindblad_generator, propagate_covariance, steady_covariance  # noqa: E402

__all__ = [
    "CavityOperator",
    "CavityState",
    "CollisionConfig",
    "HilbertSpec",
    "NoiseSpec",
    "PhaseoniumParams",
    "kraus_cascade",
    "kraus_single",
    "lindblad_generator",
    "propagate_covariance",
    "run_stochastic_ensemble",
    "run_trajectory",
    "solve_alpha",
    "solve_phi",
    "steady_covariance",
    "steady_temperature",
    "thermal_state",
]
