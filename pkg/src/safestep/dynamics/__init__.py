from .backend import BACKEND
from .biped import (as_control_affine, biped_hybrid_system, bias_forces,
                    com_positions, forward_dynamics, guard_value,
                    impact_reset, kinetic_energy, mass_matrix,
                    potential_energy, swing_foot, swing_foot_jacobian,
                    RELABEL)
from .hybrid import (HybridSystem, HybridTrace, ImpactEvent, simulate_hybrid)
from .model import ControlAffineModel
from .params import (BipedParameters, BipedState, LinkParams, LINK_NAMES,
                     chain_coefficients, load_biped_params,
                     save_biped_params)
from .pendulum import inverted_pendulum_model

__all__ = [
    "BACKEND", "BipedParameters", "BipedState", "ControlAffineModel",
    "HybridSystem", "HybridTrace", "ImpactEvent", "LinkParams",
    "LINK_NAMES", "RELABEL", "as_control_affine", "bias_forces",
    "biped_hybrid_system", "chain_coefficients", "com_positions",
    "forward_dynamics", "guard_value", "impact_reset",
    "inverted_pendulum_model", "kinetic_energy", "load_biped_params",
    "mass_matrix", "potential_energy", "save_biped_params",
    "simulate_hybrid", "swing_foot", "swing_foot_jacobian",
]
