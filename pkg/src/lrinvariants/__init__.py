"""Exact solutions of the Schrodinger equation with a time-dependent linear potential.

H(t) = p^2/2m + f(t) q is solved through its linear and quadratic
invariants (hbar = 1). The analytic states are cross-checked against direct
numerical propagation on a periodic grid.
"""
from .algebra import QuadOp, apply_quadop, commutator, hamiltonian, lvn_residual
from .auxiliary import (
    CoeffTrajectory, InvariantConstants, casimir_sigma, solve_linear_coeffs,
    solve_quadratic_coeffs,
)
from .completeness import SquareMatchReport, match_square, square_linear, verify_invariant_maps_solutions
from .errors import LRError
from .force import ForceProfile, parse_force
from .grid import GridSpec, GridWavefunction
from .propagate import (
    PropagationRun, crank_nicolson_evolve, expectation, fidelity, split_step_evolve,
)
from .scenario import ScenarioConfig, load_config, parse_config, run_scenario
from .transforms import (
    DisplacementParams, PaperParameterization, SqueezeParams, SymplecticGaussian,
    compose_symplectic, diagonalize_quadratic, eliminate_linear_part, solve_squeeze_paper,
)
from .wavefunctions import (
    LRSolution, apply_gaussian_unitary, assemble_solution, build_lr_solutions, ho_eigenstate,
    linear_invariant_eigenstate, lr_phase,
)

__version__ = "0.1.0"

__all__ = [
    "CoeffTrajectory", "DisplacementParams", "ForceProfile", "GridSpec", "GridWavefunction", "InvariantConstants",
    "LRError", "LRSolution", "PaperParameterization", "PropagationRun", "QuadOp", "ScenarioConfig",
    "SqueezeParams", "SquareMatchReport", "SymplecticGaussian", "apply_gaussian_unitary", "apply_quadop",
    "assemble_solution", "build_lr_solutions", "casimir_sigma", "commutator", "compose_symplectic",
    "crank_nicolson_evolve", "diagonalize_quadratic", "eliminate_linear_part", "expectation", "fidelity",
    "hamiltonian", "ho_eigenstate", "linear_invariant_eigenstate", "load_config", "lr_phase", "lvn_residual",
    "match_square", "parse_config", "parse_force", "run_scenario", "solve_linear_coeffs",
    "solve_quadratic_coeffs", "solve_squeeze_paper", "split_step_evolve", "square_linear",
    "verify_invariant_maps_solutions",
]
