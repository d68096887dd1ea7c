"""Bifurcation analysis of the two-species competition system on the unit ball.

Steady states of

    -Lap u1 = mu u1 (1 - u1) - beta alpha u1 u2
    -Lap u2 = sigma u2 (1 - u2) - beta gamma u1 u2

with no-flux boundary conditions on the radial unit ball, treating the
competition rate beta as the bifurcation parameter: closed-form spectral
algebra at the constant coexistence state, bifurcation-point location,
transversality and index diagnostics, global branch continuation with
nodal tracking, strong-competition limit profiles, and numeric
certification of the supporting scalar inequalities.
"""

from .params import (ConstantState, LimitReaction, Params, constant_state,
                     limit_reaction, locked_pair, trivial_states,
                     validate_params)
from .spectrum import (DiscreteOperator, EigenPair, RadialGrid,
                       assemble_neumann_laplacian, ball_volume, bessel_oracle,
                       build_grid, eigenpairs)
from .linearization import (IndexSpectrum, LinearizationSpectrum,
                            adjoint_matrix, index_spectrum,
                            interaction_matrix, spectral_split)
from .points import (BifurcationPoint, TransversalityReport,
                     admissible_mode_count, bifurcation_direction,
                     find_bifurcation_points, index_jump_check,
                     solve_bifurcation_beta, transversality_check)
from .solver import (NewtonError, StabilityReport, StateFields,
                     constant_state_fields, jacobian, linearized_spectrum,
                     newton_solve, residual)
from .continuation import (Branch, BranchPoint, ContinuationConfig,
                           NodalDiagnostic, branch_switch, continue_branch,
                           nodal_count, state_nodal_diagnostic)
from .limit import (LimitProfile, overlap_decay, segregation_distance,
                    solve_limit_equation, solve_locked_equation)
from .appendix import (AppendixFunctions, evaluate_appendix,
                       run_appendix_sweep, verify_est_m_beta,
                       verify_mono_beta, verify_mono_lambda, verify_z_sign)

__version__ = "0.1.0"
