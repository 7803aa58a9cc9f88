"""Equilibrium matchings by deferred acceptance, and brute-force checks of
exchangeability, submodularity and related set and function orders."""

__version__ = "0.1.0"

from .core import (DEFAULT_TOL, EquilibriumCheck, EquilibriumOutcome, MarketInstance, Matching,
                   classical_equilibrium_check, ext_dot, ext_mul, feasibility_residual,
                   uv_from_scalar)
from .da import (DAOptions, DATrace, choice_maps, extract_equilibrium, run_alkan_gale, run_da,
                 trace_invariants, verify_generalized_equilibrium)
from .errors import (ConditioningError, ContractError, DomainError, IterationLimitError,
                     MatronMatchError, SchemaError, ShapeError, SizeError, SolverIntegrityError,
                     StateError)
from .grid import (GridFunction, GridSaturationWarning, biconjugate_gap, default_dual_axes,
                   legendre_transform, subdifferential)
from .lcp import LCPInstance, is_stieltjes, lcp_enumerate, lcp_solve, quadratic_residual
from .orders import (DualityReport, check_eps_d_p_order, check_eps_d_q_order, check_exchangeable,
                     check_p_order, check_q_order_functions, check_submodular, duality_check)
from .report import OrderReport
from .sets import (PointSet, SetFunctionPair, check_m_natural, check_matron, check_paramodular,
                   check_q_order_sets, support_function)
from .welfare import (GridWelfare, LogitWelfare, QuadraticWelfare, grid_welfare_from_conjugate,
                      kkt_residuals, logit_constrained_demand, logit_multipliers, logit_value,
                      welfare_fenchel_residual)
