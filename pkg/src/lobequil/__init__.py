"""lobequil: dynamic equilibrium limit-order-book model and optimal execution.

The book shape (density, execution costs, supply curve) is derived in closed
form from an expected-return function; market scenarios combine a diffusion
for the fundamental price with compound-Poisson order flow; a
finite-difference solver computes the execution value function from its
quasi-variational inequality; and the policy engine extracts and rolls out
the optimal purchase strategy.  ``lobequil.verify`` holds independent
oracles, and the ``lobequil`` console script drives batch runs.
"""

from .errors import (AdmissibilityError, ConfigurationError, DomainError,
                     LobequilError, ModelViolationError, SimulationError,
                     SolverError)
from .utility import (CustomUtility, ExponentialUtility, LinearUtility,
                      UtilityModel, utility_from_dict)
from .book import (LobSnapshot, best_ask, density_at_depth, depth_at_price,
                   execution_cost, liquidity_cost, price_at_depth,
                   smoothed_cost, supply_curve)
from .market import (CostBreakdown, JumpDistribution, MarketParams,
                     MarketPath, PenaltyModel, Strategy, cost_J, cost_J0,
                     cost_J1, evolve_inventory, jump_smooth, jump_truncate,
                     path_rng_seed, replay, simulate_path, strategy_none,
                     strategy_single_jump, strategy_twap)
from .solver import (Grid, ValueField, apply_L, apply_M, cfl_stable_dt,
                     monotonicity_violations, obstacle_field, residual_field,
                     solve_qvi)
from .policy import (Policy, greedy_strategy, inaction_region, jump_map,
                     rollout, synthesize)
from .verify import (MiniInstance, brute_force_value, dpp_residual,
                     oracle_probes, regularity_scan, run_all, thm41_ladder)
from .config import RunConfig, load_config

__version__ = "0.1.0"
