"""Network capacity expansion under uncertain demand.

Distributionally robust planning with mean/variance information, the
finite-scenario robust baseline, and out-of-sample evaluation.
"""

__version__ = "0.1.0"

from .ambiguity import (MomentInfo, TwoPointDistribution, multi_commodity_shortfall, shortfall_derivative,
                        threshold, worst_case_distribution, worst_case_shortfall)
from .drso import DrsoConfig, DrsoSolution, capacity_cost, objective_f, solve_drso
from .evaluation import (EvaluationReport, SamplerConfig, cvar, empirical_moments, evaluate_plan,
                         run_experiment, sample_scenarios, scale_sweep)
from .formulations import (PlanSolution, build_capacity_subproblem, build_evaluation, build_nominal,
                           build_robust, extract_plan)
from .lp import LinearProgram, LpSolution, solve_lp
from .network import (Arc, Commodity, Instance, Network, generate_random_instance, load_instance,
                      nobel_us_topology, parse_instance, write_instance)
from .robust import solve_robust
