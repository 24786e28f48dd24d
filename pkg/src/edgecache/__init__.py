"""Joint cooperative caching and delivery optimisation for mobile-edge networks."""
from .bnb import BnbParams, SolveReport, centralized_placement, solve
from .distributed import distributed_placement, local_optimal_placement
from .ipm import IpmParams, solve_relaxation
from .metrics import distinct_contents, generate_requests, hit_rates
from .oracle import OracleBudget, OracleBudgetExceeded, exhaustive_optimal, minlp_enumerate
from .policies import PolicyKind, noncooperative_delay, place
from .scenario import (Content, Node, Scenario, ScenarioError, Topology, build_scenario,
                       load_config, request_delays, template_config, total_average_delay)
from .sweep import SweepSpec, csv_text, emit_csv, run_sweep
from .transform import Assignment, MinlpProblem, check_feasibility, evaluate_objective, transform

__all__ = [
    "Assignment", "BnbParams", "Content", "IpmParams", "MinlpProblem", "Node", "OracleBudget",
    "OracleBudgetExceeded", "PolicyKind", "Scenario", "ScenarioError", "SolveReport",
    "SweepSpec", "Topology", "build_scenario", "centralized_placement", "check_feasibility",
    "csv_text", "distinct_contents", "distributed_placement", "emit_csv", "evaluate_objective",
    "exhaustive_optimal", "generate_requests", "hit_rates", "load_config",
    "local_optimal_placement", "minlp_enumerate", "noncooperative_delay", "place",
    "request_delays", "run_sweep", "solve", "solve_relaxation", "template_config",
    "total_average_delay", "transform",
]
