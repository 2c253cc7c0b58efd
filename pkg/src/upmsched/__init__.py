"""Scheduling on unrelated parallel machines with a learned pointer policy.

Deterministic MDP environment, exact dynamic-programming oracle, tailored
dispatching rule, variable-dimension policy network, and an evaluation
harness with a CLI.
"""

__version__ = "0.1.0"

from .problem import ProblemInstance, InvalidInstanceError
from .mdp import (
    Action,
    CostBreakdown,
    DecisionState,
    SimState,
    apply_action,
    feasible_actions,
    initial_state,
    sort_state,
    total_cost,
)
from .encoding import EncodedState, encode_state
from .oracle import (
    ActionValues,
    OracleSolver,
    brute_force_value,
    enumerate_labeled_states,
    optimal_rollout,
    solve,
    targets,
)
from .heuristic import rule_action
from .datagen import GenParams, LabeledState, build_dataset, gen_problem
from .model import (
    ModelConfig,
    ParamStore,
    forward,
    init_params,
    load_params,
    save_params,
)
from .training import Hyper, train
from .estimator import PointerPolicyEstimator
from .policies import NetworkPolicy, OptimalPolicy, RulePolicy, rollout
from .metrics import delta_q, delta_v, rule_over_network
from .experiment import run_experiment

__all__ = [
    "ProblemInstance", "InvalidInstanceError",
    "Action", "CostBreakdown", "DecisionState", "SimState",
    "apply_action", "feasible_actions", "initial_state", "sort_state", "total_cost",
    "EncodedState", "encode_state",
    "ActionValues", "OracleSolver", "brute_force_value",
    "enumerate_labeled_states", "optimal_rollout", "solve", "targets",
    "rule_action",
    "GenParams", "LabeledState", "build_dataset", "gen_problem",
    "ModelConfig", "ParamStore", "forward", "init_params",
    "load_params", "save_params",
    "Hyper", "train",
    "PointerPolicyEstimator",
    "NetworkPolicy", "OptimalPolicy", "RulePolicy", "rollout",
    "delta_q", "delta_v", "rule_over_network",
    "run_experiment",
]
