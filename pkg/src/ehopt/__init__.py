"""Scheduling for an energy-harvesting transmitter.

Library surface: finite-MDP model building, exact DP solvers, tabular
model-free learners, offline MILP/LP optimizers on realized windows,
and a seeded Monte Carlo evaluation harness. The `ehopt` CLI drives the
bundled experiment presets.
"""
from . import _kernels
from .dp import (DpConfig, QTable, ValueTable, bellman_residual,
                 policy_evaluation, policy_improvement, policy_iteration,
                 q_from_v, relative_value_iteration)
from .errors import (DivergentHorizon, EhoptError, InfeasibleAction,
                     NoFeasibleSolution, NotConverged, ParseError,
                     ScenarioInvalid, SimplexNumericalError, TooLarge)
from .learn import (LearningConfig, QLearnerState, RLearnerState, SimEnv,
                    Snapshot, epsilon_greedy_select, log_spaced_slots,
                    q_learning_run, q_update, r_learning_run, r_update)
from .model import (Action, EnergyCostTable, MarkovChain, Model, PhysicalParams,
                    Policy, Scenario, SystemState, as_model, build_state_space,
                    energy_cost, expected_reward, feasible_actions, greedy_policy,
                    next_battery, transition_prob, validate_policy,
                    with_battery_capacity, with_harvest_persistence)
from .offline import (BabConfig, BabNode, MilpSolution, OfflineInstance,
                      bab_solve, build_milp, exhaustive_solve,
                      lp_relaxation_bound, schedule_value, simulate_schedule)
from .sim import (EstimateReport, EvalConfig, Realization, Trajectory,
                  derive_seed, discounted_data, estimate, expected_value_from_v,
                  instance_to_realization, realization_to_instance,
                  rollout_policy, rollout_rewards_batch, sample_realization,
                  sample_realizations, student_t_quantile, throughput,
                  truncation_error)
from .simplex import LpProblem, LpSolution, simplex_solve

KERNEL_COMPILED = _kernels.IS_COMPILED

__version__ = "0.1.0"
