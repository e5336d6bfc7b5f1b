"""Exact tabular dynamic programming for the transmitter MDP.

Covers the discounted problem (iterative policy evaluation, greedy
improvement, policy iteration) and the average-reward throughput
problem (relative value iteration with a damping factor that removes
periodicity). All solvers work on the dense kernel of `model.Model`;
state count tops out in the low hundreds, so everything is plain
vectorized numpy.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NotConverged, ScenarioInvalid
from .model import Model, Policy, as_model, validate_policy

# Guard on policy-iteration improvement rounds; exact PI terminates long
# before this on any model this package targets.
MAX_IMPROVEMENT_ROUNDS = 10_000


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Per-state expected discounted transmitted data, in bits."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "v", v)
        if not np.all(np.isfinite(v)):
            raise ScenarioInvalid("value table contains non-finite entries")


@dataclass(frozen=True, eq=False)
class QTable:
    """Per-(state, action) values; infeasible transmit entries are masked."""

    q: np.ndarray  # (n_states, 2)
    feasible: np.ndarray  # bool, same shape

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        feas = np.asarray(self.feasible, dtype=bool)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "feasible", feas)
        if q.shape != feas.shape or q.ndim != 2 or q.shape[1] != 2:
            raise ScenarioInvalid("Q table must be (n_states, 2) with matching mask")
        if not np.all(np.isfinite(q[feas])):
            raise ScenarioInvalid("Q table has non-finite feasible entries")

    def max_over_actions(self) -> np.ndarray:
        """Row-wise max over feasible actions (drop is always feasible)."""
        masked = np.where(self.feasible, self.q, -np.inf)
        return masked.max(axis=1)


@dataclass(frozen=True)
class DpConfig:
    eval_tolerance: float = 1e-9
    max_sweeps: int = 100_000
    rvi_reference_state: int = 0
    rvi_span_tolerance: float = 1e-9
    # Weight on the one-step lookahead in the RVI operator; the remaining
    # mass stays on the current state, which breaks periodic cycling
    # without changing the optimal gain or policy.
    rvi_damping: float = 0.9

    def __post_init__(self):
        if self.eval_tolerance <= 0 or self.rvi_span_tolerance <= 0:
            raise ScenarioInvalid("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ScenarioInvalid("max_sweeps must be at least 1")
        if not 0.0 < self.rvi_damping <= 1.0:
            raise ScenarioInvalid("rvi_damping must lie in (0, 1]")


def _policy_kernel(model: Model, policy: Policy):
    """Transition matrix and reward vector of the Markov chain a policy induces."""
    p = model.transitions()
    acts = policy.actions.astype(np.int64)
    rows = np.arange(model.n_states)
    return p[acts, rows, :], model.reward[rows, acts]


def policy_evaluation(
    policy: Policy,
    scenario_or_model,
    config: DpConfig = DpConfig(),
    v0: np.ndarray | None = None,
) -> ValueTable:
    """Iterate the fixed-point equation of a policy's value until the sweep
    change drops below `eval_tolerance` (sup-norm)."""
    model = as_model(scenario_or_model)
    validate_policy(policy, model)
    gamma = model.discount
    if not gamma < 1.0:
        raise ScenarioInvalid("policy evaluation needs discount < 1")
    p_pi, r_pi = _policy_kernel(model, policy)
    v = np.zeros(model.n_states) if v0 is None else np.array(v0, dtype=float)
    for _ in range(config.max_sweeps):
        v_next = r_pi + gamma * (p_pi @ v)
        delta = np.abs(v_next - v).max()
        v = v_next
        if delta < config.eval_tolerance:
            return ValueTable(v)
    raise NotConverged(
        f"policy evaluation: sweep change {delta:.3e} after {config.max_sweeps} sweeps"
    )


def q_from_v(v: ValueTable, scenario_or_model) -> QTable:
    """One-step lookahead q[s, x] = r(s, x) + gamma * sum_s' P(s'|s,x) v(s')."""
    model = as_model(scenario_or_model)
    p = model.transitions()
    q = model.reward + model.discount * np.einsum("xij,j->ix", p, v.v)
    q = np.where(model.feasible, q, np.nan)
    return QTable(q, model.feasible.copy())


def policy_improvement(q: QTable) -> Policy:
    """Greedy policy over feasible actions; ties resolve to drop."""
    transmit = q.feasible[:, 1] & (q.q[:, 1] > q.q[:, 0])
    return Policy(transmit.astype(np.int8))


def policy_iteration(
    scenario_or_model, config: DpConfig = DpConfig()
) -> tuple[Policy, ValueTable, int]:
    """Alternate evaluation and greedy improvement until the policy is stable.

    Starts from the all-drop policy and a zero value table; each
    evaluation warm-starts from the previous one. Returns the stable
    policy, its value, and the number of improvement rounds.
    """
    model = as_model(scenario_or_model)
    policy = Policy(np.zeros(model.n_states, dtype=np.int8))
    v = None
    for rounds in range(1, MAX_IMPROVEMENT_ROUNDS + 1):
        table = policy_evaluation(policy, model, config, v0=v)
        v = table.v
        improved = policy_improvement(q_from_v(table, model))
        if improved == policy:
            return policy, table, rounds
        policy = improved
    raise NotConverged("policy iteration failed to stabilize")


def bellman_residual(v: ValueTable, scenario_or_model) -> float:
    """Sup-norm distance between v and one application of the optimality operator."""
    q = q_from_v(v, scenario_or_model)
    return float(np.abs(q.max_over_actions() - v.v).max())


def relative_value_iteration(
    scenario_or_model, config: DpConfig = DpConfig()
) -> tuple[Policy, float, ValueTable]:
    """Average-reward solver: span-seminorm value iteration against a
    reference state.

    The lookahead is damped by `rvi_damping` (the operator keeps the
    complementary mass on the current state), which leaves the gain and
    the greedy policy unchanged but guarantees the span contracts even
    on periodic chains. Returns (policy, gain in bits/slot, bias table).
    """
    model = as_model(scenario_or_model)
    p = model.transitions()
    tau = config.rvi_damping
    ref = config.rvi_reference_state
    if not 0 <= ref < model.n_states:
        raise ScenarioInvalid("RVI reference state out of range")
    def lookahead(h):
        look = model.reward + np.einsum("xij,j->ix", p, tau * h)
        return np.where(model.feasible, look, -np.inf)

    h = np.zeros(model.n_states)
    for _ in range(config.max_sweeps):
        w = lookahead(h).max(axis=1) + (1.0 - tau) * h
        offset = w[ref]
        h_next = w - offset
        span_change = h_next - h
        if span_change.max() - span_change.min() < config.rvi_span_tolerance:
            final = lookahead(h_next)
            transmit = model.feasible[:, 1] & (final[:, 1] > final[:, 0])
            return Policy(transmit.astype(np.int8)), float(offset), ValueTable(h_next)
        h = h_next
    raise NotConverged(
        f"relative value iteration: span stuck above {config.rvi_span_tolerance:g}"
    )
