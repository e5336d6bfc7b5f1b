"""Model-free learning of the transmission policy.

The learner sees only what a deployed transmitter would see: the
current state, the reward of the action it just took, and the state
that followed. Chain statistics stay hidden behind the simulated
environment. Q-learning handles the discounted objective; R-learning
(a running-gain variant with undiscounted lookahead) handles the
throughput objective.

Runs are driven by the chunked kernels in `_kernels`; random draws are
pregenerated per run with a fixed layout, so results depend only on the
two seeds, never on snapshot placement or chunk sizes.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .dp import QTable
from .errors import ScenarioInvalid
from .model import Action, Model, Policy, SystemState, as_model
from .sim import STREAM_LEARN_AGENT, STREAM_LEARN_ENV, derive_seed

_MAX_CHUNK = 1 << 16


@dataclass(frozen=True)
class LearningConfig:
    epsilon: float = 0.07
    # None selects the per-visit 1/(1+visits) schedule; a constant in (0,1)
    # keeps chasing a moving target and plateaus a few percent below the
    # planned policy on the bundled scenario.
    alpha: float | None = None
    learning_slots: int = 10_000
    seed: int = 0
    beta: float = 0.1  # gain step size for R-learning
    snapshot_slots: tuple = ()
    # Initial table value. None picks the per-run default: the largest
    # packet size for Q-learning (mild optimism, so the untried transmit
    # never looks worse than an explored drop early on) and 0 for
    # R-learning (its table is differential, optimism has no meaning).
    q_init: float | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ScenarioInvalid("epsilon must lie in (0, 1)")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ScenarioInvalid("constant alpha must lie in (0, 1)")
        if self.learning_slots < 1:
            raise ScenarioInvalid("need at least one learning slot")
        if not 0.0 <= self.beta <= 1.0:
            raise ScenarioInvalid("beta must lie in [0, 1]")


@dataclass(frozen=True)
class Snapshot:
    slot: int
    q: np.ndarray
    policy: Policy
    rho: float | None = None


@dataclass(frozen=True, eq=False)
class QLearnerState:
    q: QTable
    current_state: SystemState
    slot: int
    visit_counts: np.ndarray


@dataclass(frozen=True, eq=False)
class RLearnerState:
    q: QTable
    rho: float
    current_state: SystemState
    slot: int
    visit_counts: np.ndarray


class SimEnv:
    """Sampling-only view of the MDP: reset and step, nothing else.

    Learners never touch transition probabilities; they only observe the
    states this environment hands out. Each step consumes exactly three
    uniform draws (one per exogenous chain).
    """

    def __init__(self, scenario_or_model, rng):
        self._model = as_model(scenario_or_model)
        self._rng = rng
        self._state = None

    def reset(self, battery: int = 0) -> SystemState:
        m = self._model
        u = self._rng.random(3)
        self._state = SystemState(
            int(u[0] * m.n_e), int(u[1] * m.n_d), int(u[2] * m.n_h), battery
        )
        return self._state

    def step(self, action: Action) -> tuple[SystemState, float]:
        m = self._model
        s = self._state
        cost = int(m.cost[s.d_idx, s.h_idx])
        if action == Action.TRANSMIT and cost > s.battery:
            raise ScenarioInvalid("environment refused an infeasible transmit")
        reward = float(action) * float(m.data_bits[s.d_idx])
        u = self._rng.random(3)

        def scan(row, uu):
            k = 0
            while uu >= row[k]:
                k += 1
            return k

        nxt = SystemState(
            scan(m.cum_e[s.e_idx], u[0]),
            scan(m.cum_d[s.d_idx], u[1]),
            scan(m.cum_h[s.h_idx], u[2]),
            min(s.battery - int(action) * cost + int(m.harvest_units[s.e_idx]), m.b_max),
        )
        self._state = nxt
        return nxt, reward


def greedy_from_raw_q(raw_q: np.ndarray, model: Model) -> Policy:
    """Greedy policy over feasible actions, ties to drop."""
    transmit = model.feasible[:, 1] & (raw_q[:, 1] > raw_q[:, 0])
    return Policy(transmit.astype(np.int8))


def _masked_qtable(raw_q: np.ndarray, model: Model) -> QTable:
    q = np.where(model.feasible, raw_q, np.nan)
    return QTable(q, model.feasible.copy())


def epsilon_greedy_select(
    q: QTable, flat_state: int, epsilon: float, rng
) -> tuple[Action, bool]:
    """Pick an action for one slot; returns (action, took_greedy_branch).

    Exploration draws uniformly over the feasible actions only. The
    greedy branch breaks ties toward drop.
    """
    can_tx = bool(q.feasible[flat_state, 1])
    if rng.random() < epsilon:
        if can_tx:
            return (Action.TRANSMIT if rng.random() >= 0.5 else Action.DROP), False
        return Action.DROP, False
    if can_tx and q.q[flat_state, 1] > q.q[flat_state, 0]:
        return Action.TRANSMIT, True
    return Action.DROP, True


def _max_feasible(q: QTable, flat_state: int) -> float:
    if q.feasible[flat_state, 1]:
        return max(float(q.q[flat_state, 0]), float(q.q[flat_state, 1]))
    return float(q.q[flat_state, 0])


def q_update(
    learner: QLearnerState,
    s: int,
    x: Action,
    reward: float,
    s_next: int,
    gamma: float,
    alpha: float,
) -> QLearnerState:
    """One tabular update; only the (s, x) entry moves."""
    q_new = learner.q.q.copy()
    vmax = _max_feasible(learner.q, s_next)
    q_new[s, int(x)] = (1.0 - alpha) * q_new[s, int(x)] + alpha * (reward + gamma * vmax)
    visits = learner.visit_counts.copy()
    visits[s, int(x)] += 1
    return replace(
        learner,
        q=QTable(q_new, learner.q.feasible.copy()),
        slot=learner.slot + 1,
        visit_counts=visits,
    )


def r_update(
    learner: RLearnerState,
    s: int,
    x: Action,
    reward: float,
    s_next: int,
    alpha: float,
    beta: float,
    was_greedy: bool,
) -> RLearnerState:
    """R-learning update: move the gain estimate on greedy slots, then
    apply the gain-adjusted, undiscounted Q update."""
    vmax_here = _max_feasible(learner.q, s)
    vmax_next = _max_feasible(learner.q, s_next)
    rho = learner.rho
    if was_greedy:
        rho = (1.0 - beta) * rho + beta * ((reward + vmax_next) - vmax_here)
    q_new = learner.q.q.copy()
    q_new[s, int(x)] = (1.0 - alpha) * q_new[s, int(x)] + alpha * (
        (reward - rho) + vmax_next
    )
    visits = learner.visit_counts.copy()
    visits[s, int(x)] += 1
    return replace(
        learner,
        q=QTable(q_new, learner.q.feasible.copy()),
        rho=rho,
        slot=learner.slot + 1,
        visit_counts=visits,
    )


def _draw_run_arrays(model: Model, config: LearningConfig, env_seed: int):
    """Pregenerate every uniform a run will consume (layout is frozen)."""
    n = config.learning_slots
    agent = np.random.default_rng(derive_seed(config.seed, STREAM_LEARN_AGENT))
    env = np.random.default_rng(derive_seed(env_seed, STREAM_LEARN_ENV))
    u_explore = agent.random(n)
    u_action = agent.random(n)
    u_init = env.random(3)
    u_e = env.random(n)
    u_d = env.random(n)
    u_h = env.random(n)
    start = (
        int(u_init[0] * model.n_e),
        int(u_init[1] * model.n_d),
        int(u_init[2] * model.n_h),
        0,  # learning always starts from an empty battery
    )
    return start, u_explore, u_action, u_e, u_d, u_h


def _segment_bounds(total: int, snapshot_slots) -> list[int]:
    marks = sorted({s for s in snapshot_slots if 1 <= s <= total} | {total})
    bounds = []
    prev = 0
    for mark in marks:
        while mark - prev > _MAX_CHUNK:
            prev += _MAX_CHUNK
            bounds.append(prev)
        bounds.append(mark)
        prev = mark
    return sorted(set(bounds))


def q_learning_run(
    scenario_or_model, config: LearningConfig, env_seed: int
) -> tuple[QTable, Policy, list[Snapshot]]:
    """Learn for `config.learning_slots` environment interactions.

    Returns the masked Q table, the greedy policy of the final table,
    and snapshots (slot, q copy, policy) at the configured slots.
    """
    model = as_model(scenario_or_model)
    gamma = model.discount
    if not 0.0 <= gamma < 1.0:
        raise ScenarioInvalid("Q-learning requires discount < 1")
    q0 = model.d_max if config.q_init is None else config.q_init
    raw_q = np.full((model.n_states, 2), float(q0))
    visits = np.zeros((model.n_states, 2), dtype=np.int64)
    (e, d, h, b), u_explore, u_action, u_e, u_d, u_h = _draw_run_arrays(
        model, config, env_seed
    )
    alpha = -1.0 if config.alpha is None else config.alpha
    trace = []
    prev = 0
    for bound in _segment_bounds(config.learning_slots, config.snapshot_slots):
        sl = slice(prev, bound)
        e, d, h, b = _kernels.q_learn_chunk(
            raw_q, visits, model.cum_e, model.cum_d, model.cum_h,
            model.harvest_units, model.cost, model.data_bits, model.b_max,
            e, d, h, b, gamma, alpha, config.epsilon,
            u_explore[sl], u_action[sl], u_e[sl], u_d[sl], u_h[sl],
        )
        prev = bound
        if bound in config.snapshot_slots:
            trace.append(Snapshot(bound, raw_q.copy(), greedy_from_raw_q(raw_q, model)))
    return _masked_qtable(raw_q, model), greedy_from_raw_q(raw_q, model), trace


def r_learning_run(
    scenario_or_model, config: LearningConfig, env_seed: int
) -> tuple[QTable, float, Policy, list[Snapshot]]:
    """Average-reward analogue of q_learning_run; also returns the final
    gain estimate rho (bits/slot)."""
    model = as_model(scenario_or_model)
    q0 = 0.0 if config.q_init is None else config.q_init
    raw_q = np.full((model.n_states, 2), float(q0))
    visits = np.zeros((model.n_states, 2), dtype=np.int64)
    (e, d, h, b), u_explore, u_action, u_e, u_d, u_h = _draw_run_arrays(
        model, config, env_seed
    )
    alpha = -1.0 if config.alpha is None else config.alpha
    rho = 0.0
    trace = []
    prev = 0
    for bound in _segment_bounds(config.learning_slots, config.snapshot_slots):
        sl = slice(prev, bound)
        e, d, h, b, rho = _kernels.r_learn_chunk(
            raw_q, visits, model.cum_e, model.cum_d, model.cum_h,
            model.harvest_units, model.cost, model.data_bits, model.b_max,
            e, d, h, b, rho, alpha, config.beta, config.epsilon,
            u_explore[sl], u_action[sl], u_e[sl], u_d[sl], u_h[sl],
        )
        prev = bound
        if bound in config.snapshot_slots:
            trace.append(
                Snapshot(bound, raw_q.copy(), greedy_from_raw_q(raw_q, model), rho)
            )
    return _masked_qtable(raw_q, model), float(rho), greedy_from_raw_q(raw_q, model), trace


def log_spaced_slots(total: int, points: int = 12, first: int = 100) -> tuple:
    """Snapshot grid matching a logarithmic learning-curve axis."""
    if total <= first:
        return (total,)
    marks = np.geomspace(first, total, points)
    return tuple(sorted({int(round(m)) for m in marks} | {total}))
