import inspect

import numpy as np
import pytest

import ehopt
from ehopt import Action, LearningConfig, QTable
from ehopt.learn import (QLearnerState, RLearnerState, SimEnv,
                         epsilon_greedy_select, log_spaced_slots,
                         q_learning_run, q_update, r_learning_run, r_update)
from ehopt.sim import expected_value_from_v

from .conftest import make_scenario, single_state_scenario


class StubRng:
    """Hands out a scripted uniform sequence."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def masked_qtable(model, fill=0.0):
    q = np.where(model.feasible, fill, np.nan)
    return QTable(q, model.feasible.copy())


def test_epsilon_greedy_greedy_limit(paper_model):
    q = masked_qtable(paper_model)
    q.q[:, 0] = 1.0  # drop strictly better everywhere
    rng = np.random.default_rng(0)
    s = paper_model.flat_index(1, 1, 1, 5)
    actions = {epsilon_greedy_select(q, s, 1e-12, rng)[0] for _ in range(10_000)}
    assert actions == {Action.DROP}


def test_epsilon_greedy_pure_exploration(paper_model):
    q = masked_qtable(paper_model)
    rng = np.random.default_rng(1)
    s = paper_model.flat_index(1, 1, 1, 5)
    draws = 100_000
    n_tx = sum(
        int(epsilon_greedy_select(q, s, 0.999999, rng)[0]) for _ in range(draws)
    )
    # uniform over the two feasible actions within 3 sigma
    sigma = (draws * 0.25) ** 0.5
    assert abs(n_tx - draws / 2) < 3 * sigma


def test_epsilon_greedy_single_feasible(paper_model):
    q = masked_qtable(paper_model)
    empty = paper_model.flat_index(0, 0, 0, 0)
    rng = np.random.default_rng(2)
    for _ in range(100):
        action, _ = epsilon_greedy_select(q, empty, 0.999999, rng)
        assert action == Action.DROP


def test_epsilon_greedy_flag():
    sc = single_state_scenario()
    m = ehopt.as_model(sc)
    q = masked_qtable(m)
    s = m.flat_index(0, 0, 0, 1)
    action, greedy = epsilon_greedy_select(q, s, 0.5, StubRng([0.4, 0.7]))
    assert not greedy and action == Action.TRANSMIT  # explored, u2 >= 0.5
    action, greedy = epsilon_greedy_select(q, s, 0.5, StubRng([0.6]))
    assert greedy and action == Action.DROP  # tie resolves to drop


def _learner(model, fill=0.0):
    return QLearnerState(
        q=masked_qtable(model, fill),
        current_state=model.state_of(0),
        slot=0,
        visit_counts=np.zeros((model.n_states, 2), dtype=np.int64),
    )


def test_q_update_basic(paper_model):
    m = paper_model
    learner = _learner(m)
    s = m.flat_index(0, 0, 1, 5)
    out = q_update(learner, s, Action.TRANSMIT, 300.0, 0, gamma=0.9, alpha=0.5)
    assert out.q.q[s, 1] == 150.0
    # only the touched entry moved
    diff = (np.nan_to_num(out.q.q) != np.nan_to_num(learner.q.q)).sum()
    assert diff == 1
    assert out.slot == 1
    assert out.visit_counts.sum() == 1


def test_q_update_alpha_one_gamma_zero(paper_model):
    m = ehopt.as_model(single_state_scenario(bits=7.0, discount=0.0))
    learner = _learner(m, fill=3.0)
    s = m.flat_index(0, 0, 0, 1)
    out = q_update(learner, s, Action.TRANSMIT, 7.0, s, gamma=0.0, alpha=1.0)
    assert out.q.q[s, 1] == 7.0


def test_q_update_fixed_point():
    m = ehopt.as_model(single_state_scenario(bits=1.0, discount=0.9))
    _, table, _ = ehopt.policy_iteration(m)
    qstar = ehopt.q_from_v(table, m)
    learner = QLearnerState(qstar, m.state_of(0), 0,
                            np.zeros((m.n_states, 2), dtype=np.int64))
    s = m.flat_index(0, 0, 0, 1)
    out = q_update(learner, s, Action.TRANSMIT, 1.0, s, gamma=0.9, alpha=0.5)
    assert out.q.q[s, 1] == pytest.approx(qstar.q[s, 1], abs=1e-7)


def test_r_update_rules():
    m = ehopt.as_model(single_state_scenario(bits=2.0))
    s = m.flat_index(0, 0, 0, 1)
    base = RLearnerState(masked_qtable(m), 0.0, m.state_of(s), 0,
                         np.zeros((m.n_states, 2), dtype=np.int64))
    # exploratory step leaves rho alone
    out = r_update(base, s, Action.TRANSMIT, 2.0, s, alpha=0.5, beta=0.5,
                   was_greedy=False)
    assert out.rho == 0.0
    # beta=0 never moves rho
    out = r_update(base, s, Action.TRANSMIT, 2.0, s, alpha=0.5, beta=0.0,
                   was_greedy=True)
    assert out.rho == 0.0
    # beta=1 greedy step at the fixed point pins rho at the reward
    fixed = RLearnerState(masked_qtable(m, 0.0), 0.0, m.state_of(s), 0,
                          np.zeros((m.n_states, 2), dtype=np.int64))
    out = r_update(fixed, s, Action.TRANSMIT, 2.0, s, alpha=0.5, beta=1.0,
                   was_greedy=True)
    assert out.rho == 2.0


def test_q_learning_single_state_convergence():
    m = ehopt.as_model(single_state_scenario(bits=1.0, discount=0.9))
    cfg = LearningConfig(epsilon=0.3, alpha=0.5, learning_slots=10_000, seed=0,
                         q_init=0.0)
    q, policy, _ = q_learning_run(m, cfg, env_seed=1)
    s = m.flat_index(0, 0, 0, 1)
    assert q.q[s, 0] == pytest.approx(9.0, abs=1e-3)
    assert q.q[s, 1] == pytest.approx(10.0, abs=1e-3)
    assert policy.actions[s] == 1


def test_q_learning_single_slot_touches_one_entry(paper_model):
    cfg = LearningConfig(learning_slots=1, seed=5, q_init=600.0)
    q, _, _ = q_learning_run(paper_model, cfg, env_seed=6)
    changed = q.q[paper_model.feasible] != 600.0
    assert changed.sum() == 1


def test_q_learning_reaches_planned_value(paper_model):
    ratios = []
    _, vstar, _ = ehopt.policy_iteration(paper_model)
    ev_star = expected_value_from_v(vstar, paper_model, 0)
    for rep in range(3):
        cfg = LearningConfig(learning_slots=200_000, seed=rep)
        _, policy, _ = q_learning_run(paper_model, cfg, env_seed=100 + rep)
        ev = expected_value_from_v(ehopt.policy_evaluation(policy, paper_model),
                                   paper_model, 0)
        ratios.append(ev / ev_star)
    assert np.mean(ratios) >= 0.95


def test_q_learning_bounded(paper_model):
    hi = paper_model.d_max / (1.0 - paper_model.discount)
    cfg = LearningConfig(learning_slots=50_000, seed=3, q_init=hi,
                         snapshot_slots=tuple(range(1000, 50_001, 1000)))
    q, _, trace = q_learning_run(paper_model, cfg, env_seed=4)
    for snap in trace:
        feas = paper_model.feasible
        assert snap.q[feas].min() >= -1e-12
        assert snap.q[feas].max() <= hi + 1e-9


def test_r_learning_single_state_gain():
    m = ehopt.as_model(single_state_scenario(bits=2.0))
    cfg = LearningConfig(epsilon=0.1, alpha=0.2, learning_slots=10_000, seed=0,
                         beta=0.05)
    _, rho, policy, _ = r_learning_run(m, cfg, env_seed=2)
    assert rho == pytest.approx(2.0, abs=0.05)
    assert policy.actions[m.flat_index(0, 0, 0, 1)] == 1


def test_r_learning_zero_rewards():
    sc = make_scenario(cost=[[9, 9], [9, 9]], b_max=5)
    m = ehopt.as_model(sc)
    cfg = LearningConfig(learning_slots=5_000, seed=1)
    _, rho, _, _ = r_learning_run(m, cfg, env_seed=3)
    assert rho == 0.0


def test_r_learning_near_rvi(paper_model):
    rvi_policy, gain, _ = ehopt.relative_value_iteration(paper_model)
    cfg = ehopt.EvalConfig(n_slots=100, n_realizations=300, base_seed=17)
    reals = ehopt.sample_realizations(paper_model, cfg)
    e = np.stack([r.e_idx for r in reals])
    d = np.stack([r.d_idx for r in reals])
    h = np.stack([r.h_idx for r in reals])

    def tp(policy):
        rw = ehopt.rollout_rewards_batch(policy, paper_model, e, d, h, b0=0)
        return rw.sum(axis=1).mean() / cfg.n_slots

    ref = tp(rvi_policy)
    got = []
    for rep in range(3):
        lc = LearningConfig(learning_slots=200_000, seed=50 + rep)
        _, _, policy, _ = r_learning_run(paper_model, lc, env_seed=60 + rep)
        got.append(tp(policy))
    assert np.mean(got) / ref >= 0.93


def test_robbins_monro_converges_to_qstar():
    """Pure exploration with the per-visit schedule reproduces the DP table."""
    sc = make_scenario(
        data_labels=(5.0,), data_t=((1.0,),),
        energy_labels=(1,), energy_t=((1.0,),),
        gain_labels=(1.0,), gain_t=((1.0,),),
        b_max=3, discount=0.5, cost=[[2]],
    )
    m = ehopt.as_model(sc)
    assert m.n_states == 4
    _, table, _ = ehopt.policy_iteration(m)
    qstar = ehopt.q_from_v(table, m)

    from ehopt import _kernels
    rng = np.random.default_rng(123)
    n = 1_000_000
    q = np.zeros((m.n_states, 2))
    visits = np.zeros((m.n_states, 2), dtype=np.int64)
    _kernels.q_learn_chunk(
        q, visits, m.cum_e, m.cum_d, m.cum_h, m.harvest_units, m.cost,
        m.data_bits, m.b_max, 0, 0, 0, 0, m.discount, -1.0, 1.0,
        rng.random(n), rng.random(n), rng.random(n), rng.random(n), rng.random(n),
    )
    # the empty-battery state is transient (one visit, never again);
    # convergence holds on the recurrently visited pairs
    often = m.feasible & (visits > 10_000)
    assert often.sum() >= 5
    assert np.abs(q[often] - np.nan_to_num(qstar.q)[often]).max() < 0.01


def test_kernel_matches_composed_ops(paper_model):
    """A run assembled from the observable-only pieces (env + select + update)
    reproduces the kernel exactly, confirming the learner never needs the
    transition probabilities."""
    m = paper_model
    n = 400
    rng = np.random.default_rng(77)
    u_explore, u_action = rng.random(n), rng.random(n)
    u_env = rng.random((n, 3))

    from ehopt import _kernels
    q_kernel = np.full((m.n_states, 2), 600.0)
    visits = np.zeros((m.n_states, 2), dtype=np.int64)
    final = _kernels.q_learn_chunk(
        q_kernel, visits, m.cum_e, m.cum_d, m.cum_h, m.harvest_units, m.cost,
        m.data_bits, m.b_max, 1, 1, 0, 0, m.discount, 0.5, 0.07,
        u_explore, u_action, u_env[:, 0].copy(), u_env[:, 1].copy(), u_env[:, 2].copy(),
    )

    class ScriptedEnvRng:
        def __init__(self):
            self.k = 0

        def random(self, size=None):
            row = u_env[self.k]
            self.k += 1
            return row

    env = SimEnv(m, ScriptedEnvRng())
    env._state = ehopt.SystemState(1, 1, 0, 0)
    learner = QLearnerState(
        QTable(np.where(m.feasible, 600.0, np.nan), m.feasible.copy()),
        env._state, 0, np.zeros((m.n_states, 2), dtype=np.int64),
    )
    for k in range(n):
        s = m.flat_index(*_tuple(learner.current_state))
        action, _ = epsilon_greedy_select(
            learner.q, s, 0.07, StubRng([u_explore[k], u_action[k]])
        )
        nxt, reward = env.step(action)
        s_next = m.flat_index(*_tuple(nxt))
        learner = q_update(learner, s, action, reward, s_next, m.discount, 0.5)
        learner = type(learner)(learner.q, nxt, learner.slot, learner.visit_counts)
    assert _tuple(learner.current_state) == final
    assert np.array_equal(learner.q.q[m.feasible], q_kernel[m.feasible])


def _tuple(state):
    return state.e_idx, state.d_idx, state.h_idx, state.battery


def test_learner_surface_is_model_free():
    """The update/select operations accept only observed quantities."""
    for fn in (q_update, r_update, epsilon_greedy_select):
        params = set(inspect.signature(fn).parameters)
        assert not params & {"transition", "probabilities", "scenario", "model"}
    assert not [a for a in dir(SimEnv) if "transition" in a.lower()]


def test_log_spaced_slots():
    marks = log_spaced_slots(200_000)
    assert marks[-1] == 200_000
    assert marks[0] >= 100
    assert all(b > a for a, b in zip(marks, marks[1:]))
    assert log_spaced_slots(50) == (50,)


def test_kernel_touches_one_entry_per_slot(paper_model):
    """Chunked stepping slot by slot: each step rewrites exactly one
    feasible (state, action) cell."""
    from ehopt import _kernels
    m = paper_model
    rng = np.random.default_rng(31)
    n = 200
    ux, ua = rng.random(n), rng.random(n)
    ue, ud, uh = rng.random(n), rng.random(n), rng.random(n)
    q = np.full((m.n_states, 2), m.d_max)
    visits = np.zeros((m.n_states, 2), dtype=np.int64)
    state = (0, 0, 0, 0)
    for k in range(n):
        before = q.copy()
        state = _kernels.q_learn_chunk(
            q, visits, m.cum_e, m.cum_d, m.cum_h, m.harvest_units, m.cost,
            m.data_bits, m.b_max, *state, m.discount, 0.5, 0.07,
            ux[k:k + 1], ua[k:k + 1], ue[k:k + 1], ud[k:k + 1], uh[k:k + 1],
        )
        changed = np.argwhere(q != before)
        assert changed.shape[0] <= 1
        assert visits.sum() == k + 1
