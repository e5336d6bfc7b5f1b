import numpy as np
import pytest

import ehopt
from ehopt import Action, InfeasibleAction, ScenarioInvalid, SystemState

from .conftest import make_scenario


def test_chain_validation():
    with pytest.raises(ScenarioInvalid):
        ehopt.MarkovChain((1.0, 2.0), np.array([[0.5, 0.45], [0.1, 0.9]]))
    with pytest.raises(ScenarioInvalid):
        ehopt.MarkovChain((1.0, 1.0), np.eye(2))  # duplicate labels
    with pytest.raises(ScenarioInvalid):
        ehopt.MarkovChain((1.0, 2.0), np.array([[1.2, -0.2], [0.0, 1.0]]))
    chain = ehopt.MarkovChain((1.0, 2.0), np.array([[0.9, 0.1], [0.2, 0.8]]))
    assert chain.cumulative[0, -1] == 1.0


def test_scenario_invariants():
    with pytest.raises(ScenarioInvalid):
        make_scenario(b_max=-1)
    with pytest.raises(ScenarioInvalid):
        make_scenario(discount=1.5)
    with pytest.raises(ScenarioInvalid):
        make_scenario(energy_labels=(0, 7), b_max=5)  # harvest above capacity
    with pytest.raises(ScenarioInvalid):
        make_scenario(energy_labels=(0, 1.5), b_max=5)  # non-integer harvest


def test_energy_cost_paper_values(paper_scenario):
    phys = paper_scenario.physical
    assert ehopt.energy_cost(300.0, 3.311e-13, phys) == 1
    assert ehopt.energy_cost(600.0, 1.655e-13, phys) == 4
    table = paper_scenario.costs().cost
    assert sorted(set(table.flatten().tolist())) == [1, 2, 4]


def test_energy_cost_rejects_nonintegral(paper_scenario):
    phys = paper_scenario.physical
    with pytest.raises(ScenarioInvalid):
        ehopt.energy_cost(450.0, 3.311e-13, phys)  # 1.5 units
    with pytest.raises(ScenarioInvalid):
        ehopt.energy_cost(300.0, 3.311e-13, phys, tol=1e-6)  # gains quoted to 4 digits


def test_build_state_space_counts(paper_scenario):
    states, index = ehopt.build_state_space(paper_scenario)
    assert len(states) == 48  # 2*2*2*(5+1)
    assert len(index) == 48
    assert index[states[13]] == 13
    # lexicographic (e, d, h, battery)
    assert states[0] == SystemState(0, 0, 0, 0)
    assert states[1] == SystemState(0, 0, 0, 1)
    assert states[-1] == SystemState(1, 1, 1, 5)

    tiny = make_scenario(
        data_labels=(300.0,), data_t=((1.0,),),
        energy_labels=(0,), energy_t=((1.0,),),
        gain_labels=(1.0,), gain_t=((1.0,),),
        b_max=0, cost=[[1]],
    )
    assert len(ehopt.build_state_space(tiny)[0]) == 1

    wide = make_scenario(b_max=9)
    assert len(ehopt.build_state_space(wide)[0]) == 80


def test_next_battery():
    assert ehopt.next_battery(5, Action.TRANSMIT, 2, 0, 5) == 3
    assert ehopt.next_battery(5, Action.DROP, 2, 2, 5) == 5  # overflow capped
    with pytest.raises(InfeasibleAction):
        ehopt.next_battery(1, Action.TRANSMIT, 2, 0, 5)


def test_transition_prob(paper_model):
    m = paper_model
    # deterministic chains: unique successor has probability one
    det = make_scenario(
        data_t=((1.0, 0.0), (0.0, 1.0)),
        energy_t=((1.0, 0.0), (0.0, 1.0)),
        gain_t=((1.0, 0.0), (0.0, 1.0)),
    )
    s = SystemState(1, 0, 1, 3)
    cost = int(ehopt.as_model(det).cost[0, 1])
    nxt = SystemState(1, 0, 1, min(3 - cost + 2, 5))
    assert ehopt.transition_prob(s, Action.TRANSMIT, nxt, det) == 1.0

    # paper chains, all components self-transitioning
    s = SystemState(1, 1, 1, 5)
    cost = int(m.cost[1, 1])
    good = SystemState(1, 1, 1, min(5 - cost + 2, 5))
    assert ehopt.transition_prob(s, Action.TRANSMIT, good, m) == pytest.approx(0.9**3)
    # battery mismatch has probability zero
    bad = SystemState(1, 1, 1, 0)
    assert ehopt.transition_prob(s, Action.TRANSMIT, bad, m) == 0.0
    with pytest.raises(InfeasibleAction):
        ehopt.transition_prob(SystemState(0, 1, 0, 0), Action.TRANSMIT, good, m)


def test_transition_rows_normalized(paper_model):
    p = paper_model.transitions()
    for x in (0, 1):
        rows = np.where(paper_model.feasible[:, x])[0]
        sums = p[x, rows].sum(axis=1)
        assert np.abs(sums - 1.0).max() < 1e-9


def test_exogenous_marginal_independent_of_policy(paper_model):
    """Summing the kernel over battery levels must recover the product chain
    whatever the action."""
    m = paper_model
    joint = np.einsum(
        "ij,kl,mn->ikmjln",
        m.scenario.energy_chain.transition,
        m.scenario.data_chain.transition,
        m.scenario.channel_chain.transition,
    ).reshape(8, 8)
    p = m.transitions()
    for x in (0, 1):
        for s in range(m.n_states):
            if not m.feasible[s, x]:
                continue
            marg = p[x, s].reshape(8, m.n_battery).sum(axis=1)
            assert np.abs(marg - joint[s // m.n_battery]).max() < 1e-12


def test_expected_reward(paper_model):
    s300 = SystemState(0, 0, 1, 5)
    s600 = SystemState(0, 1, 1, 5)
    assert ehopt.expected_reward(s300, Action.TRANSMIT, paper_model) == 300.0
    assert ehopt.expected_reward(s600, Action.DROP, paper_model) == 0.0
    assert ehopt.expected_reward(s600, Action.TRANSMIT, paper_model) == 600.0


def test_feasible_actions(paper_scenario):
    table = paper_scenario.costs()
    # cost[0][1] = 1, cost[1][0] = 4
    assert ehopt.feasible_actions(SystemState(0, 0, 1, 0), table) == {Action.DROP}
    assert ehopt.feasible_actions(SystemState(0, 1, 0, 5), table) == {
        Action.DROP, Action.TRANSMIT}
    assert ehopt.feasible_actions(SystemState(0, 1, 1, 2), table) == {
        Action.DROP, Action.TRANSMIT}  # boundary equality allowed


def test_greedy_policy(paper_model):
    pol = ehopt.greedy_policy(paper_model)
    ehopt.validate_policy(pol, paper_model)
    idx = paper_model.flat_index
    # fully charged with an affordable packet: transmit
    assert pol.actions[idx(0, 0, 1, 5)] == 1
    # empty battery: drop
    assert pol.actions[idx(0, 0, 0, 0)] == 0
    # every cost above capacity: never transmits
    expensive = make_scenario(cost=[[7, 7], [7, 7]], b_max=5)
    assert not ehopt.greedy_policy(expensive).actions.any()


def test_policy_validation(paper_model):
    bad = np.ones(paper_model.n_states, dtype=np.int8)
    with pytest.raises(ScenarioInvalid):
        ehopt.validate_policy(ehopt.Policy(bad), paper_model)


def test_explicit_cost_table_override():
    sc = make_scenario(cost=[[1, 2], [3, 4]])
    assert np.array_equal(sc.costs().cost, [[1, 2], [3, 4]])
    with pytest.raises(ScenarioInvalid):
        make_scenario(cost=[[1, 2]])  # shape mismatch
    with pytest.raises(ScenarioInvalid):
        make_scenario(cost=[[0, 1], [1, 1]])  # non-positive cost


def test_action_set_is_binary():
    assert len(ehopt.Action) == 2
    assert int(ehopt.Action.DROP) == 0 and int(ehopt.Action.TRANSMIT) == 1
