import math

import numpy as np
import pytest

from epochfpa.agents import (
    BAD_THRESHOLD,
    GOOD_TEMPLATE,
    ZERO_BID,
    AgentError,
    EtcAgent,
    Exp3Agent,
    Exp3Learner,
    Expert,
    ExpertFamily,
    LookaheadAgent,
    MyopicAgent,
    ValueGrid,
    build_agent,
    default_expert_family,
    evaluate_expert,
    good_strategy_bid,
)
from epochfpa.distributions import Uniform
from epochfpa.mechanism import (
    AgentView,
    BuyerState,
    MechanismParams,
    derive_epoch_config,
)
from epochfpa.rng import substream

EPS = 0.3
RHO = EPS * (1 - EPS) ** 4 / 12


def make_view(n=2, uncleared=0, states=None, phase="good"):
    params = MechanismParams(n=n, horizon=1000, epsilon=EPS, delta=EPS, rho=RHO)
    good = [i for i in range(n) if states is None or states[i] != BuyerState.BAD]
    bad = [i for i in range(n) if states is not None and states[i] == BuyerState.BAD]
    cfg = derive_epoch_config(params, good, bad, Uniform(0.0, 1.0))
    states = tuple(states or [BuyerState.GOOD] * n)
    return params, AgentView(
        t=0,
        phase=phase,
        config=cfg,
        uncleared=uncleared,
        states=states,
        num_good=sum(1 for s in states if s == BuyerState.GOOD),
        num_bad=sum(1 for s in states if s == BuyerState.BAD),
    )


def bind(agent, params, buyer=0, seed=123):
    agent.bind(buyer, params, Uniform(0.0, 1.0), substream(seed, "agent", buyer))
    return agent


# -- good strategy ----------------------------------------------------------------


def test_good_strategy_bids_reserve_above_cutoff():
    _, view = make_view()
    cfg = view.config
    assert good_strategy_bid(view, 0.9) == cfg.good_reserve
    assert good_strategy_bid(view, cfg.good_cutoff) == cfg.good_reserve
    assert good_strategy_bid(view, 0.3) == 0.0


def test_good_strategy_bids_reserve_after_threshold():
    _, view = make_view(uncleared=10_000)
    assert view.uncleared >= view.config.uncleared_threshold
    assert good_strategy_bid(view, 0.0) == view.config.good_reserve


def test_lookahead_defaults_to_sophisticated_depth():
    params, view = make_view()
    agent = bind(LookaheadAgent(), params)
    assert agent.k == params.lookahead_threshold
    assert agent.is_deep
    assert agent.bid(view, 0.9) == view.config.good_reserve


def test_lookahead_warns_below_threshold_but_still_plays_safe():
    params, view = make_view()
    with pytest.warns(UserWarning):
        agent = bind(LookaheadAgent(k=3), params)
    assert not agent.is_deep
    assert agent.bid(view, 0.9) == view.config.good_reserve
    assert agent.bid(view, 0.1) == 0.0


def test_good_strategy_bids_only_zero_or_reserve():
    params, _ = make_view()
    agent = bind(LookaheadAgent(), params)
    for uncleared in (0, 10_000):
        _, view = make_view(uncleared=uncleared)
        for v in np.linspace(0.0, 1.0, 33):
            assert agent.bid(view, float(v)) in (0.0, view.config.good_reserve)


# -- myopic ----------------------------------------------------------------------


def test_myopic_bad_state_reserve_rule():
    params, view = make_view(states=[BuyerState.BAD, BuyerState.GOOD], phase="bad")
    agent = bind(MyopicAgent(), params)
    r_b = view.config.bad_reserve
    assert agent.bid(view, r_b + 0.2) == r_b
    assert agent.bid(view, r_b - 0.1) == 0.0
    assert agent.bid(view, r_b) == 0.0  # indifferent at the reserve, stays out


def test_myopic_bad_state_value_rule():
    params, view = make_view(states=[BuyerState.BAD, BuyerState.GOOD], phase="bad")
    agent = bind(MyopicAgent(bad_mode="value"), params)
    r_b = view.config.bad_reserve
    assert agent.bid(view, r_b + 0.2) == pytest.approx(r_b + 0.2)
    assert agent.bid(view, r_b - 0.1) == 0.0


def test_myopic_bad_state_bid_sides_of_reserve():
    params, view = make_view(states=[BuyerState.BAD, BuyerState.GOOD], phase="bad")
    r_b = view.config.bad_reserve
    for mode in ("reserve", "value"):
        agent = bind(MyopicAgent(bad_mode=mode), params)
        for v in np.linspace(0, 1, 41):
            bid = agent.bid(view, float(v))
            if v > r_b:
                assert bid >= r_b
            else:
                assert bid < r_b or v == r_b


def test_myopic_good_state_default_and_zero_modes():
    params, view = make_view()
    r_g = view.config.good_reserve
    agent = bind(MyopicAgent(), params)
    assert agent.bid(view, 0.9) == r_g
    assert agent.bid(view, r_g - 0.01) == 0.0
    zero = bind(MyopicAgent(good_mode="zero"), params)
    assert zero.bid(view, 0.99) == 0.0


def test_myopic_empirical_mode_bids_between_reserve_and_value():
    params, view = make_view()
    agent = bind(MyopicAgent(good_mode="empirical"), params)
    r_g = view.config.good_reserve
    # before enough observations it falls back to the reserve rule
    assert agent.bid(view, 0.9) == r_g
    for _ in range(40):
        agent.observe(view, 0.5, 0.0, {0: 0.0, 1: r_g + 0.05}, 1)
    bid = agent.bid(view, 0.95)
    assert r_g <= bid <= 0.95
    assert agent.bid(view, r_g - 0.05) == 0.0


def test_myopic_rejects_unknown_modes():
    with pytest.raises(AgentError):
        MyopicAgent(good_mode="wat")
    with pytest.raises(AgentError):
        MyopicAgent(bad_mode="wat")


# -- experts ----------------------------------------------------------------------


def test_bad_threshold_expert_rule():
    _, view = make_view(states=[BuyerState.BAD, BuyerState.GOOD], phase="bad")
    grid = ValueGrid(0.0, 1.0, 1 / 64)
    cfg = view.config
    expert = Expert(BAD_THRESHOLD)
    assert evaluate_expert(expert, view, 0, cfg.bad_cutoff + 0.1, grid) == cfg.bad_reserve
    assert evaluate_expert(expert, view, 0, cfg.bad_cutoff - 0.1, grid) == 0.0
    # not in the bad state: always zero
    assert evaluate_expert(expert, view, 1, 0.99, grid) == 0.0


def test_good_template_expert_matches_good_strategy():
    _, view = make_view(uncleared=10_000)
    grid = ValueGrid(0.0, 1.0, 1 / 64)
    expert = Expert(GOOD_TEMPLATE)
    assert evaluate_expert(expert, view, 0, 0.0, grid) == view.config.good_reserve
    _, view = make_view()
    for v in (0.0, 0.2, 0.5, 0.77, 1.0):
        assert evaluate_expert(expert, view, 0, v, grid) == good_strategy_bid(view, v)


def test_leveled_experts_snap_values_to_grid():
    _, view = make_view()
    grid = ValueGrid(0.0, 1.0, 1 / 4)
    leveled = Expert(GOOD_TEMPLATE, level=0.9)
    cutoff = view.config.good_cutoff  # 0.5 for two good buyers on uniform
    # 0.6 snaps down to 0.5 which still meets the cutoff
    assert evaluate_expert(leveled, view, 0, 0.6, grid) == 0.9
    # 0.45 snaps down to 0.25, below the cutoff
    assert evaluate_expert(leveled, view, 0, 0.45, grid) == 0.0
    assert cutoff == 0.5


def test_expert_bids_nonnegative_and_finite_everywhere():
    rng = substream(11, "bids")
    family = default_expert_family(Uniform(0.0, 1.0))
    for states in ([BuyerState.GOOD] * 2, [BuyerState.BAD, BuyerState.GOOD]):
        for uncleared in (0, 10_000):
            _, view = make_view(states=states, uncleared=uncleared)
            for _ in range(40):
                v = float(rng.random())
                for j in range(len(family)):
                    b = family.bid(j, view, 0, v)
                    assert math.isfinite(b) and b >= 0.0


def test_expert_outputs_lie_on_grid_or_current_reserves():
    rng = substream(12, "grid-outputs")
    family = default_expert_family(Uniform(0.0, 1.0))
    grid_points = {
        round(family.grid.lo + k * family.grid.step, 12)
        for k in range(int((family.grid.hi - family.grid.lo) / family.grid.step) + 1)
    }
    for states in ([BuyerState.GOOD] * 2, [BuyerState.BAD, BuyerState.GOOD]):
        for uncleared in (0, 10_000):
            _, view = make_view(states=states, uncleared=uncleared)
            allowed = grid_points | {
                0.0,
                view.config.good_reserve,
                view.config.bad_reserve,
            }
            for _ in range(30):
                v = float(rng.random())
                for j in range(len(family)):
                    b = family.bid(j, view, 0, v)
                    assert b in allowed or round(b, 12) in allowed


def test_default_family_contains_benchmarks_and_zero():
    family = default_expert_family(Uniform(0.0, 1.0))
    styles = [(e.style, e.level) for e in family.experts]
    assert styles[0] == (GOOD_TEMPLATE, None)
    assert (BAD_THRESHOLD, None) in styles
    assert (ZERO_BID, None) in styles
    assert len(family) <= 16


# -- learners ---------------------------------------------------------------------


def test_exp3_fresh_probabilities_uniform():
    learner = Exp3Learner(4, 0.1, 1.0, substream(1, "l"))
    assert np.allclose(learner.probabilities(), 0.25)


def test_exp3_zero_rewards_keep_uniform():
    learner = Exp3Learner(4, 0.1, 1.0, substream(2, "l"))
    for _ in range(50):
        learner.select_arm()
        learner.update(0.0)
    assert np.allclose(learner.probabilities(), 0.25)


def test_exp3_single_step_hand_value():
    # gamma=0.1, N=2, importance-weighted reward 1.0 applied to arm 0:
    # w = (e^{0.05}, 1) and p_0 = 0.9 * e^{0.05}/(e^{0.05}+1) + 0.05
    learner = Exp3Learner(2, 0.1, 1.0, substream(3, "l"))
    while True:
        arm, prob = learner.select_arm()
        if arm == 0:
            break
        learner.update(0.0)
    learner.update(prob * 1.0)  # importance-weighted estimate becomes exactly 1.0
    w = math.exp(0.05)
    expect = 0.9 * w / (w + 1.0) + 0.05
    assert learner.probabilities()[0] == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(0.51125, abs=1e-4)


def test_exp3_update_pairing_enforced():
    learner = Exp3Learner(3, 0.2, 1.0, substream(4, "l"))
    with pytest.raises(AgentError):
        learner.update(0.5)
    learner.select_arm()
    with pytest.raises(AgentError):
        learner.select_arm()
    learner.update(0.5)
    with pytest.raises(AgentError):
        learner.update(0.5)


def test_exp3_importance_weight_bounded_by_floor():
    gamma, n = 0.2, 5
    learner = Exp3Learner(n, gamma, 1.0, substream(5, "l"))
    for _ in range(200):
        _, prob = learner.select_arm()
        assert prob >= gamma / n - 1e-12
        learner.update(1.0)
        assert np.all(learner.weights > 0)
        assert learner.probabilities().sum() == pytest.approx(1.0, abs=1e-12)


def test_exp3_agent_runs_against_family():
    params, view = make_view()
    agent = bind(Exp3Agent(levels=2), params)
    bid = agent.bid(view, 0.8)
    assert math.isfinite(bid) and bid >= 0
    agent.observe(view, 0.8, 0.1, {0: bid, 1: 0.0}, 0)


# -- explore-then-commit ------------------------------------------------------------


def etc_with_family(params, n_experts=2, explore_len=50):
    grid = ValueGrid(0.0, 1.0, 1 / 64)
    experts = tuple(
        [Expert(GOOD_TEMPLATE)] + [Expert(ZERO_BID)] * (n_experts - 1)
    )
    agent = EtcAgent(family=ExpertFamily(experts, grid), explore_len=explore_len)
    return bind(agent, params)


def test_etc_exploration_schedule():
    params, _ = make_view()
    agent = etc_with_family(params, n_experts=2, explore_len=50)
    assert [agent._arm_for(t) for t in (0, 49, 50, 99)] == [0, 0, 1, 1]


def test_etc_commits_to_best_average():
    params, view = make_view()
    agent = etc_with_family(params, n_experts=2, explore_len=2)
    agent._scores[:] = (0.1 * 2, 0.3 * 2)
    assert agent._arm_for(4) == 1
    assert agent.committed_index == 1


def test_etc_tie_breaks_to_lowest_index():
    params, _ = make_view()
    agent = etc_with_family(params, n_experts=3, explore_len=2)
    agent._scores[:] = (0.2, 0.2, 0.2)
    assert agent._arm_for(6) == 0


def test_etc_default_exploration_length():
    params, _ = make_view()
    agent = bind(EtcAgent(levels=1), params)
    n = len(agent.family)
    assert agent.explore_len == max(1, math.ceil(params.horizon ** (2 / 3) / n))


def test_etc_warns_when_reset_precedes_exploration_end():
    params = MechanismParams(
        n=2, horizon=1000, epsilon=EPS, delta=EPS, rho=RHO, reset_round=10
    )
    with pytest.warns(UserWarning, match="precedes the end of exploration"):
        bind(EtcAgent(levels=1), params)


# -- roster construction -------------------------------------------------------------


def test_build_agent_from_specs():
    assert isinstance(build_agent({"kind": "myopic"}), MyopicAgent)
    agent = build_agent({"kind": "myopic", "good_mode": "zero"})
    assert agent.good_mode == "zero"
    with pytest.raises(AgentError):
        build_agent({"kind": "unheard-of"})
    with pytest.raises(AgentError):
        build_agent({"good_mode": "zero"})
    with pytest.raises(AgentError):
        build_agent({"kind": "myopic", "bogus_option": 1})
