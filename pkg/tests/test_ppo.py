import copy
import math

import numpy as np
import pytest

import oracles
from pedalrl.episode import Transition
from pedalrl.nets import actor_forward, init_params, zeros_like_params
from pedalrl.ppo import (
    ExperienceBuffer,
    PPOHyper,
    actor_grads,
    actor_loss,
    clip_ratio,
    compute_advantages,
    compute_returns,
    critic_grads,
    critic_loss,
    critic_values,
    entropy_term,
    load_checkpoint,
    make_agent,
    save_checkpoint,
    sgd_step,
    update_agent,
    update_agents,
)


def fill_buffer(rng, capacity, obs_dim=3, n_actions=4, terminal_pattern=None):
    buf = ExperienceBuffer(capacity)
    transitions = []
    for i in range(capacity):
        if terminal_pattern is None:
            terminal = bool(rng.random() < 0.15) or i == capacity - 1
        else:
            terminal = terminal_pattern[i]
        transitions.append(
            Transition(
                obs=rng.uniform(-1, 1, obs_dim),
                action=int(rng.integers(n_actions)),
                log_prob_old=float(-rng.uniform(0.1, 2.0)),
                reward=float(rng.normal()),
                next_obs=rng.uniform(-1, 1, obs_dim),
                terminal=terminal,
            )
        )
    buf.extend(transitions)
    return buf


def test_buffer_bookkeeping():
    rng = np.random.default_rng(0)
    buf = fill_buffer(rng, 8)
    assert buf.full
    obs, actions, logp, rewards, next_obs, terminals = buf.arrays()
    assert obs.shape == (8, 3)
    assert actions.dtype.kind == "i"
    assert terminals[-1]
    buf.clear()
    assert not buf.full
    assert len(buf) == 0


def test_advantages_match_double_loop_oracle():
    rng = np.random.default_rng(42)
    critic = init_params(rng, 3, 1)
    for _ in range(30):
        buf = fill_buffer(rng, 10)
        gamma = float(rng.uniform(0.1, 0.999))
        q = compute_advantages(buf, critic, gamma)
        obs, _, _, rewards, next_obs, terminals = buf.arrays()
        expected = oracles.advantage_double_loop(
            rewards.tolist(),
            critic_values(critic, obs).tolist(),
            critic_values(critic, next_obs).tolist(),
            terminals.tolist(),
            gamma,
        )
        for got, want in zip(q, expected):
            assert oracles.relative_error(got, want) <= 1e-12


def test_advantages_gamma_zero_reduces_to_td():
    rng = np.random.default_rng(1)
    critic = init_params(rng, 3, 1)
    buf = fill_buffer(rng, 12)
    q = compute_advantages(buf, critic, 0.0)
    obs, _, _, rewards, _, _ = buf.arrays()
    assert np.allclose(q, rewards - critic_values(critic, obs), atol=1e-14)


def test_advantages_zero_critic_terminal_free():
    # with V = 0 and no interior terminals, Q_t is the plain discounted sum
    rng = np.random.default_rng(2)
    critic = zeros_like_params(init_params(rng, 3, 1))
    pattern = [False] * 9 + [True]
    buf = fill_buffer(rng, 10, terminal_pattern=pattern)
    gamma = 0.9
    q = compute_advantages(buf, critic, gamma)
    _, _, _, rewards, _, _ = buf.arrays()
    for t in range(10):
        expected = sum(gamma ** (i - t) * rewards[i] for i in range(t, 10))
        assert q[t] == pytest.approx(expected, rel=1e-12)


def test_returns_are_advantages_plus_values():
    q = np.array([1.0, -2.0, 0.5])
    v = np.array([0.25, 0.5, -1.0])
    assert np.array_equal(compute_returns(q, v), q + v)


def test_critic_loss_hand_value():
    assert critic_loss(np.array([2.0]), np.array([0.0])) == pytest.approx(2.0)
    assert critic_loss(np.array([1.0, 3.0]), np.array([1.0, 1.0])) == pytest.approx(1.0)


def test_clip_ratio_hand_values_and_bounds():
    assert clip_ratio(np.array([2.0]), 0.2)[0] == pytest.approx(1.2)
    assert clip_ratio(np.array([0.1]), 0.2)[0] == pytest.approx(0.8)
    assert clip_ratio(np.array([1.05]), 0.2)[0] == pytest.approx(1.05)
    rng = np.random.default_rng(3)
    r = rng.uniform(0, 10, 10000)
    c = clip_ratio(r, 0.2)
    assert c.min() >= 0.8 and c.max() <= 1.2


def test_entropy_term_rows():
    p = np.array([[0.25, 0.75], [0.5, 0.5]])
    e = entropy_term(p)
    assert e[0] == pytest.approx(-(0.25 * math.log(0.25) + 0.75 * math.log(0.75)))
    assert e[1] == pytest.approx(math.log(2))


def _single_sample_loss(ratio, advantage, eps=0.2):
    """Build a one-sample actor batch with a controlled probability ratio."""
    params = init_params(np.random.default_rng(0), 2, 3)
    obs = np.zeros((1, 2))
    dist = actor_forward(params, obs[0])
    action = 1
    logp_old = math.log(dist.probabilities[action] / ratio)
    hyper = PPOHyper(clip=eps, entropy_weight=0.0)
    return actor_loss(
        params, obs, np.array([action]), np.array([logp_old]), np.array([advantage]), hyper
    )


def test_actor_loss_hand_values():
    # ratio 2, Q=1: unclipped 2, clipped 1.2 -> -min = -1.2
    assert _single_sample_loss(2.0, 1.0) == pytest.approx(-1.2, rel=1e-12)
    # ratio 2, Q=-1: unclipped -2, clipped -1.2 -> -min = 2
    assert _single_sample_loss(2.0, -1.0) == pytest.approx(2.0, rel=1e-12)
    # inside the clip band the raw surrogate wins
    assert _single_sample_loss(1.1, 1.0) == pytest.approx(-1.1, rel=1e-12)


def test_actor_entropy_sign_flag():
    rng = np.random.default_rng(9)
    params = init_params(rng, 3, 4)
    obs = rng.uniform(-1, 1, (6, 3))
    actions = rng.integers(4, size=6)
    logp_old = np.array(
        [actor_forward(params, o).log_probabilities[a] for o, a in zip(obs, actions)]
    )
    adv = rng.normal(size=6)
    base = actor_loss(params, obs, actions, logp_old, adv, PPOHyper(entropy_weight=0.0))
    bonus = actor_loss(params, obs, actions, logp_old, adv, PPOHyper(entropy_weight=0.5))
    printed = actor_loss(
        params, obs, actions, logp_old, adv,
        PPOHyper(entropy_weight=0.5, entropy_as_printed=True),
    )
    mean_ent = entropy_term(
        np.stack([actor_forward(params, o).probabilities for o in obs])
    ).mean()
    assert bonus == pytest.approx(base - 0.5 * mean_ent, rel=1e-12)
    assert printed == pytest.approx(base + 0.5 * mean_ent, rel=1e-12)


def _fd_check_actor(hyper, seed):
    rng = np.random.default_rng(seed)
    params = init_params(rng, 3, 4, hidden=8)
    obs = rng.uniform(-1, 1, (5, 3))
    actions = rng.integers(4, size=5)
    # stored log-probs near the current policy keep ratios ~1, off the
    # clip boundary at eps = 0.2
    logp_old = np.array(
        [actor_forward(params, o).log_probabilities[a] for o, a in zip(obs, actions)]
    ) + rng.uniform(-0.05, 0.05, 5)
    adv = rng.normal(size=5)

    def loss():
        return actor_loss(params, obs, actions, logp_old, adv, hyper)

    _, grads = actor_grads(params, obs, actions, logp_old, adv, hyper)
    worst = 0.0
    # h = 3e-5 balances truncation against roundoff for a loss of order 1;
    # smaller steps leave tiny gradient entries roundoff-dominated
    for (name, g), (_, arr) in zip(grads.arrays(), params.arrays()):
        fd = oracles.central_difference(loss, arr, h=3e-5)
        denom = np.maximum(np.abs(fd), 1e-8)
        worst = max(worst, float(np.max(np.abs(g - fd) / denom)))
    return worst


def test_actor_grads_match_finite_differences():
    assert _fd_check_actor(PPOHyper(entropy_weight=0.0), 5) < 1e-5
    assert _fd_check_actor(PPOHyper(entropy_weight=0.1), 6) < 1e-5
    assert _fd_check_actor(PPOHyper(entropy_weight=0.1, entropy_as_printed=True), 7) < 1e-5


def test_critic_grads_match_finite_differences():
    rng = np.random.default_rng(10)
    params = init_params(rng, 4, 1, hidden=8)
    obs = rng.uniform(-1, 1, (6, 4))
    returns = rng.normal(size=6)

    def loss():
        out = critic_values(params, obs)
        return float(((returns - out) ** 2).sum() / (2.0 * len(returns)))

    reported, grads = critic_grads(params, obs, returns)
    assert reported == pytest.approx(loss(), rel=1e-12)
    for (name, g), (_, arr) in zip(grads.arrays(), params.arrays()):
        fd = oracles.central_difference(loss, arr)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-8), name


def test_sgd_step_momentum_semantics():
    hyper = PPOHyper(learning_rate=0.1, momentum=0.5)
    params = init_params(0, 2, 2, hidden=4)
    start = copy.deepcopy(params)
    grads = zeros_like_params(params)
    vel = zeros_like_params(params)
    for _, g in grads.arrays():
        g[:] = 1.0
    sgd_step(params, grads, vel, hyper)
    sgd_step(params, grads, vel, hyper)
    # steps: -0.1, then -0.1*0.5 - 0.1 = -0.15; total -0.25
    for (_, p), (_, s) in zip(params.arrays(), start.arrays()):
        assert np.allclose(p, s - 0.25, atol=1e-15)


def test_update_requires_full_buffer():
    rng = np.random.default_rng(0)
    agent = make_agent(rng, 3, 4, buffer_size=8)
    with pytest.raises(ValueError):
        update_agent(agent, PPOHyper(buffer_size=8), rng)


def test_zero_learning_rate_keeps_params():
    rng = np.random.default_rng(6)
    agent = make_agent(rng, 3, 4, buffer_size=16)
    agent.buffer = fill_buffer(rng, 16)
    before_actor = copy.deepcopy(agent.actor)
    before_critic = copy.deepcopy(agent.critic)
    hyper = PPOHyper(learning_rate=0.0, buffer_size=16, batch_size=8)
    trace = update_agent(agent, hyper, rng)
    assert len(trace) == hyper.update_epochs * 2
    for (_, a), (_, b) in zip(agent.actor.arrays(), before_actor.arrays()):
        assert np.array_equal(a, b)
    for (_, a), (_, b) in zip(agent.critic.arrays(), before_critic.arrays()):
        assert np.array_equal(a, b)
    assert len(agent.buffer) == 0


def test_update_is_deterministic_given_rng():
    def run(seed):
        rng = np.random.default_rng(seed)
        agent = make_agent(rng, 3, 4, buffer_size=16)
        agent.buffer = fill_buffer(np.random.default_rng(99), 16)
        hyper = PPOHyper(learning_rate=0.01, buffer_size=16, batch_size=8)
        update_agent(agent, hyper, np.random.default_rng(7))
        return agent

    a, b = run(5), run(5)
    for (_, x), (_, y) in zip(a.actor.arrays(), b.actor.arrays()):
        assert np.array_equal(x, y)


def test_update_agents_order_invariant():
    def build(order_seed):
        rng = np.random.default_rng(3)
        h = make_agent(rng, 3, 4, buffer_size=8)
        m = make_agent(rng, 2, 2, buffer_size=8)
        h.buffer = fill_buffer(np.random.default_rng(1), 8, obs_dim=3, n_actions=4)
        m.buffer = fill_buffer(np.random.default_rng(2), 8, obs_dim=2, n_actions=2)
        agents = {"machine": m, "human": h} if order_seed else {"human": h, "machine": m}
        hyper = PPOHyper(learning_rate=0.01, buffer_size=8, batch_size=4)
        update_agents(agents, hyper, np.random.default_rng(11))
        return agents

    first, second = build(0), build(1)
    for key in ("human", "machine"):
        for (_, x), (_, y) in zip(first[key].actor.arrays(), second[key].actor.arrays()):
            assert np.array_equal(x, y)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    human = make_agent(rng, 5, 5, buffer_size=4)
    machine = make_agent(rng, 6, 2, buffer_size=4)
    path = tmp_path / "agents.ckpt"
    save_checkpoint(path, human, machine, meta={"setting": 2, "seed": 7})
    loaded = load_checkpoint(path)
    assert loaded["meta"]["setting"] == "2"
    for name, agent, attr in (
        ("human.actor", human, "actor"),
        ("human.critic", human, "critic"),
        ("machine.actor", machine, "actor"),
        ("machine.critic", machine, "critic"),
    ):
        for (_, a), (_, b) in zip(loaded[name].arrays(), getattr(agent, attr).arrays()):
            assert np.array_equal(a, b)


def test_hyper_validation():
    with pytest.raises(ValueError):
        PPOHyper(gamma=1.0)
    with pytest.raises(ValueError):
        PPOHyper(clip=0.0)
    with pytest.raises(ValueError):
        PPOHyper(batch_size=128, buffer_size=64)
