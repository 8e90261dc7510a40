from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a3ps import eda
from a3ps.env import EnvConfig, FroggerEnv, Observation, RewardConfig, frame_size
from a3ps.errors import ConfigError, ContractError, NumericError, ShapeError
from a3ps.nncore import AdamState, Tensor, checksum, gradient_check, no_recording

CFG = EnvConfig()


def fresh(seed=0):
    return eda.new_model(frame_size(CFG), CFG.rows, seed=seed)


def randomised_head(model, seed=1):
    rng = np.random.default_rng(seed)
    model.actor.weight.data = rng.normal(0, 0.5, size=model.actor.weight.shape)
    model.actor.bias.data = rng.normal(0, 0.5, size=model.actor.bias.shape)
    return model


def test_fresh_model_is_uniform():
    env = FroggerEnv(CFG, RewardConfig.dense())
    logits, probs = eda.action_distribution(fresh(), env.reset())
    np.testing.assert_array_equal(logits, np.zeros(5))
    np.testing.assert_array_equal(probs, np.full(5, 0.2))


def test_distribution_is_pure_and_normalised():
    env = FroggerEnv(CFG, RewardConfig.dense())
    obs = env.reset()
    m = randomised_head(fresh())
    a, b = eda.action_distribution(m, obs), eda.action_distribution(m, obs)
    np.testing.assert_array_equal(a[0], b[0])
    assert abs(a[1].sum() - 1.0) <= 1e-12


def test_shape_errors():
    m = fresh()
    with pytest.raises(ShapeError):
        m(np.zeros((1, 4, 7)), np.zeros((1, 8)))
    with pytest.raises(ShapeError):
        m(np.zeros((1, 4, frame_size(CFG))), np.zeros((1, 3)))


def test_separate_critic_trunk():
    m = eda.new_model(frame_size(CFG), CFG.rows, shared=False)
    assert any(name.startswith("critic_trunk.") for name, _ in m.named_parameters())
    logits, values = m(np.zeros((2, 4, frame_size(CFG))), np.zeros((2, 8)))
    assert logits.shape == (2, 5) and values.shape == (2,)


@pytest.mark.parametrize(
    "kw",
    [
        dict(gamma=0.0),
        dict(gamma=1.5),
        dict(clip_epsilon=1.0),
        dict(rollout_length=8, minibatch_size=16),
        dict(ratio_reference="blend"),
    ],
)
def test_ppo_config_invariants(kw):
    with pytest.raises(ConfigError):
        eda.PpoConfig(**kw)


def test_empty_rollout():
    env = FroggerEnv(CFG, RewardConfig.dense())
    buf = eda.collect_rollout(env, fresh(), 0, np.random.default_rng(0))
    assert len(buf) == 0


def rollout(seed, length=120):
    env = FroggerEnv(CFG, RewardConfig.dense(), seed=seed)
    dones = []
    buf = eda.collect_rollout(env, randomised_head(fresh()), length, np.random.default_rng(seed),
                              on_step=lambda out, r, d: dones.append(out.terminal))
    return buf, dones


def test_rollout_is_deterministic_and_terminals_align():
    a, dones = rollout(3)
    b, _ = rollout(3)
    for key, va in a.arrays().items():
        np.testing.assert_array_equal(va, b.arrays()[key])
    assert a.dones == dones
    assert any(dones)


def test_rollout_resets_after_termination():
    buf, _ = rollout(4, 200)
    arr = buf.arrays()
    start = FroggerEnv(CFG, RewardConfig.dense()).reset()
    for t in np.flatnonzero(arr["dones"][:-1]):
        np.testing.assert_array_equal(arr["goals"][t + 1], start.goal_vector)


def test_behavior_policy_drives_actions_but_not_log_probs():
    env = FroggerEnv(CFG, RewardConfig.dense())
    only_left = lambda env_, logits: np.array([0.0, 0.0, 1.0, 0.0, 0.0])
    buf = eda.collect_rollout(env, fresh(), 10, np.random.default_rng(0), behavior=only_left)
    assert set(buf.actions) == {2}
    np.testing.assert_allclose(buf.log_probs, np.log(0.2), rtol=0, atol=1e-15)
    assert buf.behavior_log_probs == [0.0] * 10


def test_without_behavior_both_log_probs_agree():
    buf, _ = rollout(0, 40)
    np.testing.assert_allclose(buf.behavior_log_probs, buf.log_probs, rtol=0, atol=1e-12)


# -- advantages -----------------------------------------------------------


def test_gae_zero_inputs():
    adv, ret = eda.gae([0.0] * 4, [0.0] * 4, [False, False, True, False], 0.0, 0.99, 0.95)
    np.testing.assert_array_equal(adv, np.zeros(4))
    np.testing.assert_array_equal(ret, np.zeros(4))


def test_gae_single_terminal_step():
    adv, ret = eda.gae([7.0], [2.5], [True], 123.0, 0.99, 0.95)
    assert adv[0] == 7.0 - 2.5
    assert ret[0] == 7.0


def test_gae_hand_unrolled():
    # gamma 0.5, lambda 1: A_t = sum_k 0.5^k r_{t+k} + 0.5^(3-t) * V_last - V_t
    #   A_2 = 3 + 0.5*2 - 1.5                      = 2.5
    #   A_1 = 2 + 0.5*3 + 0.25*2 - 1               = 3.0
    #   A_0 = 1 + 0.5*2 + 0.25*3 + 0.125*2 - 0.5   = 2.5
    adv, ret = eda.gae([1.0, 2.0, 3.0], [0.5, 1.0, 1.5], [False] * 3, 2.0, 0.5, 1.0)
    np.testing.assert_allclose(adv, [2.5, 3.0, 2.5], rtol=0, atol=1e-12)
    np.testing.assert_allclose(ret, [3.0, 4.0, 4.0], rtol=0, atol=1e-12)


def brute_force_gae(rewards, values, dones, last_value, gamma, lam):
    n = len(rewards)
    vals = list(values) + [last_value]
    deltas = [rewards[t] + gamma * vals[t + 1] * (not dones[t]) - vals[t] for t in range(n)]
    out = []
    for t in range(n):
        total, w = 0.0, 1.0
        for k in range(t, n):
            total += w * deltas[k]
            if dones[k]:
                break
            w *= gamma * lam
        out.append(total)
    return np.array(out)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.booleans()), min_size=1, max_size=12),
    st.floats(-5, 5), st.floats(0.1, 1.0), st.floats(0.0, 1.0),
)
def test_gae_matches_brute_force(steps, last_value, gamma, lam):
    r, v, d = (list(x) for x in zip(*steps))
    adv, _ = eda.gae(r, v, d, last_value, gamma, lam)
    np.testing.assert_allclose(adv, brute_force_gae(r, v, d, last_value, gamma, lam), rtol=1e-9, atol=1e-9)


def test_normalize_guards_zero_std():
    np.testing.assert_array_equal(eda.normalize(np.full(5, 3.0)), np.zeros(5))
    z = eda.normalize(np.array([1.0, 2.0, 3.0, 4.0]))
    assert abs(z.mean()) < 1e-12 and abs(z.std() - 1.0) < 1e-12


# -- clipped surrogate ----------------------------------------------------


def test_surrogate_hand_cases():
    assert eda.clipped_surrogate(1.5, 1.0, 0.2) == 1.2
    assert eda.clipped_surrogate(0.5, -1.0, 0.2) == -0.8
    with no_recording():
        t = eda.surrogate(Tensor(np.array([1.5, 0.5])), np.array([1.0, -1.0]), 0.2)
    np.testing.assert_array_equal(t.data, [1.2, -0.8])


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(-10, 10), st.floats(0.05, 0.5))
def test_surrogate_bounds(r, a, eps):
    term = eda.clipped_surrogate(r, a, eps)
    assert term <= max(r * a, np.clip(r, 1 - eps, 1 + eps) * a) + 1e-12
    if a > 0:
        assert term <= r * a + 1e-12


def filled_buffer(seed=0, length=96):
    buf, _ = rollout(seed, length)
    return eda.compute_advantages(buf, eda.PpoConfig())


def test_ratio_identity_before_first_step():
    m = randomised_head(fresh())
    buf = filled_buffer()
    cfg = eda.PpoConfig(minibatch_size=32, rollout_length=96)
    stats = eda.ppo_update(m, buf, cfg, AdamState.for_params(m.parameters(), 1e-4), np.random.default_rng(0))
    assert len(stats.first_ratios) == 32
    assert set(stats.first_ratios) == {1.0}
    assert stats.minibatches == 3 * cfg.epochs_per_update


def test_behavior_reference_ratio_is_pi_over_mu():
    m = randomised_head(fresh())
    env = FroggerEnv(CFG, RewardConfig.dense())
    mu = np.array([0.4, 0.1, 0.2, 0.2, 0.1])
    buf = eda.collect_rollout(env, m, 32, np.random.default_rng(0), behavior=lambda e, lg: mu)
    eda.compute_advantages(buf, eda.PpoConfig())
    cfg = eda.PpoConfig(minibatch_size=32, rollout_length=32, ratio_reference="behavior")
    stats = eda.ppo_update(m, buf, cfg, AdamState.for_params(m.parameters(), 1e-4), np.random.default_rng(0))
    # first minibatch covers the whole buffer in some order
    expected = np.exp(np.array(buf.log_probs) - np.log(mu[buf.actions]))
    np.testing.assert_allclose(sorted(stats.first_ratios), sorted(expected), rtol=1e-12)


def test_update_requires_advantages():
    buf, _ = rollout(0, 10)
    m = fresh()
    with pytest.raises(ContractError):
        eda.ppo_update(m, buf, eda.PpoConfig(), AdamState.for_params(m.parameters(), 1e-4), np.random.default_rng(0))


def test_non_finite_loss_restores_state():
    m = randomised_head(fresh())
    buf = filled_buffer()
    buf.returns = buf.returns.copy()
    buf.returns[5] = np.inf
    opt = AdamState.for_params(m.parameters(), 1e-3)
    before = checksum(m.parameters())
    with pytest.raises(NumericError):
        eda.ppo_update(m, buf, eda.PpoConfig(minibatch_size=32, rollout_length=96), opt, np.random.default_rng(0))
    assert checksum(m.parameters()) == before
    assert opt.step == 0 and not any(a.any() for a in opt.m)


def test_full_loss_gradient_check():
    rng = np.random.default_rng(11)
    m = eda.ActorCritic(6, 2, rng, embed_dim=4, hidden=3)
    m.actor.weight.data = rng.normal(0, 0.5, size=m.actor.weight.shape)
    n = 6
    batch = {
        "frames": rng.normal(size=(n, 4, 6)),
        "goals": rng.integers(0, 2, size=(n, 2)).astype(float),
        "actions": rng.integers(0, 5, size=n),
        "advantages": rng.normal(size=n),
        "returns": rng.normal(size=n),
    }
    with no_recording():
        logits, _ = m(batch["frames"], batch["goals"])
    # old log-probs away from the current ones so some samples sit on the clipped branch
    logp = logits.data - np.log(np.exp(logits.data).sum(axis=1, keepdims=True))
    batch["log_probs"] = logp[np.arange(n), batch["actions"]] + rng.choice([-0.5, 0.0, 0.05, 0.5], size=n)
    cfg = eda.PpoConfig()
    err = gradient_check(lambda: eda.ppo_loss(m, batch, cfg).total, m.parameters())
    assert err < 1e-3


# -- bandit sanity --------------------------------------------------------


@dataclass
class _BanditState:
    which: int
    terminal: str | None = None


@dataclass
class _Outcome:
    terminal: bool = True


class TwoStateBandit:
    """One-step episodes; two alternating observations; action 3 pays in both."""

    GOOD = 3

    def __init__(self):
        self.state = None
        self.count = 0

    def observation(self):
        frames = np.zeros((4, 2))
        frames[:, self.state.which] = 1.0
        return Observation(frames, np.array([float(self.state.which)]))

    def reset(self):
        self.state = _BanditState(self.count % 2)
        return self.observation()

    def step(self, action):
        self.count += 1
        reward = 1.0 if action == self.GOOD else 0.0
        self.state = _BanditState(self.state.which, "done")
        return self.observation(), reward, True, _Outcome()


@pytest.mark.parametrize("seed", range(5))
def test_bandit_converges_to_rewarding_action(seed):
    rng = np.random.default_rng(seed)
    m = eda.ActorCritic(2, 1, rng, embed_dim=8, hidden=8)
    cfg = eda.PpoConfig(rollout_length=32, minibatch_size=16, learning_rate=3e-3)
    opt = AdamState.for_params(m.parameters(), cfg.learning_rate)
    env = TwoStateBandit()
    for update in range(200):
        buf = eda.compute_advantages(eda.collect_rollout(env, m, cfg.rollout_length, rng), cfg)
        eda.ppo_update(m, buf, cfg, opt, rng)
        greedy = [int(np.argmax(m.act(Observation(np.eye(2)[[w] * 4], np.array([float(w)])))[0])) for w in (0, 1)]
        if greedy == [TwoStateBandit.GOOD] * 2:
            break
    assert greedy == [TwoStateBandit.GOOD] * 2, f"seed {seed} did not converge in 200 updates"
