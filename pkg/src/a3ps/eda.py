"""Experience driven agent: a PPO actor-critic over stacked feature frames.

Each of the four frames goes through a shared affine+ReLU encoder, a GRU
aggregates them oldest-first, and the final hidden state is concatenated with
the goal-status vector before the actor and critic heads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from a3ps.blend import select_action
from a3ps.env.core import Action, FroggerEnv, Observation, StepOutcome
from a3ps.errors import ConfigError, ContractError, NumericError, ShapeError
from a3ps.nncore import (
    GRU,
    AdamState,
    Linear,
    Module,
    Tensor,
    adam_step,
    add,
    backward,
    clip,
    concat,
    exp,
    log_softmax,
    log_softmax_np,
    mean,
    minimum,
    mul,
    no_recording,
    pick,
    recording,
    recur,
    relu,
    reshape,
    softmax_np,
    square,
    sub,
    tsum,
)

N_ACTIONS = len(Action)
RATIO_REFERENCES = ("eda", "behavior")


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    epochs_per_update: int = 4
    minibatch_size: int = 64
    rollout_length: int = 256
    value_loss_coeff: float = 0.5
    entropy_coeff: float = 0.01
    learning_rate: float = 1e-4
    normalize_advantages: bool = True
    ratio_reference: str = "eda"  # "eda": r = pi/pi_old; "behavior": r = pi/mu with mu the acting distribution

    def __post_init__(self) -> None:
        if self.ratio_reference not in RATIO_REFERENCES:
            raise ConfigError(f"ratio_reference must be one of {RATIO_REFERENCES} (got {self.ratio_reference!r})")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1] (got {self.gamma})")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError(f"gae_lambda must lie in [0, 1] (got {self.gae_lambda})")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ConfigError(f"clip_epsilon must lie in (0, 1) (got {self.clip_epsilon})")
        if self.epochs_per_update < 1 or self.minibatch_size < 1:
            raise ConfigError("epochs_per_update and minibatch_size must be >= 1")
        if self.rollout_length < self.minibatch_size:
            raise ConfigError(
                f"rollout_length ({self.rollout_length}) must be >= minibatch_size ({self.minibatch_size})"
            )
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive (got {self.learning_rate})")


class _Trunk(Module):
    def __init__(self, frame_dim: int, embed_dim: int, hidden: int, rng: np.random.Generator):
        self.encoder = Linear(frame_dim, embed_dim, rng)
        self.rnn = GRU(embed_dim, hidden, rng)

    def __call__(self, frames: np.ndarray) -> Tensor:
        B, K, F = frames.shape
        time_major = np.ascontiguousarray(frames.transpose(1, 0, 2)).reshape(K * B, F)
        enc = reshape(relu(self.encoder(time_major)), (K, B, -1))
        return recur(self.rnn, enc)


class ActorCritic(Module):
    def __init__(
        self,
        frame_dim: int,
        goal_dim: int,
        rng: np.random.Generator,
        embed_dim: int = 64,
        hidden: int = 64,
        shared: bool = True,
    ):
        self.frame_dim, self.goal_dim, self.shared = frame_dim, goal_dim, shared
        self.trunk = _Trunk(frame_dim, embed_dim, hidden, rng)
        self.critic_trunk = None if shared else _Trunk(frame_dim, embed_dim, hidden, rng)
        self.actor = Linear(hidden + goal_dim, N_ACTIONS, rng, zero=True)
        self.critic = Linear(hidden + goal_dim, 1, rng)

    def __call__(self, frames: np.ndarray, goals: np.ndarray) -> tuple[Tensor, Tensor]:
        """Batched forward: frames (B, 4, F), goals (B, G) -> logits (B, 5), values (B,)."""
        frames = np.asarray(frames, dtype=np.float64)
        goals = np.asarray(goals, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != self.frame_dim:
            raise ShapeError(f"frames must be (batch, k, {self.frame_dim}), got {frames.shape}")
        if goals.shape != (frames.shape[0], self.goal_dim):
            raise ShapeError(f"goals must be ({frames.shape[0]}, {self.goal_dim}), got {goals.shape}")
        h = self.trunk(frames)
        logits = self.actor(concat([h, goals], axis=1))
        hc = h if self.critic_trunk is None else self.critic_trunk(frames)
        values = reshape(self.critic(concat([hc, goals], axis=1)), (-1,))
        return logits, values

    def act(self, obs: Observation) -> tuple[np.ndarray, float]:
        """Logits ``A_exp`` and value for one observation, off the tape."""
        with no_recording():
            logits, value = self(obs.frames[None], obs.goal_vector[None])
        return logits.data[0], float(value.data[0])


def action_distribution(model: ActorCritic, obs: Observation) -> tuple[np.ndarray, np.ndarray]:
    logits, _ = model.act(obs)
    return logits, softmax_np(logits)


def new_model(frame_dim: int, goal_dim: int, seed: int = 0, shared: bool = True) -> ActorCritic:
    return ActorCritic(frame_dim, goal_dim, np.random.default_rng(seed), shared=shared)


@dataclass
class RolloutBuffer:
    frames: list = field(default_factory=list)
    goals: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    behavior_log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    last_value: float = 0.0
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)

    def add(
        self,
        obs: Observation,
        action: int,
        log_prob: float,
        reward: float,
        value: float,
        done: bool,
        behavior_log_prob: float | None = None,
    ) -> None:
        self.frames.append(obs.frames)
        self.goals.append(obs.goal_vector)
        self.actions.append(int(action))
        self.log_probs.append(float(log_prob))
        self.behavior_log_probs.append(float(log_prob if behavior_log_prob is None else behavior_log_prob))
        self.rewards.append(float(reward))
        self.values.append(float(value))
        self.dones.append(bool(done))

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "frames": np.array(self.frames),
            "goals": np.array(self.goals),
            "actions": np.array(self.actions, dtype=np.int64),
            "log_probs": np.array(self.log_probs),
            "behavior_log_probs": np.array(self.behavior_log_probs),
            "rewards": np.array(self.rewards),
            "values": np.array(self.values),
            "dones": np.array(self.dones),
        }


Behavior = Callable[[FroggerEnv, np.ndarray], np.ndarray]


def collect_rollout(
    env: FroggerEnv,
    model: ActorCritic,
    length: int,
    rng: np.random.Generator,
    behavior: Behavior | None = None,
    on_step: Callable[[StepOutcome, float, bool], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> RolloutBuffer:
    """Run ``length`` environment steps, resetting on termination.

    ``behavior`` maps (env, EDA logits) to the acting distribution; by default
    the EDA policy acts on its own.  Both the EDA policy's log-prob and the
    acting distribution's log-prob of each sampled action are recorded.
    """
    buf = RolloutBuffer()
    if env.state is None or env.state.terminal is not None:
        obs = env.reset()
    else:
        obs = env.observation()
    for _ in range(length):
        if should_stop is not None and should_stop():
            break
        logits, value = model.act(obs)
        probs = softmax_np(logits) if behavior is None else behavior(env, logits)
        a = select_action(probs, "sample", rng)
        next_obs, reward, done, outcome = env.step(a)
        mu = probs[a] / np.sum(probs)
        buf.add(obs, a, log_softmax_np(logits)[a], reward, value, done, float(np.log(max(mu, 1e-300))))
        if on_step is not None:
            on_step(outcome, reward, done)
        obs = env.reset() if done else next_obs
    if len(buf) and not buf.dones[-1]:
        buf.last_value = model.act(obs)[1]
    return buf


def gae(rewards, values, dones, last_value: float, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalised advantage estimates and returns; terminal steps cut the bootstrap."""
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in reversed(range(n)):
        nonterminal = 0.0 if dones[t] else 1.0
        next_v = last_value if t == n - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + np.asarray(values, dtype=np.float64)


def compute_advantages(buffer: RolloutBuffer, cfg: PpoConfig) -> RolloutBuffer:
    buffer.advantages, buffer.returns = gae(
        buffer.rewards, buffer.values, buffer.dones, buffer.last_value, cfg.gamma, cfg.gae_lambda
    )
    return buffer


def normalize(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / max(float(adv.std()), 1e-8)


def clipped_surrogate(ratio, adv, eps: float) -> np.ndarray:
    """Per-sample ``min(r * A, clip(r, 1 - eps, 1 + eps) * A)``."""
    ratio, adv = np.asarray(ratio, dtype=np.float64), np.asarray(adv, dtype=np.float64)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def surrogate(ratio, adv, eps: float) -> Tensor:
    """Tape version of :func:`clipped_surrogate`."""
    return minimum(mul(ratio, adv), mul(clip(ratio, 1.0 - eps, 1.0 + eps), adv))


@dataclass
class LossParts:
    total: Tensor
    policy: float
    value: float
    entropy: float
    ratios: np.ndarray


def ppo_loss(model: ActorCritic, batch: dict[str, np.ndarray], cfg: PpoConfig) -> LossParts:
    """``-L_clip + c_v * MSE(V, returns) - c_e * entropy`` averaged over the batch."""
    logits, values = model(batch["frames"], batch["goals"])
    logp_all = log_softmax(logits)
    ratio = exp(sub(pick(logp_all, batch["actions"]), batch["log_probs"]))
    policy_loss = mul(mean(surrogate(ratio, batch["advantages"], cfg.clip_epsilon)), -1.0)
    value_loss = mean(square(sub(values, batch["returns"])))
    entropy = mul(mean(tsum(mul(exp(logp_all), logp_all), axis=1)), -1.0)
    total = add(add(policy_loss, mul(value_loss, cfg.value_loss_coeff)), mul(entropy, -cfg.entropy_coeff))
    return LossParts(total, policy_loss.item(), value_loss.item(), entropy.item(), ratio.data.copy())


@dataclass(frozen=True)
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    mean_ratio: float
    clip_fraction: float
    first_ratios: tuple[float, ...]
    minibatches: int


def ppo_update(
    model: ActorCritic, buffer: RolloutBuffer, cfg: PpoConfig, opt: AdamState, rng: np.random.Generator
) -> UpdateStats:
    """Clipped-surrogate epochs over shuffled minibatches, one Adam step per minibatch.

    A non-finite loss restores the parameters and optimiser state held before
    the call, then raises :class:`NumericError`.
    """
    if buffer.advantages is None:
        raise ContractError("compute_advantages must run before ppo_update")
    n = len(buffer)
    if n == 0:
        raise ContractError("cannot update on an empty buffer")
    data = buffer.arrays()
    data["advantages"] = normalize(buffer.advantages) if cfg.normalize_advantages else buffer.advantages
    data["returns"] = buffer.returns
    params = model.parameters()
    saved, saved_opt = model.state_dict(), opt.copy()
    eps = cfg.clip_epsilon
    pol, val, ent, ratios_seen, clipped, count = 0.0, 0.0, 0.0, 0.0, 0, 0
    first: tuple[float, ...] = ()
    orders = [rng.permutation(n) for _ in range(cfg.epochs_per_update)]
    if cfg.ratio_reference == "behavior":
        data["log_probs"] = data["behavior_log_probs"]
    else:
        # Re-evaluate the old log-probs with the exact minibatch layout of the
        # first epoch so that batched float rounding cannot perturb r = 1.
        with no_recording():
            for lo in range(0, n, cfg.minibatch_size):
                idx = orders[0][lo : lo + cfg.minibatch_size]
                logits, _ = model(data["frames"][idx], data["goals"][idx])
                data["log_probs"][idx] = log_softmax_np(logits.data)[np.arange(len(idx)), data["actions"][idx]]
    try:
        for order in orders:
            for lo in range(0, n, cfg.minibatch_size):
                idx = order[lo : lo + cfg.minibatch_size]
                batch = {k: v[idx] for k, v in data.items()}
                with recording():
                    parts = ppo_loss(model, batch, cfg)
                    if not np.isfinite(parts.total.item()):
                        raise NumericError("PPO loss is not finite")
                    backward(parts.total)
                if not first:
                    first = tuple(parts.ratios.tolist())
                adam_step(params, opt)
                pol += parts.policy
                val += parts.value
                ent += parts.entropy
                ratios_seen += float(parts.ratios.mean())
                clipped += int((np.abs(parts.ratios - 1.0) > eps).sum())
                count += 1
    except NumericError:
        model.load_state_dict(saved)
        opt.__dict__.update(saved_opt.__dict__)
        for p in params:
            p.zero_grad()
        raise
    return UpdateStats(pol / count, val / count, ent / count, ratios_seen / count,
                       clipped / (n * cfg.epochs_per_update), first, count)
