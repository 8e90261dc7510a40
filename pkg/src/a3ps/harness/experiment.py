"""Experiment runner: EDA-only or blended A3PS training, with resumable checkpoints."""
from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from a3ps import ada as ada_mod
from a3ps import eda
from a3ps.blend import AlphaSchedule, alpha_at, blend
from a3ps.env import EnvConfig, EventKind, FroggerEnv, RewardConfig, frame_size, oracle_policy
from a3ps.errors import ConfigError, ParseError
from a3ps.harness.logs import EpisodeLog, emit_csv
from a3ps.nncore import AdamState, load_tensors, save_tensors, softmax_np

MODES = ("eda", "a3ps")
REWARDS = ("dense", "sparse")

# Desk defaults.  The alpha schedule is the full-length one, so alpha stays at
# 0.6 for a 2000-episode run.  Actions come from the blend, so the PPO ratio is
# taken against the acting distribution; the faster learning rate makes up for
# the short run.
DESK_ALPHA = AlphaSchedule()
DESK_PPO = eda.PpoConfig(learning_rate=1e-3, ratio_reference="behavior")


@dataclass
class ExperimentConfig:
    mode: str = "eda"
    reward: str = "dense"
    episodes: int = 2000
    seeds: tuple[int, ...] = (0, 1, 2)
    env: EnvConfig = field(default_factory=EnvConfig)
    alpha: AlphaSchedule = DESK_ALPHA
    ppo: eda.PpoConfig = DESK_PPO
    ada_path: str | None = None
    out_dir: str = "runs"
    smoothing: int = 100
    checkpoint_every: int = 20  # PPO updates between checkpoints
    shared_encoder: bool = False  # actor and critic share one frame encoder + GRU

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES} (got {self.mode!r})")
        if self.reward not in REWARDS:
            raise ConfigError(f"reward must be one of {REWARDS} (got {self.reward!r})")
        if self.episodes <= 0:
            raise ConfigError(f"episodes must be > 0 (got {self.episodes})")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.mode == "a3ps" and not self.ada_path:
            raise ConfigError("a3ps mode requires an ADA checkpoint path")
        if self.smoothing < 1 or self.checkpoint_every < 1:
            raise ConfigError("smoothing and checkpoint_every must be >= 1")
        self.env.validate()
        return self

    @property
    def reward_cfg(self) -> RewardConfig:
        return RewardConfig.sparse() if self.reward == "sparse" else RewardConfig.dense()

    @property
    def run_name(self) -> str:
        return f"{self.mode}_{self.reward}"

    def seed_dir(self, seed: int) -> Path:
        return Path(self.out_dir) / self.run_name / f"seed_{seed}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env"] = self.env.to_dict()
        d["seeds"] = list(self.seeds)
        return d


def load_scorer(cfg: ExperimentConfig) -> ada_mod.AdvisedScorer:
    """Frozen ADA plus the advice generator; advice labels always come from the dense-reward planner."""
    if not cfg.ada_path or not os.path.exists(cfg.ada_path):
        raise FileNotFoundError(f"ADA checkpoint not found: {cfg.ada_path}")
    model, vocab = ada_mod.load_ada(cfg.ada_path)
    return ada_mod.AdvisedScorer(model, vocab, oracle_policy(cfg.env, RewardConfig.dense()))


@dataclass
class SeedResult:
    seed: int
    logs: list[EpisodeLog]
    model: eda.ActorCritic
    completed: bool


class _Progress:
    """Per-episode bookkeeping driven by the rollout's step callback."""

    def __init__(self, cfg: ExperimentConfig, logs: list[EpisodeLog], reward: float = 0.0, steps: int = 0):
        self.cfg, self.logs = cfg, logs
        self.reward, self.steps = reward, steps
        self.t0 = time.perf_counter()

    @property
    def episode(self) -> int:
        return len(self.logs)

    def alpha(self) -> float:
        return alpha_at(self.cfg.alpha, self.episode) if self.cfg.mode == "a3ps" else 0.0

    def done(self) -> bool:
        return self.episode >= self.cfg.episodes

    def on_step(self, outcome, reward: float, done: bool) -> None:
        self.reward += reward
        self.steps += 1
        if done:
            now = time.perf_counter()
            self.logs.append(EpisodeLog(
                self.episode, self.reward, self.steps, outcome.has(EventKind.REACHED_GOAL), self.alpha(), (now - self.t0) * 1e3
            ))
            self.t0 = now
            self.reward, self.steps = 0.0, 0


def _save_checkpoint(d: Path, model, opt: AdamState, rng, env: FroggerEnv, prog: _Progress, updates: int) -> None:
    d.mkdir(parents=True, exist_ok=True)
    tensors = {f"model.{k}": v for k, v in model.state_dict().items()}
    tensors.update({f"opt.m.{i}": a for i, a in enumerate(opt.m)})
    tensors.update({f"opt.v.{i}": a for i, a in enumerate(opt.v)})
    save_tensors(d / "checkpoint.a3ck", tensors)
    meta = {
        "format": "a3ps-run-checkpoint",
        "version": 1,
        "updates": updates,
        "opt_step": opt.step,
        "rng": rng.bit_generator.state,
        "env": env.snapshot(),
        "partial": {"reward": prog.reward, "steps": prog.steps},
        "logs": [asdict(log) for log in prog.logs],
    }
    tmp = d / "checkpoint.json.tmp"
    tmp.write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, d / "checkpoint.json")


def _load_checkpoint(d: Path, model, opt: AdamState, rng, env: FroggerEnv):
    meta = json.loads((d / "checkpoint.json").read_text(encoding="utf-8"))
    if meta.get("format") != "a3ps-run-checkpoint" or meta.get("version") != 1:
        raise ParseError("not a run checkpoint", 1)
    tensors = load_tensors(d / "checkpoint.a3ck")
    model.load_state_dict({k[6:]: v for k, v in tensors.items() if k.startswith("model.")})
    opt.m = [tensors[f"opt.m.{i}"] for i in range(len(opt.m))]
    opt.v = [tensors[f"opt.v.{i}"] for i in range(len(opt.v))]
    opt.step = meta["opt_step"]
    rng.bit_generator.state = meta["rng"]
    env.restore(meta["env"])
    logs = [EpisodeLog(**row) for row in meta["logs"]]
    return logs, meta["partial"], meta["updates"]


def run_seed(
    cfg: ExperimentConfig,
    seed: int,
    scorer: ada_mod.AdvisedScorer | None = None,
    resume: bool = True,
    stop_after_updates: int | None = None,
) -> SeedResult:
    """Train one seed.  ``stop_after_updates`` simulates an interruption (checkpoint, then return)."""
    cfg.validate()
    out = cfg.seed_dir(seed)
    env = FroggerEnv(cfg.env, cfg.reward_cfg, seed=seed)
    model = eda.new_model(frame_size(cfg.env), cfg.env.rows, seed=seed, shared=cfg.shared_encoder)
    opt = AdamState.for_params(model.parameters(), cfg.ppo.learning_rate)
    rng = np.random.default_rng(seed)
    logs: list[EpisodeLog] = []
    partial = {"reward": 0.0, "steps": 0}
    updates = 0
    if resume and (out / "checkpoint.json").exists():
        logs, partial, updates = _load_checkpoint(out, model, opt, rng, env)
    prog = _Progress(cfg, logs, partial["reward"], partial["steps"])
    if cfg.mode == "a3ps" and scorer is None:
        scorer = load_scorer(cfg)

    def behavior(env_: FroggerEnv, logits: np.ndarray) -> np.ndarray:
        a = prog.alpha()
        if a == 0.0:
            return softmax_np(logits)
        return blend(scorer(env_.state), logits, a)

    acting = behavior if cfg.mode == "a3ps" else None
    while not prog.done():
        buf = eda.collect_rollout(env, model, cfg.ppo.rollout_length, rng, acting, prog.on_step, prog.done)
        if len(buf):
            eda.compute_advantages(buf, cfg.ppo)
            eda.ppo_update(model, buf, cfg.ppo, opt, rng)
            updates += 1
        if prog.done():
            break
        if updates % cfg.checkpoint_every == 0:
            _save_checkpoint(out, model, opt, rng, env, prog, updates)
            emit_csv(out / "episodes.csv", prog.logs, cfg.smoothing)
        if stop_after_updates is not None and updates >= stop_after_updates:
            _save_checkpoint(out, model, opt, rng, env, prog, updates)
            return SeedResult(seed, prog.logs, model, False)
    out.mkdir(parents=True, exist_ok=True)
    _save_checkpoint(out, model, opt, rng, env, prog, updates)
    save_tensors(out / "eda.a3ck", model.state_dict())
    emit_csv(out / "episodes.csv", prog.logs, cfg.smoothing)
    return SeedResult(seed, prog.logs, model, True)


def run_experiment(cfg: ExperimentConfig, resume: bool = True) -> dict[int, SeedResult]:
    cfg.validate()
    scorer = load_scorer(cfg) if cfg.mode == "a3ps" else None
    root = Path(cfg.out_dir) / cfg.run_name
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return {s: run_seed(cfg, s, scorer, resume) for s in cfg.seeds}


def greedy_episode(model: eda.ActorCritic, env_cfg: EnvConfig, reward_cfg: RewardConfig, seed: int = 0):
    """One argmax rollout of the EDA policy alone (alpha forced to zero)."""
    env = FroggerEnv(env_cfg, reward_cfg, seed=seed)
    obs = env.reset()
    total, path = 0.0, [env.state.agent]
    while True:
        logits, _ = model.act(obs)
        obs, r, done, outcome = env.step(int(np.argmax(logits)))
        total += r
        path.append(env.state.agent)
        if done:
            return outcome.has(EventKind.REACHED_GOAL), total, path


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
