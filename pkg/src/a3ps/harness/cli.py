"""Command line front end.

    a3ps oracle solve [--reward dense|sparse]
    a3ps corpus build --n 1935 --seed 0 --out corpus.jsonl
    a3ps corpus inspect corpus.jsonl
    a3ps ada train --corpus corpus.jsonl --out ada.a3ck
    a3ps ada eval --corpus corpus.jsonl --ckpt ada.a3ck
    a3ps run --mode a3ps --reward sparse --episodes 2000 --seed 0 1 2 --ada ada.a3ck --out runs
    a3ps compare runs/a3ps_dense runs/eda_dense

Outputs default to ``$A3PS_OUT`` (or ``./a3ps_out``).  Flags given on the
command line take precedence over values from ``--config``, which in turn take
precedence over built-in defaults.
"""
from __future__ import annotations

import argparse
import collections
import os
import sys
from dataclasses import replace
from pathlib import Path

from a3ps import ada as ada_mod
from a3ps.advice import build_corpus, build_vocab, load_corpus, save_corpus, split_sizes
from a3ps.env import Action, EnvConfig, RewardConfig, greedy_rollout, initial_state, oracle_policy
from a3ps.errors import A3psError
from a3ps.harness.configfile import load_experiment
from a3ps.harness.experiment import ExperimentConfig, greedy_episode, run_experiment
from a3ps.harness.logs import compare_runs, emit_plotdata, read_csv, smooth_curve

ENV_OUT = "A3PS_OUT"


def default_out() -> Path:
    return Path(os.environ.get(ENV_OUT, "a3ps_out"))


def _reward_cfg(name: str) -> RewardConfig:
    return RewardConfig.sparse() if name == "sparse" else RewardConfig.dense()


def cmd_oracle_solve(args) -> int:
    cfg = EnvConfig()
    oracle = oracle_policy(cfg, _reward_cfg(args.reward), gamma=args.gamma)
    outcomes = greedy_rollout(oracle)
    total = sum(o.reward for o in outcomes)
    end = outcomes[-1].next_state.terminal if outcomes else None
    counts = collections.Counter(Action(int(a)).name for a in oracle.actions)
    print(f"reachable states: {len(oracle)}")
    print(f"sweeps: {oracle.sweeps}")
    print(f"start value: {oracle.value(initial_state(cfg))!r}")
    print("greedy action counts: " + ", ".join(f"{k}={counts[k]}" for k in sorted(counts)))
    print(f"greedy rollout: {len(outcomes)} steps, return {total!r}, ends in {end}")
    return 0


def cmd_corpus_build(args) -> int:
    cfg = EnvConfig()
    oracle = oracle_policy(cfg, RewardConfig.dense())
    records = build_corpus(cfg, oracle, args.n, args.seed)
    out = Path(args.out) if args.out else default_out() / "corpus.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(out, records, cfg)
    n_train, n_tune = split_sizes(args.n)
    print(f"wrote {len(records)} records ({n_train} train / {n_tune} tune) to {out}")
    return 0


def cmd_corpus_inspect(args) -> int:
    cfg, records = load_corpus(args.path)
    splits = collections.Counter(r.split for r in records)
    actions = collections.Counter(r.action.name for r in records)
    print(f"records: {len(records)} (train {splits['train']}, tune {splits['tune']})")
    print(f"grid: {cfg.rows} rows x {cfg.cols} cols, {len(cfg.lanes)} lanes")
    print("labels: " + ", ".join(f"{a.name}={actions[a.name]}" for a in Action))
    print(f"vocabulary: {len(build_vocab(records))} entries")
    for rec in records[: args.show]:
        print(f"  {rec.state.agent} {rec.action.name:<5} {rec.advice}")
    return 0


def cmd_ada_train(args) -> int:
    cfg, records = load_corpus(args.corpus)
    tcfg = ada_mod.AdaTrainConfig(learning_rate=args.lr, epochs=args.epochs, patience=args.patience, seed=args.seed)
    model, vocab, history = ada_mod.fit(cfg, records, tcfg, seed=args.seed)
    for h in history:
        print(f"epoch {h.epoch:3d}  train loss {h.train_loss:.4f} acc {h.train_accuracy:.3f}  "
              f"tune loss {h.tune_loss:.4f} acc {h.tune_accuracy:.3f}")
    out = Path(args.out) if args.out else default_out() / "ada.a3ck"
    out.parent.mkdir(parents=True, exist_ok=True)
    ada_mod.save_ada(out, model, vocab)
    print(f"saved {out}")
    return 0


def cmd_ada_eval(args) -> int:
    cfg, records = load_corpus(args.corpus)
    model, vocab = ada_mod.load_ada(args.ckpt)
    subset = [r for r in records if args.split == "all" or r.split == args.split]
    report = ada_mod.evaluate(model, vocab, cfg, subset)
    print(f"{args.split}: accuracy {report.accuracy:.4f} over {report.count} records")
    print("confusion (rows = label, cols = predicted; " + " ".join(a.name for a in Action) + ")")
    for a, row in zip(Action, report.confusion):
        print(f"  {a.name:<5} " + " ".join(f"{int(v):5d}" for v in row))
    return 0


def build_run_config(args) -> ExperimentConfig:
    base = ExperimentConfig(out_dir=str(default_out()))
    cfg = load_experiment(args.config, base) if args.config else base
    over = {
        "mode": args.mode,
        "reward": args.reward,
        "episodes": args.episodes,
        "seeds": tuple(args.seed) if args.seed else None,
        "ada_path": args.ada,
        "out_dir": args.out,
        "smoothing": args.window,
    }
    cfg = replace(cfg, **{k: v for k, v in over.items() if v is not None})
    if args.lr is not None:
        cfg = replace(cfg, ppo=replace(cfg.ppo, learning_rate=args.lr))
    if args.alpha_interval is not None:
        cfg = replace(cfg, alpha=replace(cfg.alpha, decay_interval=args.alpha_interval))
    return cfg.validate()


def cmd_run(args) -> int:
    cfg = build_run_config(args)
    results = run_experiment(cfg, resume=not args.fresh)
    for seed, res in results.items():
        goals = sum(log.reached_goal for log in res.logs)
        print(f"{cfg.run_name} seed {seed}: {len(res.logs)} episodes, {goals} reached the goal "
              f"-> {cfg.seed_dir(seed) / 'episodes.csv'}")
        reached, total, path = greedy_episode(res.model, cfg.env, cfg.reward_cfg, seed)
        print(f"  greedy EDA rollout (alpha 0): {len(path) - 1} steps, return {total!r}, "
              f"{'reached' if reached else 'did not reach'} the goal")
    return 0


def _load_run_dir(d: Path) -> dict[int, list]:
    runs = {}
    for sub in sorted(d.glob("seed_*")):
        csv_path = sub / "episodes.csv"
        if csv_path.exists():
            runs[int(sub.name.split("_", 1)[1])] = read_csv(csv_path)
    if not runs:
        raise FileNotFoundError(f"no seed_*/episodes.csv under {d}")
    return runs


def cmd_compare(args) -> int:
    a, b = _load_run_dir(Path(args.a3ps_dir)), _load_run_dir(Path(args.eda_dir))
    report = compare_runs(a, b, args.window, args.final)
    sys.stdout.write(report.text())
    if args.plotdata:
        cols = {}
        for name, runs in (("a3ps", a), ("eda", b)):
            for seed, logs in runs.items():
                cols[f"{name}_seed{seed}"] = list(smooth_curve([x.reward for x in logs], args.window))
        emit_plotdata(args.plotdata, cols)
        print(f"plot data -> {args.plotdata}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="a3ps", description="Advice-shaped PPO on a grid crossing game.")
    sub = p.add_subparsers(dest="command", required=True)

    oracle = sub.add_parser("oracle", help="value-iteration planner").add_subparsers(dest="action", required=True)
    solve = oracle.add_parser("solve", help="solve the default grid and summarise the plan")
    solve.add_argument("--reward", choices=("dense", "sparse"), default="dense")
    solve.add_argument("--gamma", type=float, default=0.99)
    solve.set_defaults(func=cmd_oracle_solve)

    corpus = sub.add_parser("corpus", help="advice corpus tools").add_subparsers(dest="action", required=True)
    build = corpus.add_parser("build", help="sample states and write template advice")
    build.add_argument("--n", type=int, default=1935)
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--out")
    build.set_defaults(func=cmd_corpus_build)
    inspect = corpus.add_parser("inspect", help="summarise a corpus file")
    inspect.add_argument("path")
    inspect.add_argument("--show", type=int, default=5)
    inspect.set_defaults(func=cmd_corpus_inspect)

    ada_p = sub.add_parser("ada", help="advice driven agent").add_subparsers(dest="action", required=True)
    train = ada_p.add_parser("train", help="supervised pretraining on a corpus")
    train.add_argument("--corpus", required=True)
    train.add_argument("--out")
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--epochs", type=int, default=30)
    train.add_argument("--patience", type=int, default=8)
    train.add_argument("--seed", type=int, default=0)
    train.set_defaults(func=cmd_ada_train)
    ev = ada_p.add_parser("eval", help="accuracy and confusion matrix")
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--split", choices=("train", "tune", "all"), default="tune")
    ev.set_defaults(func=cmd_ada_eval)

    run = sub.add_parser("run", help="train EDA-only or A3PS agents")
    run.add_argument("--config", help="INI experiment file")
    run.add_argument("--mode", choices=("eda", "a3ps"))
    run.add_argument("--reward", choices=("dense", "sparse"))
    run.add_argument("--episodes", type=int)
    run.add_argument("--seed", type=int, nargs="+")
    run.add_argument("--ada", help="ADA checkpoint (a3ps mode)")
    run.add_argument("--out")
    run.add_argument("--window", type=int)
    run.add_argument("--lr", type=float)
    run.add_argument("--alpha-interval", type=int)
    run.add_argument("--fresh", action="store_true", help="ignore existing checkpoints")
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="compare an A3PS run directory against an EDA-only one")
    cmp.add_argument("a3ps_dir")
    cmp.add_argument("eda_dir")
    cmp.add_argument("--window", type=int, default=100)
    cmp.add_argument("--final", type=int, default=500)
    cmp.add_argument("--plotdata")
    cmp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (A3psError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
