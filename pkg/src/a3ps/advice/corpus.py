"""Advice records, corpus sampling and the line-delimited corpus file.

File layout (UTF-8, one JSON object per line)::

    {"format": "a3ps-advice-corpus", "version": 1, "env": {...}, "count": N}
    {"action": "UP", "advice": "...", "split": "train", "state": {...}}
    ...

The header carries the environment geometry needed to rebuild each record's
feature grid.  Externally written advice (e.g. from human annotators) can use
the same layout.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from a3ps.advice.rules import DEFAULT_RULES, advise
from a3ps.advice.text import preprocess
from a3ps.env.config import EnvConfig
from a3ps.env.core import Action, GridState, frame_features, state_from_dict, state_to_dict
from a3ps.env.oracle import OraclePolicy, state_key
from a3ps.errors import CapacityError, ParseError

FORMAT = "a3ps-advice-corpus"
VERSION = 1
TRAIN_FRACTION = 0.9


@dataclass(frozen=True)
class AdviceRecord:
    state: GridState
    action: Action
    advice: str
    tokens: tuple[str, ...] = field(default=())
    split: str = "train"

    def __post_init__(self) -> None:
        object.__setattr__(self, "action", Action(self.action))
        object.__setattr__(self, "tokens", tuple(preprocess(self.advice)))
        if self.split not in ("train", "tune"):
            raise ValueError(f"split must be 'train' or 'tune' (got {self.split!r})")

    @property
    def agent(self) -> tuple[int, int]:
        return self.state.agent

    def features(self, config: EnvConfig) -> np.ndarray:
        return frame_features(config, self.state).reshape(-1)


def generate_advice(state: GridState, oracle: OraclePolicy, rules=DEFAULT_RULES, split: str = "train") -> AdviceRecord:
    """Advice for ``state`` whose label is the oracle's greedy action."""
    action = oracle.action(state)
    text, _ = advise(oracle.config, state, action, rules)
    return AdviceRecord(state, action, text, split=split)


def split_sizes(n: int) -> tuple[int, int]:
    n_train = int(n * TRAIN_FRACTION)
    return n_train, n - n_train


def build_corpus(config: EnvConfig, oracle: OraclePolicy, n: int, seed: int, rules=DEFAULT_RULES) -> list[AdviceRecord]:
    """Sample ``n`` distinct reachable states uniformly and advise on each.

    The first 90% of the sample (rounded down) is marked ``train``, the rest ``tune``.
    """
    pool = oracle.states
    if n > len(pool):
        raise CapacityError(f"asked for {n} records but only {len(pool)} distinct reachable states exist")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=n, replace=False)
    n_train, _ = split_sizes(n)
    return [
        generate_advice(pool[i], oracle, rules, "train" if k < n_train else "tune")
        for k, i in enumerate(picks)
    ]


def record_to_json(rec: AdviceRecord) -> str:
    obj = {"state": state_to_dict(rec.state), "action": rec.action.name, "advice": rec.advice, "split": rec.split}
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_corpus(path: str | os.PathLike, records, config: EnvConfig) -> None:
    header = {"format": FORMAT, "version": VERSION, "env": config.to_dict(), "count": len(records)}
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines += [record_to_json(r) for r in records]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_corpus(path: str | os.PathLike) -> tuple[EnvConfig, list[AdviceRecord]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty corpus file", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header: {exc.msg}", 1) from None
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise ParseError("not an advice corpus header", 1)
    if header.get("version") != VERSION:
        raise ParseError(f"unsupported corpus version {header.get('version')}", 1)
    config = EnvConfig.from_dict(header["env"])
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rec = AdviceRecord(state_from_dict(obj["state"]), Action[obj["action"]], obj["advice"], split=obj.get("split", "train"))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed record ({exc.__class__.__name__}: {exc})", lineno) from None
        records.append(rec)
    if "count" in header and header["count"] != len(records):
        raise ParseError(f"header promises {header['count']} records, found {len(records)}", 1)
    return config, records


def dedup_keys(config: EnvConfig, records) -> set:
    return {state_key(config, r.state) for r in records}
