"""Advice driven agent: a supervised (state, advice text) -> action score classifier.

The state branch is an affine+ReLU encoder over one feature frame.  The text
branch embeds tokens and runs a masked GRU; the two vectors are concatenated
and decoded by a small fusion stack into five action scores.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from a3ps.advice.rules import DEFAULT_RULES, advise
from a3ps.advice.text import Vocabulary, build_vocab, preprocess
from a3ps.env.config import EnvConfig
from a3ps.env.core import Action, GridState, frame_features, frame_size
from a3ps.env.oracle import OraclePolicy, state_key
from a3ps.errors import ConfigError, ContractError, ParseError, ShapeError
from a3ps.nncore import (
    GRU,
    AdamState,
    Embedding,
    Linear,
    Module,
    adam_step,
    add,
    backward,
    concat,
    cross_entropy,
    load_tensors,
    log_softmax,
    mean,
    mul,
    no_recording,
    recording,
    recur,
    relu,
    save_tensors,
)

N_ACTIONS = len(Action)


@dataclass(frozen=True)
class AdaShape:
    vocab_size: int
    feature_dim: int
    state_dim: int = 64
    embed_dim: int = 32
    hidden: int = 64
    fusion_dim: int = 64


class AdaModel(Module):
    def __init__(self, shape: AdaShape, rng: np.random.Generator, zero_head: bool = False):
        self.shape = shape
        self.state_enc = Linear(shape.feature_dim, shape.state_dim, rng)
        self.embedding = Embedding(shape.vocab_size, shape.embed_dim, rng)
        self.text_rnn = GRU(shape.embed_dim, shape.hidden, rng)
        self.fuse = Linear(shape.state_dim + shape.hidden, shape.fusion_dim, rng)
        self.head = Linear(shape.fusion_dim, N_ACTIONS, rng, zero=zero_head)

    def __call__(self, features: np.ndarray, token_ids: np.ndarray, mask: np.ndarray):
        """Batched forward: features (B, F); token_ids and mask are time-major (T, B)."""
        if features.ndim != 2 or features.shape[1] != self.shape.feature_dim:
            raise ShapeError(f"features must be (batch, {self.shape.feature_dim}), got {features.shape}")
        if token_ids.shape != mask.shape or token_ids.ndim != 2 or token_ids.shape[1] != features.shape[0]:
            raise ShapeError(f"token ids {token_ids.shape} / mask {mask.shape} do not match batch {features.shape[0]}")
        s = relu(self.state_enc(features))
        h = recur(self.text_rnn, [self.embedding(token_ids[t]) for t in range(token_ids.shape[0])], mask)
        return self.head(relu(self.fuse(concat([s, h], axis=1))))


def encode_tokens(vocab: Vocabulary, token_lists) -> tuple[np.ndarray, np.ndarray]:
    """Pad token lists into time-major (T, B) index and mask arrays.

    An empty list becomes a single unmasked PAD step so every row has input.
    """
    encoded = [vocab.encode(toks) or [0] for toks in token_lists]
    T = max((len(e) for e in encoded), default=1)
    ids = np.zeros((T, len(encoded)), dtype=np.int64)
    mask = np.zeros((T, len(encoded)))
    for b, e in enumerate(encoded):
        ids[: len(e), b] = e
        mask[: len(e), b] = 1.0
    return ids, mask


def action_scores_batch(model: AdaModel, vocab: Vocabulary, features: np.ndarray, token_lists) -> np.ndarray:
    ids, mask = encode_tokens(vocab, token_lists)
    with no_recording():
        return model(np.asarray(features, dtype=np.float64), ids, mask).data


def action_scores(model: AdaModel, vocab: Vocabulary, features: np.ndarray, tokens) -> np.ndarray:
    """Raw scores ``A_adv`` for one state/advice pair."""
    features = np.asarray(features, dtype=np.float64).reshape(1, -1)
    return action_scores_batch(model, vocab, features, [list(tokens)])[0]


@dataclass
class AdaTrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    patience: int = 8
    seed: int = 0
    # Mass spread uniformly over all actions in the target; bounds the score
    # margin so that the blended policy keeps some exploration.
    label_smoothing: float = 0.1

    def __post_init__(self) -> None:
        for name in ("learning_rate", "epochs", "batch_size", "patience"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive (got {getattr(self, name)})")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"label_smoothing must lie in [0, 1) (got {self.label_smoothing})")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    tune_loss: float
    tune_accuracy: float


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows: label, cols: predicted
    count: int
    loss: float = float("nan")

    def per_action_counts(self) -> np.ndarray:
        return self.confusion.sum(axis=1)


@dataclass
class _Batch:
    features: np.ndarray
    tokens: list
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


def _tensorise(config: EnvConfig, records) -> _Batch:
    recs = list(records)
    feats = np.array([frame_features(config, r.state).reshape(-1) for r in recs]).reshape(len(recs), frame_size(config))
    return _Batch(feats, [list(r.tokens) for r in recs], np.array([int(r.action) for r in recs], dtype=np.int64))


def smoothed_cross_entropy(scores, labels, smoothing: float = 0.0):
    """Cross-entropy against (1 - smoothing) * one-hot + smoothing * uniform."""
    nll = cross_entropy(scores, labels)
    if smoothing == 0.0:
        return nll
    spread = mul(mean(log_softmax(scores)), -1.0)
    return add(mul(nll, 1.0 - smoothing), mul(spread, smoothing))


def _evaluate_batch(
    model: AdaModel, vocab: Vocabulary, data: _Batch, chunk: int = 512, smoothing: float = 0.0
) -> EvalReport:
    confusion = np.zeros((N_ACTIONS, N_ACTIONS), dtype=np.int64)
    total_loss = 0.0
    for lo in range(0, len(data), chunk):
        hi = min(lo + chunk, len(data))
        scores = action_scores_batch(model, vocab, data.features[lo:hi], data.tokens[lo:hi])
        z = scores - scores.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        labels = data.labels[lo:hi]
        total_loss -= (1.0 - smoothing) * logp[np.arange(hi - lo), labels].sum() + smoothing * logp.mean(axis=1).sum()
        np.add.at(confusion, (labels, scores.argmax(axis=1)), 1)
    n = len(data)
    acc = float(np.trace(confusion) / n) if n else float("nan")
    return EvalReport(acc, confusion, n, float(total_loss / n) if n else float("nan"))


def evaluate(model: AdaModel, vocab: Vocabulary, config: EnvConfig, records) -> EvalReport:
    """Accuracy of argmax score against the label, with a label x prediction confusion matrix."""
    return _evaluate_batch(model, vocab, _tensorise(config, records))


def new_model(vocab: Vocabulary, config: EnvConfig, seed: int = 0, zero_head: bool = False) -> AdaModel:
    return AdaModel(AdaShape(len(vocab), frame_size(config)), np.random.default_rng(seed), zero_head)


def train_supervised(model: AdaModel, vocab: Vocabulary, config: EnvConfig, records, cfg: AdaTrainConfig | None = None):
    """Minimise label-smoothed cross-entropy on the train split; keep the parameters with the lowest tune loss.

    Returns the per-epoch metric history.  Without tune records, selection
    falls back to train loss.
    """
    cfg = cfg or AdaTrainConfig()
    records = list(records)
    train = _tensorise(config, [r for r in records if r.split == "train"])
    tune = _tensorise(config, [r for r in records if r.split == "tune"])
    if len(train) == 0:
        raise ContractError("training split is empty")
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    opt = AdamState.for_params(params, cfg.learning_rate)
    best, best_loss, stale = model.state_dict(), np.inf, 0
    history: list[EpochMetrics] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train))
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            ids, mask = encode_tokens(vocab, [train.tokens[i] for i in idx])
            with recording():
                loss = smoothed_cross_entropy(model(train.features[idx], ids, mask), train.labels[idx], cfg.label_smoothing)
                backward(loss)
            adam_step(params, opt)
        tr = _evaluate_batch(model, vocab, train, smoothing=cfg.label_smoothing)
        tu = _evaluate_batch(model, vocab, tune, smoothing=cfg.label_smoothing) if len(tune) else tr
        history.append(EpochMetrics(epoch, float(tr.loss), tr.accuracy, float(tu.loss), tu.accuracy))
        if tu.loss < best_loss - 1e-12:
            best, best_loss, stale = model.state_dict(), tu.loss, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state_dict(best)
    return history


def fit(config: EnvConfig, records, cfg: AdaTrainConfig | None = None, seed: int = 0):
    """Build the vocabulary and a fresh model, then train.  Returns (model, vocab, history)."""
    records = list(records)
    vocab = build_vocab(records)
    model = new_model(vocab, config, seed)
    history = train_supervised(model, vocab, config, records, cfg)
    return model, vocab, history


def save_ada(path: str | os.PathLike, model: AdaModel, vocab: Vocabulary) -> None:
    """Weights go to ``path`` (binary tensor file); shape and vocabulary to ``path.json``."""
    save_tensors(path, model.state_dict())
    meta = {"format": "a3ps-ada", "version": 1, "shape": asdict(model.shape), "vocab": vocab.tokens}
    tmp = f"{os.fspath(path)}.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, f"{os.fspath(path)}.json")


def load_ada(path: str | os.PathLike) -> tuple[AdaModel, Vocabulary]:
    meta_path = f"{os.fspath(path)}.json"
    if not os.path.exists(path) or not os.path.exists(meta_path):
        raise FileNotFoundError(f"ADA checkpoint {path} (or its .json sidecar) not found")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != "a3ps-ada" or meta.get("version") != 1:
        raise ParseError("not an ADA checkpoint sidecar", 1)
    tokens = meta["vocab"]
    vocab = Vocabulary(tokens[2:], frozen=True)
    model = AdaModel(AdaShape(**meta["shape"]), np.random.default_rng(0))
    model.load_state_dict(load_tensors(path))
    return model, vocab


@dataclass
class AdvisedScorer:
    """Advice generator + frozen ADA: maps a live state to ``A_adv``.

    Both stages are deterministic functions of the canonical state, so the
    scores are memoised per state key.
    """

    model: AdaModel
    vocab: Vocabulary
    oracle: OraclePolicy
    rules: tuple = DEFAULT_RULES
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def config(self) -> EnvConfig:
        return self.oracle.config

    def advice(self, state: GridState) -> str:
        return advise(self.config, state, self.oracle.action(state), self.rules)[0]

    def __call__(self, state: GridState) -> np.ndarray:
        key = state_key(self.config, state)
        hit = self._cache.get(key)
        if hit is None:
            feats = frame_features(self.config, state).reshape(-1)
            hit = action_scores(self.model, self.vocab, feats, preprocess(self.advice(state)))
            hit.setflags(write=False)
            self._cache[key] = hit
        return hit
