import numpy as np
import pytest

from a3ps import ada
from a3ps.advice import AdviceRecord, build_corpus, build_vocab, contradictory_advice, preprocess
from a3ps.env import Action, frame_features
from a3ps.errors import ConfigError, ContractError, ShapeError
from a3ps.nncore import checksum, cross_entropy, softmax_np

FAST = ada.AdaTrainConfig(epochs=15, patience=4)


@pytest.fixture(scope="module")
def corpus(default_config, dense_oracle):
    return build_corpus(default_config, dense_oracle, 1935, seed=0)


@pytest.fixture(scope="module")
def trained(default_config, corpus):
    return ada.fit(default_config, corpus, FAST)


def features(config, rec):
    return frame_features(config, rec.state).reshape(-1)


def test_zero_head_gives_uniform(default_config, corpus):
    vocab = build_vocab(corpus)
    m = ada.new_model(vocab, default_config, zero_head=True)
    s = ada.action_scores(m, vocab, features(default_config, corpus[0]), corpus[0].tokens)
    np.testing.assert_array_equal(s, np.zeros(5))
    np.testing.assert_array_equal(softmax_np(s), np.full(5, 0.2))


def test_scores_pure_and_empty_advice_ok(default_config, corpus):
    vocab = build_vocab(corpus)
    m = ada.new_model(vocab, default_config, seed=3)
    f = features(default_config, corpus[1])
    a = ada.action_scores(m, vocab, f, corpus[1].tokens)
    np.testing.assert_array_equal(a, ada.action_scores(m, vocab, f, corpus[1].tokens))
    empty = ada.action_scores(m, vocab, f, [])
    assert empty.shape == (5,) and np.isfinite(empty).all()


def test_encode_tokens_layout():
    from a3ps.advice import Vocabulary

    vocab = Vocabulary(["move", "left"], frozen=True)
    ids, mask = ada.encode_tokens(vocab, [["move", "left", "zzz"], []])
    np.testing.assert_array_equal(ids, [[2, 0], [3, 0], [1, 0]])
    np.testing.assert_array_equal(mask, [[1, 1], [1, 0], [1, 0]])


def test_shape_error(default_config, corpus):
    vocab = build_vocab(corpus)
    m = ada.new_model(vocab, default_config)
    with pytest.raises(ShapeError):
        ada.action_scores(m, vocab, np.zeros(10), ["move"])


def test_empty_train_split_rejected(default_config, corpus):
    tune_only = [AdviceRecord(r.state, r.action, r.advice, split="tune") for r in corpus[:5]]
    vocab = build_vocab(corpus)
    with pytest.raises(ContractError):
        ada.train_supervised(ada.new_model(vocab, default_config), vocab, default_config, tune_only)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        ada.AdaTrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        ada.AdaTrainConfig(label_smoothing=1.0)


def test_smoothed_cross_entropy_matches_explicit_target():
    rng = np.random.default_rng(4)
    scores, labels, eps = rng.normal(size=(6, 5)) * 3, rng.integers(0, 5, 6), 0.1
    target = np.full((6, 5), eps / 5)
    target[np.arange(6), labels] += 1 - eps
    z = scores - scores.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    expected = -(target * logp).sum(axis=1).mean()
    assert abs(ada.smoothed_cross_entropy(scores, labels, eps).item() - expected) < 1e-12
    assert ada.smoothed_cross_entropy(scores, labels, 0.0).item() == cross_entropy(scores, labels).item()


def test_smoothing_bounds_the_score_margin(default_config, corpus, trained):
    model, vocab, _ = trained
    feats = np.array([features(default_config, r) for r in corpus[:300]])
    s = np.sort(ada.action_scores_batch(model, vocab, feats, [r.tokens for r in corpus[:300]]), axis=1)
    # the smoothed optimum puts the winner ln(0.92 / 0.02) above each other action
    assert (s[:, -1] - s[:, -2]).max() < np.log(0.92 / 0.02) + 0.5


def test_overfits_twenty_records(default_config, corpus):
    small = [AdviceRecord(r.state, r.action, r.advice, split="train") for r in corpus[:20]]
    model, vocab, hist = ada.fit(default_config, small, ada.AdaTrainConfig(epochs=500, patience=500, batch_size=20))
    assert len(hist) <= 500
    assert ada.evaluate(model, vocab, default_config, small).accuracy >= 0.95


def balanced_permuted(config, oracle, per_action=120, seed=0):
    rng = np.random.default_rng(seed)
    by_action = {a: [s for s in oracle.states if oracle.action(s) == a] for a in Action}
    recs = []
    from a3ps.advice import generate_advice

    for a in Action:
        pool = by_action[a]
        for i in rng.choice(len(pool), size=per_action, replace=False):
            recs.append(generate_advice(pool[i], oracle))
    labels = rng.permutation([int(r.action) for r in recs])
    order = rng.permutation(len(recs))
    n_train = int(0.9 * len(recs))
    return [
        AdviceRecord(recs[i].state, labels[i], recs[i].advice, split="train" if k < n_train else "tune")
        for k, i in enumerate(order)
    ]


def test_permuted_labels_give_chance_accuracy(default_config, dense_oracle):
    recs = balanced_permuted(default_config, dense_oracle)
    model, vocab, _ = ada.fit(default_config, recs, ada.AdaTrainConfig(epochs=40, patience=5))
    acc = ada.evaluate(model, vocab, default_config, [r for r in recs if r.split == "tune"]).accuracy
    assert 0.1 <= acc <= 0.3


def test_default_corpus_tune_accuracy(default_config, corpus, trained):
    model, vocab, hist = trained
    report = ada.evaluate(model, vocab, default_config, [r for r in corpus if r.split == "tune"])
    assert report.accuracy >= 0.8
    assert report.accuracy == max(h.tune_accuracy for h in hist) or report.loss <= min(h.tune_loss for h in hist) + 1e-12


def test_confusion_rows_count_labels(default_config, corpus, trained):
    model, vocab, _ = trained
    report = ada.evaluate(model, vocab, default_config, corpus)
    counts = np.bincount([int(r.action) for r in corpus], minlength=5)
    np.testing.assert_array_equal(report.per_action_counts(), counts)
    assert report.count == len(corpus)
    assert report.accuracy == np.trace(report.confusion) / len(corpus)


def test_scores_finite_for_corpus(default_config, corpus, trained):
    model, vocab, _ = trained
    feats = np.array([features(default_config, r) for r in corpus])
    scores = ada.action_scores_batch(model, vocab, feats, [r.tokens for r in corpus])
    assert np.isfinite(scores).all()


def test_advice_sensitivity(default_config, corpus, trained):
    model, vocab, _ = trained
    tune = [r for r in corpus if r.split == "tune"]
    changed = 0
    for r in tune:
        f = features(default_config, r)
        own = ada.action_scores(model, vocab, f, r.tokens)
        flipped = ada.action_scores(model, vocab, f, preprocess(contradictory_advice(default_config, r.state, r.action)))
        changed += int(np.argmax(own) != np.argmax(flipped))
    assert changed / len(tune) >= 0.5


def test_training_is_deterministic(default_config, corpus):
    small = corpus[:200]
    cfg = ada.AdaTrainConfig(epochs=3)
    _, _, h1 = ada.fit(default_config, small, cfg)
    _, _, h2 = ada.fit(default_config, small, cfg)
    assert h1 == h2


def test_checkpoint_round_trip(tmp_path, default_config, corpus, trained):
    model, vocab, _ = trained
    ada.save_ada(tmp_path / "ada.a3ck", model, vocab)
    m2, v2 = ada.load_ada(tmp_path / "ada.a3ck")
    assert v2.tokens == vocab.tokens
    assert checksum(m2.parameters()) == checksum(model.parameters())
    with pytest.raises(FileNotFoundError):
        ada.load_ada(tmp_path / "missing.a3ck")


def test_scorer_caches_and_is_frozen(default_config, dense_oracle, trained):
    model, vocab, _ = trained
    scorer = ada.AdvisedScorer(model, vocab, dense_oracle)
    before = checksum(model.parameters())
    for s in dense_oracle.states[:50]:
        a = scorer(s)
        assert a is scorer(s)
        assert not a.flags.writeable
    assert checksum(model.parameters()) == before
