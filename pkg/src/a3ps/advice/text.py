"""Advice text normalisation and vocabulary."""
from __future__ import annotations

import re
from typing import Iterable, Sequence

from a3ps.errors import ContractError

# Fixed function-word list, embedded for reproducibility.  Direction and
# movement words ("up", "down", "left", "right", "back", "wait", ...) are
# deliberately absent since they carry the advice.
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been before
being below between both but by can could did do does doing during each few for from
further had has have having he her here hers herself him himself his how i if in into
is it its itself just me more most my myself no nor not now of on once only or other
our ours ourselves own same she should so some such than that the their theirs them
themselves then there these they this those through to too until very was we were
what when where which while who whom why will with would you your yours yourself
yourselves s t d ll m o re ve y shall might must may also ever every let us
""".split())

_NON_TEXT = re.compile(r"[^a-z0-9 ]")
_SPACE = re.compile(r"\s")

PAD, UNK = "<pad>", "<unk>"


def preprocess(text: str) -> list[str]:
    """Lowercase, drop characters outside ``[a-z0-9 ]``, split, remove stopwords."""
    cleaned = _NON_TEXT.sub("", _SPACE.sub(" ", text.lower()))
    return [tok for tok in cleaned.split() if tok not in STOPWORDS]


class Vocabulary:
    """Token index with ``<pad>`` at 0 and ``<unk>`` at 1."""

    def __init__(self, tokens: Iterable[str] = (), frozen: bool = False):
        self.index: dict[str, int] = {PAD: 0, UNK: 1}
        self.frozen = False
        for tok in tokens:
            self.add(tok)
        self.frozen = frozen

    def add(self, token: str) -> int:
        if token in self.index:
            return self.index[token]
        if self.frozen:
            raise ContractError(f"vocabulary is frozen; cannot add {token!r}")
        self.index[token] = len(self.index)
        return self.index[token]

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, 1) for t in tokens]

    @property
    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self


def build_vocab(records) -> Vocabulary:
    """Frozen vocabulary over the train-split tokens, sorted for determinism."""
    seen = set()
    for rec in records:
        if rec.split == "train":
            seen.update(rec.tokens)
    return Vocabulary(sorted(seen), frozen=True)
