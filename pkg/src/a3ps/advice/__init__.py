"""Template advice generation, text preprocessing and the advice corpus."""
from a3ps.advice.corpus import (
    AdviceRecord,
    build_corpus,
    generate_advice,
    load_corpus,
    save_corpus,
    split_sizes,
)
from a3ps.advice.rules import DEFAULT_RULES, Situation, TemplateRule, advise, contradictory_advice
from a3ps.advice.text import STOPWORDS, Vocabulary, build_vocab, preprocess

__all__ = [
    "DEFAULT_RULES", "STOPWORDS", "AdviceRecord", "Situation", "TemplateRule", "Vocabulary",
    "advise", "build_corpus", "build_vocab", "contradictory_advice", "generate_advice",
    "load_corpus", "preprocess", "save_corpus", "split_sizes",
]
