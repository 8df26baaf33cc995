"""Surface-similarity scoring used by the mutation novelty filter.

Pinned variant: n-gram orders 1-4 with uniform 1/4 weights, epsilon
smoothing (1e-9) for orders with zero matches, brevity penalty
exp(1 - r/c) when the candidate is shorter than the reference. An order
that neither side can form (both too short) scores a neutral 1 so a text
always scores 1 against itself.
"""
from __future__ import annotations

import math
import string
from collections import Counter
from typing import Sequence

EPSILON = 1e-9

_STRIP_PUNCT = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace-split words with punctuation stripped."""
    out = []
    for raw in text.lower().split():
        word = raw.translate(_STRIP_PUNCT)
        if word:
            out.append(word)
    return out


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_score(candidate_tokens: Sequence[str], reference_tokens: Sequence[str]) -> float:
    """Similarity of candidate to reference in [0, 1]."""
    if not reference_tokens:
        raise ValueError("reference must be non-empty")
    c = len(candidate_tokens)
    r = len(reference_tokens)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand = _ngram_counts(candidate_tokens, n)
        total = sum(cand.values())
        ref = _ngram_counts(reference_tokens, n)
        if total == 0 and sum(ref.values()) == 0:
            precision = 1.0
        else:
            clipped = sum(min(count, ref[gram]) for gram, count in cand.items())
            precision = clipped / total if clipped > 0 else EPSILON
        log_sum += 0.25 * math.log(precision)
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum)


def bleu_similarity(candidate_text: str, reference_text: str) -> float:
    """bleu_score over the pinned tokenization of two raw texts."""
    return bleu_score(tokenize(candidate_text), tokenize(reference_text))
