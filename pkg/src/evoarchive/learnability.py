"""Answer verification and learnability estimation.

Learnability of a problem is p*(1-p) where p is the solver's per-problem
success probability: maximal at p = 0.5, zero for problems that are always
or never solved. From K binary verdicts we form the unbiased estimate
(K/(K-1)) * p_hat * (1 - p_hat), clamped to the theoretical maximum 0.25
when used as an archive score.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

BOXED = "\\boxed{"

SCORE_MAX = 0.25

_THOUSANDS_COMMA = re.compile(r"(?<=\d),(?=\d)")


def extract_boxed(text: str) -> str | None:
    """Content of the last ``\\boxed{...}`` in *text*, or None.

    Braces nest (``\\boxed{\\frac{1}{2}}`` yields ``\\frac{1}{2}``); an
    unbalanced final box yields None.
    """
    start = text.rfind(BOXED)
    if start < 0:
        return None
    begin = start + len(BOXED)
    depth = 1
    for i in range(begin, len(text)):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[begin:i]
    return None


def normalize_answer(raw: str) -> str:
    """Apply the fixed normalization rule set to one answer string.

    Rules, in order: strip whitespace, strip surrounding $...$ math
    delimiters, strip a leading currency "$", strip a trailing "%",
    drop commas used as thousands separators. Anything the rules do not
    cover is left alone and will compare as a plain string.
    """
    s = raw.strip()
    if len(s) >= 2 and s.startswith("$") and s.endswith("$"):
        s = s[1:-1].strip()
    if s.startswith("$"):
        s = s[1:].strip()
    if s.endswith("%"):
        s = s[:-1].strip()
    s = _THOUSANDS_COMMA.sub("", s)
    return s.strip()


def parse_numeric(normalized: str) -> Union[Fraction, float, None]:
    """Exact rational if possible, then float, else None."""
    if not normalized:
        return None
    try:
        return Fraction(normalized)
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return float(normalized)
    except ValueError:
        return None


def verify_answer(completion_text: str, gold_answer: str) -> bool:
    """Whether the completion's boxed answer matches the gold answer.

    Total: any missing box, empty gold, or parse failure is False. Both
    sides rational compares exactly; otherwise numeric sides compare with
    relative tolerance 1e-6; otherwise normalized strings compare equal.
    """
    if not gold_answer:
        return False
    boxed = extract_boxed(completion_text)
    if boxed is None:
        return False
    cand = normalize_answer(boxed)
    gold = normalize_answer(gold_answer)
    a = parse_numeric(cand)
    b = parse_numeric(gold)
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    if a is not None and b is not None:
        return math.isclose(float(a), float(b), rel_tol=1e-6, abs_tol=0.0)
    return cand == gold


@dataclass(frozen=True)
class LearnabilityEstimate:
    """Success-probability and learnability estimate from k verdicts."""

    p_hat: float
    l_hat: float
    k: int
    step: int

    @property
    def l_hat_raw(self) -> float:
        """Unclamped unbiased estimate; can exceed the 0.25 maximum."""
        return unbiased_learnability(self.p_hat, self.k)


def unbiased_learnability(p_hat: float, k: int) -> float:
    """Unbiased estimate of p*(1-p) from the empirical rate over k trials."""
    if k < 2:
        raise ValueError("learnability estimation requires k >= 2")
    return (k / (k - 1)) * p_hat * (1.0 - p_hat)


def estimate_learnability(verdicts: Sequence[bool], step: int) -> LearnabilityEstimate:
    """Estimate from a list of binary solve verdicts (needs >= 2)."""
    k = len(verdicts)
    successes = sum(1 for v in verdicts if v)
    return estimate_from_counts(k, successes, step)


def estimate_from_counts(k: int, successes: int, step: int) -> LearnabilityEstimate:
    """Estimate from (trials, successes); the wire-level form."""
    if k < 2:
        raise ValueError("learnability estimation requires k >= 2")
    if not 0 <= successes <= k:
        raise ValueError(f"successes {successes} outside [0, {k}]")
    p_hat = successes / k
    raw = unbiased_learnability(p_hat, k)
    return LearnabilityEstimate(p_hat=p_hat, l_hat=min(SCORE_MAX, raw), k=k, step=step)


def cvar_accuracy(rates: Sequence[float], alpha: float) -> float:
    """Mean success over the hardest alpha-fraction of items.

    Sorts ascending and averages the first max(1, floor(alpha*n)) rates.
    """
    if not rates:
        raise ValueError("rates must be non-empty")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    ordered = sorted(rates)
    m = max(1, math.floor(alpha * len(ordered)))
    return sum(ordered[:m]) / m


def confidence_interval(successes: int, trials: int) -> float:
    """95% normal-approximation half-width for a binomial rate."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} outside [0, {trials}]")
    p = successes / trials
    return 1.96 * math.sqrt(p * (1.0 - p) / trials)
