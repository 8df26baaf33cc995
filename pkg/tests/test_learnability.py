import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoarchive.learnability import (
    confidence_interval,
    cvar_accuracy,
    estimate_from_counts,
    estimate_learnability,
    extract_boxed,
    normalize_answer,
    unbiased_learnability,
    verify_answer,
)


class TestExtractBoxed:
    def test_plain_number(self):
        assert extract_boxed("after working it out: \\boxed{2048}") == "2048"

    def test_nested_braces(self):
        assert extract_boxed("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}"

    def test_no_box(self):
        assert extract_boxed("no final answer here") is None

    def test_unbalanced(self):
        assert extract_boxed("\\boxed{2048") is None

    def test_last_box_wins(self):
        assert extract_boxed("\\boxed{1} then \\boxed{2}") == "2"

    def test_empty_box(self):
        assert extract_boxed("\\boxed{}") == ""


class TestNormalize:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("  2048 ", "2048"),
            ("2,048", "2048"),
            ("$5", "5"),
            ("50%", "50"),
            ("$\\frac{1}{2}$", "\\frac{1}{2}"),
            ("$1,234$", "1234"),
            ("hello, world", "hello, world"),
        ],
    )
    def test_rules(self, raw, expected):
        assert normalize_answer(raw) == expected


class TestVerifyAnswer:
    def test_exact_match(self):
        assert verify_answer("the answer is \\boxed{384}", "384")

    def test_thousands_separator(self):
        assert verify_answer("\\boxed{2,048}", "2048")

    def test_wrong_number(self):
        assert not verify_answer("\\boxed{2047}", "2048")

    def test_fraction_equals_decimal(self):
        assert verify_answer("\\boxed{1/2}", "0.5")

    def test_currency_and_percent(self):
        assert verify_answer("\\boxed{$12}", "12")
        assert verify_answer("\\boxed{75%}", "75")

    def test_string_fallback(self):
        assert verify_answer("\\boxed{x+1}", "x+1")
        assert not verify_answer("\\boxed{x+1}", "x+2")

    def test_missing_box_or_gold(self):
        assert not verify_answer("no box at all", "5")
        assert not verify_answer("\\boxed{5}", "")

    @given(
        prefix=st.text(alphabet=st.characters(blacklist_characters="\\{}"), max_size=40),
        suffix=st.text(alphabet=st.characters(blacklist_characters="\\{}"), max_size=40),
    )
    @settings(max_examples=200)
    def test_prose_invariance(self, prefix, suffix):
        base = "\\boxed{2048}"
        assert verify_answer(prefix + base + suffix, "2048")
        assert not verify_answer(prefix + "\\boxed{7}" + suffix, "2048")


class TestEstimator:
    def test_half_successes_clamped(self):
        est = estimate_learnability([True, True, True, False, False, False], step=3)
        assert est.p_hat == 0.5
        assert est.l_hat == 0.25
        assert math.isclose(est.l_hat_raw, 1.2 * 0.25)
        assert est.k == 6 and est.step == 3

    def test_all_correct_or_wrong(self):
        assert estimate_learnability([True] * 6, 0).l_hat == 0.0
        assert estimate_learnability([False] * 6, 0).l_hat == 0.0

    def test_too_few_verdicts(self):
        with pytest.raises(ValueError):
            estimate_learnability([True], 0)
        with pytest.raises(ValueError):
            estimate_from_counts(1, 1, 0)

    def test_counts_match_verdicts(self):
        a = estimate_learnability([True, False, True, False], 5)
        b = estimate_from_counts(4, 2, 5)
        assert a == b

    @given(k=st.integers(2, 40), s=st.integers(0, 40))
    def test_symmetry(self, k, s):
        s = min(s, k)
        forward = estimate_from_counts(k, s, 0)
        backward = estimate_from_counts(k, k - s, 0)
        assert math.isclose(forward.l_hat, backward.l_hat, abs_tol=1e-15)

    def test_unbiasedness_small_mc(self):
        # The full-scale check lives in the acceptance suite.
        rng = random.Random(7)
        p, k, trials = 0.3, 6, 20000
        total = 0.0
        for _ in range(trials):
            successes = sum(1 for _ in range(k) if rng.random() < p)
            total += unbiased_learnability(successes / k, k)
        assert abs(total / trials - p * (1 - p)) < 0.01


class TestCvar:
    def test_alpha_one_is_mean(self):
        rates = [0.2, 0.9, 0.5, 1.0]
        assert math.isclose(cvar_accuracy(rates, 1.0), sum(rates) / 4)

    def test_hardest_third(self):
        assert cvar_accuracy([0.0, 0.5, 1.0], 1 / 3) == 0.0

    def test_constant_rates(self):
        for alpha in (0.05, 0.3, 1.0):
            assert math.isclose(cvar_accuracy([0.7] * 10, alpha), 0.7)

    def test_alpha_bounds(self):
        with pytest.raises(ValueError):
            cvar_accuracy([0.5], 0.0)
        with pytest.raises(ValueError):
            cvar_accuracy([0.5], 1.1)
        with pytest.raises(ValueError):
            cvar_accuracy([], 0.5)

    @given(
        rates=st.lists(st.floats(0, 1), min_size=1, max_size=30),
        alphas=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6),
    )
    def test_monotone_in_alpha(self, rates, alphas):
        values = [cvar_accuracy(rates, a) for a in sorted(alphas)]
        assert all(lo <= hi + 1e-12 for lo, hi in zip(values, values[1:]))


class TestConfidenceInterval:
    def test_half_and_half(self):
        assert math.isclose(
            confidence_interval(5, 10), 1.96 * math.sqrt(0.025), rel_tol=1e-12
        )

    def test_degenerate_rates(self):
        assert confidence_interval(0, 10) == 0.0
        assert confidence_interval(10, 10) == 0.0

    def test_magnitude_at_scale(self):
        # 88% over 500 trials lands near a 2.85-point half-width.
        assert math.isclose(confidence_interval(440, 500), 0.02848, abs_tol=5e-5)

    def test_zero_trials(self):
        with pytest.raises(ValueError):
            confidence_interval(0, 0)
