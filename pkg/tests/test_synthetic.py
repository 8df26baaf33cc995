import math
import random

import pytest

from evoarchive.bleu import bleu_similarity
from evoarchive.gateway import ChatRequest
from evoarchive.learnability import verify_answer
from evoarchive.mutation import MutatorResponseError, parse_mutator_response
from evoarchive.prompts import PromptLibrary
from evoarchive.synthetic import (
    SyntheticBackend,
    SyntheticWorld,
    SyntheticWorldConfig,
    mutate_response,
    sigmoid,
    solve_completions,
)

from conftest import make_problem

QUESTION = "A crew lays 14 tiles per hour for 6 hours and removes 4 cracked tiles. How many tiles remain?"
GOLD = "80"


def _world(ability=0.0, **kw):
    return SyntheticWorld(SyntheticWorldConfig(ability=ability, seed=11, **kw))


class TestWorld:
    def test_registration_is_idempotent(self):
        world = _world()
        world.register(QUESTION, GOLD, 0.5)
        world.register(QUESTION, GOLD, 2.0)
        assert world.lookup(QUESTION) == (0.5, GOLD)

    def test_prior_draw_is_stable(self):
        first = _world().ensure_registered("novel question")
        second = _world().ensure_registered("novel question")
        assert first == second

    def test_even_odds_at_matched_difficulty(self):
        world = _world(ability=1.3)
        world.register(QUESTION, GOLD, 1.3)
        rng = random.Random(0)
        n = 10_000
        hits = sum(world.verdicts(QUESTION, 1, rng)[0] for _ in range(n))
        assert abs(hits / n - 0.5) < 0.015

    def test_large_gap_is_near_certain(self):
        world = _world(ability=6.0)
        world.register(QUESTION, GOLD, 0.0)
        rng = random.Random(0)
        hits = sum(world.verdicts(QUESTION, 1, rng)[0] for _ in range(2000))
        assert hits / 2000 >= 0.99

    def test_logistic_grid_within_three_se(self):
        n = 10_000
        for gap in (-2, -1, 0, 1, 2):
            world = _world(ability=float(gap))
            world.register(QUESTION, GOLD, 0.0)
            rng = random.Random(gap)
            hits = sum(world.verdicts(QUESTION, 1, rng)[0] for _ in range(n))
            p = sigmoid(gap)
            se = math.sqrt(p * (1 - p) / n)
            assert abs(hits / n - p) <= 3 * se

    def test_train_step_maximal_at_even_odds(self):
        world = _world(ability=0.0, learn_rate=0.2)
        world.register(QUESTION, GOLD, 0.0)
        batch = [make_problem(question=QUESTION, gold=GOLD)]
        new_ability = world.train_step(batch)
        assert math.isclose(new_ability, 0.2 * 0.25)

    def test_train_step_vanishes_at_extremes(self):
        for gap in (-12.0, 12.0):
            world = _world(ability=gap, learn_rate=0.2)
            world.register(QUESTION, GOLD, 0.0)
            before = world.ability
            world.train_step([make_problem(question=QUESTION, gold=GOLD)])
            assert abs(world.ability - before) < 1e-4

    def test_learn_rate_linearity(self):
        deltas = []
        for eta in (0.1, 0.2):
            world = _world(ability=0.0, learn_rate=eta)
            world.register(QUESTION, GOLD, 0.0)
            world.train_step([make_problem(question=QUESTION, gold=GOLD)])
            deltas.append(world.ability)
        assert math.isclose(deltas[1], 2 * deltas[0])

    def test_ability_monotone(self):
        world = _world(ability=0.0)
        batch = [make_problem(question=QUESTION, gold=GOLD)]
        world.register(QUESTION, GOLD, 0.0)
        last = world.ability
        for _ in range(50):
            world.train_step(batch)
            assert world.ability >= last
            last = world.ability


class TestSolveCompletions:
    def test_correct_boxes_gold(self):
        world = _world(ability=10.0)
        world.register(QUESTION, GOLD, 0.0)
        texts = solve_completions(world, QUESTION, 5, random.Random(1))
        assert all(verify_answer(t, GOLD) for t in texts)

    def test_incorrect_boxes_gold_plus_one(self):
        world = _world(ability=-10.0)
        world.register(QUESTION, GOLD, 0.0)
        texts = solve_completions(world, QUESTION, 5, random.Random(1))
        assert all(not verify_answer(t, GOLD) for t in texts)
        assert all(verify_answer(t, "81") for t in texts)

    def test_non_numeric_gold_uses_sentinel(self):
        world = _world(ability=-10.0)
        world.register("q", "apples", 0.0)
        text = solve_completions(world, "q", 1, random.Random(1))[0]
        assert "\\boxed{unsolved}" in text

    def test_deterministic_under_seed(self):
        world = _world()
        world.register(QUESTION, GOLD, 0.0)
        a = solve_completions(world, QUESTION, 6, random.Random(42))
        b = solve_completions(world, QUESTION, 6, random.Random(42))
        assert a == b


class TestMutateResponse:
    def test_setting_output_parses_and_differs(self):
        world = _world()
        world.register(QUESTION, GOLD, 0.3)
        text = mutate_response(
            world, "setting", QUESTION, GOLD, "Scientific", random.Random(2)
        )
        out = parse_mutator_response(text, "setting")
        assert out.mutated_problem
        assert bleu_similarity(out.mutated_problem, QUESTION) < 0.6
        # child inherits the parent difficulty and the same gold
        assert world.lookup(out.mutated_problem) == (0.3, GOLD)

    def test_distractor_appends_one_sentence(self):
        world = _world()
        world.register(QUESTION, GOLD, 0.3)
        text = mutate_response(world, "distractor", QUESTION, GOLD, None, random.Random(2))
        out = parse_mutator_response(text, "distractor")
        assert out.mutated_problem.startswith(QUESTION)
        assert len(out.mutated_problem) > len(QUESTION)

    def test_symbolic_changes_solution_and_difficulty(self):
        world = _world()
        world.register(QUESTION, GOLD, 0.3)
        text = mutate_response(world, "symbolic", QUESTION, GOLD, None, random.Random(2))
        out = parse_mutator_response(text, "symbolic")
        assert out.mutated_solution != GOLD
        difficulty, gold = world.lookup(out.mutated_problem)
        assert difficulty > 0.3
        assert gold == out.mutated_solution

    def test_failure_rate_one_always_malformed(self):
        world = _world()
        world.register(QUESTION, GOLD, 0.3)
        rng = random.Random(0)
        for _ in range(30):
            text = mutate_response(
                world, "setting", QUESTION, GOLD, "Events", rng, failure_rate=1.0
            )
            with pytest.raises(MutatorResponseError):
                parse_mutator_response(text, "setting")


class TestBackendPromptParsing:
    def test_round_trip_through_templates(self, world):
        library = PromptLibrary()
        backend = SyntheticBackend(world, library=library)
        world.ensure_registered(QUESTION, GOLD)

        setting_messages = library.render("setting", QUESTION, target_category="Events")
        out = parse_mutator_response(
            backend.complete(ChatRequest(messages=tuple(setting_messages), seed=3))[0],
            "setting",
        )
        assert "festival" in out.mutated_problem or "ceremony" in out.mutated_problem

        symbolic_messages = library.render("symbolic", QUESTION, solution=GOLD)
        out = parse_mutator_response(
            backend.complete(ChatRequest(messages=tuple(symbolic_messages), seed=4))[0],
            "symbolic",
        )
        assert out.mutated_solution is not None

        solve_messages = library.render("solve", QUESTION)
        texts = backend.complete(ChatRequest(messages=tuple(solve_messages), n=3, seed=5))
        assert len(texts) == 3

    def test_request_seed_pins_randomness(self, world):
        backend = SyntheticBackend(world)
        library = PromptLibrary()
        world.ensure_registered(QUESTION, GOLD)
        messages = tuple(library.render("solve", QUESTION))
        a = backend.complete(ChatRequest(messages=messages, n=4, seed=99))
        b = backend.complete(ChatRequest(messages=messages, n=4, seed=99))
        c = backend.complete(ChatRequest(messages=messages, n=4, seed=100))
        assert a == b
        assert a != c
