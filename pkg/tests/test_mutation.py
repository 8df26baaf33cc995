import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoarchive.archive import ArchiveConfig, seed_archive
from evoarchive.bleu import bleu_similarity
from evoarchive.gateway import InferenceGateway
from evoarchive.mutation import (
    BleuRejected,
    ExhaustedRetries,
    MalformedObject,
    MissingField,
    MutationConfig,
    MutationPlan,
    Mutator,
    MutatorResponseError,
    NoObjectFound,
    _draw_structure,
    parse_mutator_response,
    plan_mutation,
)
from evoarchive.prompts import PromptLibrary, render_prompt
from evoarchive.seeds import generate_seed_problems
from evoarchive.synthetic import SyntheticBackend, SyntheticWorld, SyntheticWorldConfig

from conftest import make_problem


class ScriptedRandom(random.Random):
    """random() returns scripted values first, then falls back."""

    def __new__(cls, script):
        return super().__new__(cls, 0)

    def __init__(self, script):
        super().__init__(0)
        self._script = list(script)

    def random(self):
        if self._script:
            return self._script.pop(0)
        return super().random()


@pytest.fixture
def synthetic_gateway(world):
    backend = SyntheticBackend(world)
    gateway = InferenceGateway(backend, max_in_flight=2)
    yield gateway
    gateway.close()


@pytest.fixture
def mutator(synthetic_gateway, seed_pool):
    return Mutator(synthetic_gateway, MutationConfig(), seed_pool)


class TestPlanMutation:
    def test_resample_draw(self, small_archive):
        plan = plan_mutation(small_archive, MutationConfig(), ScriptedRandom([0.1]))
        assert plan.kind == "resample"
        assert plan.mutator_kind == "resample"

    def test_structure_draw_boundaries(self):
        probs = MutationConfig().structure_probs
        assert _draw_structure(probs, ScriptedRandom([0.3])) == "distractor"
        assert _draw_structure(probs, ScriptedRandom([0.5])) == "symbolic"
        assert _draw_structure(probs, ScriptedRandom([0.85])) == "both"

    def test_chain_plan_carries_target(self, small_archive, rng):
        config = MutationConfig()
        for _ in range(50):
            plan = plan_mutation(small_archive, config, rng)
            if plan.kind == "llm_chain":
                assert plan.target_category is not None
                assert plan.stages[0] == "setting"

    def test_profile_s_never_adds_structure(self, small_archive, rng):
        config = MutationConfig(mutator_profile="S")
        for _ in range(200):
            plan = plan_mutation(small_archive, config, rng)
            if plan.kind == "llm_chain":
                assert plan.stages == ("setting",)

    def test_structure_frequencies(self, small_archive, rng):
        config = MutationConfig(resample_prob=0.0)
        counts = {"distractor": 0, "symbolic": 0, "both": 0, "none": 0}
        n = 4000
        for _ in range(n):
            plan = plan_mutation(small_archive, config, rng)
            if plan.apply_distractor and plan.apply_symbolic:
                counts["both"] += 1
            elif plan.apply_distractor:
                counts["distractor"] += 1
            elif plan.apply_symbolic:
                counts["symbolic"] += 1
            else:
                counts["none"] += 1
        for outcome, prob in config.structure_probs.items():
            se = math.sqrt(max(prob * (1 - prob), 1e-9) / n)
            assert abs(counts[outcome] / n - prob) <= 3 * se + 1e-9

    def test_bad_probability_table(self):
        with pytest.raises(ValueError):
            MutationConfig(structure_probs={"distractor": 0.9, "symbolic": 0.3,
                                            "both": 0.0, "none": 0.0})

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            MutationPlan(kind="resample", target_category="Events")
        with pytest.raises(ValueError):
            MutationPlan(kind="llm_chain")


class TestRenderPrompt:
    def test_setting_stage_has_context(self):
        messages = render_prompt("setting", make_problem(), target_category="Scientific")
        assert messages[0]["role"] == "system"
        assert "mathematics teacher" in messages[0]["content"]
        assert "Candidate context: Scientific" in messages[1]["content"]

    def test_symbolic_stage_has_problem_and_solution(self):
        problem = make_problem(gold="13")
        messages = render_prompt("symbolic", problem)
        assert problem.question in messages[1]["content"]
        assert "Solution: 13" in messages[1]["content"]

    def test_solve_stage_uses_boxed_instruction(self):
        problem = make_problem()
        messages = render_prompt("solve", problem)
        assert "\\boxed{ }" in messages[0]["content"]
        assert messages[1]["content"] == problem.question

    def test_missing_target_category(self):
        with pytest.raises(ValueError, match="candidate_context"):
            render_prompt("setting", make_problem())


class TestParseMutatorResponse:
    def test_fenced_object_with_reasoning(self):
        text = (
            "The original context is a shop.\n- I will move it to a lab.\n\n"
            '```\n{\n  "mutated_problem": "A lab runs 3 trials."\n}\n```'
        )
        out = parse_mutator_response(text, "setting")
        assert out.mutated_problem == "A lab runs 3 trials."
        assert "original context" in out.reasoning_prefix

    def test_last_object_wins(self):
        text = '{"mutated_problem": "first"} and later {"mutated_problem": "second"}'
        assert parse_mutator_response(text, "setting").mutated_problem == "second"

    def test_nested_braces_inside_strings(self):
        text = '{"mutated_problem": "find x in {1, 2, 3}"}'
        assert parse_mutator_response(text, "setting").mutated_problem == "find x in {1, 2, 3}"

    def test_symbolic_requires_solution(self):
        text = '{"mutated_problem": "p", "mutated_reasoning": "r"}'
        with pytest.raises(MissingField) as err:
            parse_mutator_response(text, "symbolic")
        assert err.value.name == "mutated_solution"

    def test_symbolic_full_output(self):
        text = json.dumps(
            {"mutated_problem": "p", "mutated_reasoning": "r", "mutated_solution": "384"}
        )
        out = parse_mutator_response(text, "symbolic")
        assert out.mutated_solution == "384"
        assert out.mutated_reasoning == "r"

    def test_numeric_solution_coerced(self):
        out = parse_mutator_response(
            '{"mutated_problem": "p", "mutated_solution": 384}', "symbolic"
        )
        assert out.mutated_solution == "384"

    def test_no_object(self):
        with pytest.raises(NoObjectFound):
            parse_mutator_response("plain prose, no json anywhere", "setting")

    def test_malformed_object(self):
        with pytest.raises(MalformedObject):
            parse_mutator_response("{not valid json", "setting")

    def test_empty_problem_is_missing(self):
        with pytest.raises(MissingField):
            parse_mutator_response('{"mutated_problem": "   "}', "setting")

    @given(text=st.text(max_size=300))
    @settings(max_examples=300)
    def test_totality(self, text):
        try:
            out = parse_mutator_response(text, "setting")
            assert out.mutated_problem
        except MutatorResponseError:
            pass


class TestMutateCandidate:
    def test_setting_only_chain(self, mutator, seed_pool):
        parent = seed_pool[0]
        plan = MutationPlan(kind="llm_chain", target_category="Scientific")
        child = mutator.mutate(parent, plan, random.Random(3), "cand-1", birth_step=4)
        assert child.setting == "Scientific"
        assert child.depth == parent.depth + 1
        assert child.parent_id == parent.id
        assert child.gold_answer == parent.gold_answer
        assert child.mutator_kind == "setting"
        assert child.birth_step == 4
        assert bleu_similarity(child.question, parent.question) < 0.6

    def test_symbolic_chain_changes_gold(self, mutator, seed_pool):
        parent = seed_pool[1]
        plan = MutationPlan(
            kind="llm_chain", target_category="Events", apply_symbolic=True
        )
        child = mutator.mutate(parent, plan, random.Random(5), "cand-2", birth_step=0)
        assert child.gold_answer != parent.gold_answer
        assert child.mutator_kind == "setting+symbolic"

    def test_full_chain_kind(self, mutator, seed_pool):
        plan = MutationPlan(
            kind="llm_chain",
            target_category="Technical",
            apply_distractor=True,
            apply_symbolic=True,
        )
        child = mutator.mutate(seed_pool[2], plan, random.Random(7), "cand-3", 0)
        assert child.mutator_kind == "setting+both"

    def test_resample_returns_fresh_seed(self, mutator, seed_pool):
        plan = MutationPlan(kind="resample")
        child = mutator.mutate(seed_pool[0], plan, random.Random(9), "cand-4", 2)
        assert child.depth == 0
        assert child.mutator_kind == "resample"
        assert child.parent_id is None
        assert any(s.question == child.question for s in seed_pool)

    def test_echo_backend_exhausts_retries(self, world, seed_pool):
        backend = SyntheticBackend(world, echo_mutations=True)
        with InferenceGateway(backend, max_in_flight=1) as gateway:
            mutator = Mutator(gateway, MutationConfig(), seed_pool)
            plan = MutationPlan(kind="llm_chain", target_category="Events")
            with pytest.raises(ExhaustedRetries) as err:
                mutator.mutate(seed_pool[0], plan, random.Random(1), "cand-5", 0)
        assert err.value.attempts == 5
        assert isinstance(err.value.last_failure, BleuRejected)
        assert err.value.parsed_attempts == 5

    def test_always_failing_backend(self, world, seed_pool):
        backend = SyntheticBackend(world, failure_rate=1.0)
        with InferenceGateway(backend, max_in_flight=1) as gateway:
            mutator = Mutator(gateway, MutationConfig(), seed_pool)
            plan = MutationPlan(kind="llm_chain", target_category="Events")
            with pytest.raises(ExhaustedRetries) as err:
                mutator.mutate(seed_pool[0], plan, random.Random(1), "cand-6", 0)
        assert isinstance(err.value.last_failure, MutatorResponseError)
        assert err.value.parsed_attempts == 0

    def test_preserving_stages_never_alter_gold(self, mutator, seed_pool, rng):
        # setting and distractor stages must carry the parent's answer through
        for i in range(20):
            parent = seed_pool[i % len(seed_pool)]
            plan = MutationPlan(
                kind="llm_chain", target_category="Economic", apply_distractor=True
            )
            child = mutator.mutate(parent, plan, rng, f"cand-g{i}", 0)
            assert child.gold_answer == parent.gold_answer
            assert child.depth == parent.depth + 1
