"""Mutation planning, response parsing, and the retry-wrapped chains.

A plan is either a resample (fresh seed copy) or an LLM chain that always
starts with a setting rewrite and optionally appends a distractor and/or a
symbolic stage. Every produced candidate must clear the surface-novelty
filter against its parent before it may compete for a cell.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import random

from .archive import Archive
from .bleu import bleu_similarity
from .gateway import ChatRequest, Priority
from .problems import Problem
from .prompts import MUTATION_STAGES, PromptLibrary

STRUCTURE_OUTCOMES = ("distractor", "symbolic", "both", "none")


@dataclass(frozen=True)
class MutationConfig:
    resample_prob: float = 0.25
    structure_probs: dict = field(
        default_factory=lambda: {
            "distractor": 0.4,
            "symbolic": 0.4,
            "both": 0.2,
            "none": 0.0,
        }
    )
    bleu_threshold: float = 0.6
    max_tries: int = 5
    mutator_profile: str = "A"
    max_tokens: int = 1024
    temperature: float = 0.7

    def __post_init__(self) -> None:
        if not 0.0 <= self.resample_prob <= 1.0:
            raise ValueError("resample_prob must be in [0, 1]")
        if set(self.structure_probs) != set(STRUCTURE_OUTCOMES):
            raise ValueError(f"structure_probs needs keys {STRUCTURE_OUTCOMES}")
        if any(p < 0 for p in self.structure_probs.values()):
            raise ValueError("structure probabilities must be >= 0")
        if abs(sum(self.structure_probs.values()) - 1.0) > 1e-9:
            raise ValueError("structure probabilities must sum to 1")
        if self.max_tries < 1:
            raise ValueError("max_tries must be >= 1")
        if self.mutator_profile not in ("S", "A"):
            raise ValueError("mutator_profile must be 'S' or 'A'")


@dataclass(frozen=True)
class MutationPlan:
    kind: str  # "resample" | "llm_chain"
    target_category: Optional[str] = None
    apply_distractor: bool = False
    apply_symbolic: bool = False

    def __post_init__(self) -> None:
        if self.kind == "resample":
            if self.target_category or self.apply_distractor or self.apply_symbolic:
                raise ValueError("resample plans carry no chain parameters")
        elif self.kind == "llm_chain":
            if not self.target_category:
                raise ValueError("llm_chain plans need a target category")
        else:
            raise ValueError(f"unknown plan kind {self.kind!r}")

    @property
    def mutator_kind(self) -> str:
        if self.kind == "resample":
            return "resample"
        if self.apply_distractor and self.apply_symbolic:
            return "setting+both"
        if self.apply_distractor:
            return "setting+distractor"
        if self.apply_symbolic:
            return "setting+symbolic"
        return "setting"

    @property
    def stages(self) -> tuple[str, ...]:
        stages = ["setting"]
        if self.apply_distractor:
            stages.append("distractor")
        if self.apply_symbolic:
            stages.append("symbolic")
        return tuple(stages)


@dataclass(frozen=True)
class MutatorOutput:
    reasoning_prefix: str
    mutated_problem: str
    mutated_reasoning: Optional[str] = None
    mutated_solution: Optional[str] = None


class MutatorResponseError(Exception):
    """Hard format failure; one retry is charged per occurrence."""


class NoObjectFound(MutatorResponseError):
    pass


class MalformedObject(MutatorResponseError):
    pass


class MissingField(MutatorResponseError):
    def __init__(self, name: str):
        super().__init__(f"response object lacks required field {name!r}")
        self.name = name


class BleuRejected(Exception):
    """Candidate too similar to its parent."""

    def __init__(self, similarity: float, threshold: float):
        super().__init__(f"similarity {similarity:.3f} >= threshold {threshold}")
        self.similarity = similarity


class ExhaustedRetries(Exception):
    """All attempts at one mutation failed; carries the final failure."""

    def __init__(self, last_failure: Exception, attempts: int, parsed_attempts: int):
        super().__init__(f"gave up after {attempts} attempts: {last_failure}")
        self.last_failure = last_failure
        self.attempts = attempts
        self.parsed_attempts = parsed_attempts


def plan_mutation(
    archive: Archive, config: MutationConfig, rng: random.Random
) -> MutationPlan:
    """Draw the next mutation plan.

    A resample fires with resample_prob; otherwise the chain targets the
    neediest category and draws one structural outcome. The S profile
    never adds structure stages.
    """
    if rng.random() < config.resample_prob:
        return MutationPlan(kind="resample")
    target = archive.select_target_category(rng)
    distractor = symbolic = False
    if config.mutator_profile == "A":
        outcome = _draw_structure(config.structure_probs, rng)
        distractor = outcome in ("distractor", "both")
        symbolic = outcome in ("symbolic", "both")
    return MutationPlan(
        kind="llm_chain",
        target_category=target,
        apply_distractor=distractor,
        apply_symbolic=symbolic,
    )


def _draw_structure(probs: dict, rng: random.Random) -> str:
    u = rng.random()
    acc = 0.0
    for outcome in STRUCTURE_OUTCOMES:
        acc += probs[outcome]
        if u < acc:
            return outcome
    return STRUCTURE_OUTCOMES[-1]


def parse_mutator_response(text: str, stage: str) -> MutatorOutput:
    """Recover the structured output from one mutation response.

    The last well-formed brace-delimited object wins (fenced or bare);
    everything before it is kept as the reasoning prefix. Total: every
    input yields an output or one of the three named errors.
    """
    if stage not in MUTATION_STAGES:
        raise ValueError(f"unknown mutation stage {stage!r}")
    span = _last_json_object(text)
    if span is None:
        if "{" in text:
            raise MalformedObject("braces present but no parseable object")
        raise NoObjectFound("response contains no brace-delimited object")
    start, _, obj = span
    problem = _string_field(obj, "mutated_problem")
    if problem is None:
        raise MissingField("mutated_problem")
    solution = _string_field(obj, "mutated_solution")
    if stage == "symbolic" and solution is None:
        raise MissingField("mutated_solution")
    reasoning = _string_field(obj, "mutated_reasoning")
    return MutatorOutput(
        reasoning_prefix=text[:start],
        mutated_problem=problem,
        mutated_reasoning=reasoning,
        mutated_solution=solution,
    )


def _string_field(obj: dict, name: str) -> Optional[str]:
    value = obj.get(name)
    if isinstance(value, str):
        stripped = value.strip()
        return stripped or None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return str(value)
    return None


def _last_json_object(text: str) -> Optional[tuple[int, int, dict]]:
    best = None
    i = 0
    while True:
        start = text.find("{", i)
        if start < 0:
            return best
        end = _balanced_end(text, start)
        if end < 0:
            i = start + 1
            continue
        try:
            obj = json.loads(text[start:end])
        except json.JSONDecodeError:
            i = start + 1
            continue
        if isinstance(obj, dict):
            best = (start, end, obj)
            i = end
        else:
            i = start + 1


def _balanced_end(text: str, start: int) -> int:
    """Index one past the brace that closes text[start]; -1 if unbalanced.

    Braces inside JSON string literals do not count.
    """
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return -1


class Mutator:
    """Executes plans against the gateway, with whole-chain retries."""

    def __init__(
        self,
        gateway,
        config: MutationConfig,
        seed_pool: Sequence[Problem],
        library: Optional[PromptLibrary] = None,
    ):
        if not seed_pool:
            raise ValueError("mutator needs a non-empty seed pool")
        self.gateway = gateway
        self.config = config
        self.seed_pool = list(seed_pool)
        self.library = library or PromptLibrary()

    def mutate(
        self,
        parent: Problem,
        plan: MutationPlan,
        rng: random.Random,
        candidate_id: str,
        birth_step: int,
    ) -> Problem:
        """Produce one candidate; raises ExhaustedRetries on repeated failure."""
        if plan.kind == "resample":
            return self._resample(rng, candidate_id, birth_step)
        last: Exception | None = None
        parsed_attempts = 0
        for _ in range(self.config.max_tries):
            try:
                question, gold = self._run_chain(parent, plan, rng)
                parsed_attempts += 1
                similarity = bleu_similarity(question, parent.question)
                if similarity >= self.config.bleu_threshold:
                    raise BleuRejected(similarity, self.config.bleu_threshold)
            except MutatorResponseError as exc:
                last = exc
                continue
            except BleuRejected as exc:
                last = exc
                continue
            return Problem(
                id=candidate_id,
                question=question,
                gold_answer=gold,
                setting=plan.target_category,
                depth=parent.depth + 1,
                parent_id=parent.id,
                mutator_kind=plan.mutator_kind,
                birth_step=birth_step,
            )
        assert last is not None
        raise ExhaustedRetries(last, self.config.max_tries, parsed_attempts)

    def _resample(
        self, rng: random.Random, candidate_id: str, birth_step: int
    ) -> Problem:
        seed = rng.choice(self.seed_pool)
        return Problem(
            id=candidate_id,
            question=seed.question,
            gold_answer=seed.gold_answer,
            setting=seed.setting,
            depth=0,
            parent_id=None,
            mutator_kind="resample",
            birth_step=birth_step,
        )

    def _run_chain(
        self, parent: Problem, plan: MutationPlan, rng: random.Random
    ) -> tuple[str, str]:
        question = parent.question
        gold = parent.gold_answer
        for stage in plan.stages:
            messages = self.library.render(
                stage,
                question,
                target_category=plan.target_category,
                solution=gold,
            )
            texts = self.gateway.complete(
                ChatRequest(
                    messages=tuple(messages),
                    n=1,
                    max_tokens=self.config.max_tokens,
                    temperature=self.config.temperature,
                    priority=Priority.MUTATION,
                    seed=rng.randrange(2**63),
                )
            )
            output = parse_mutator_response(texts[0], stage)
            question = output.mutated_problem
            if stage == "symbolic":
                gold = output.mutated_solution
        return question, gold
