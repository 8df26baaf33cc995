"""Deterministic synthetic solver/mutator backend for GPU-free runs.

The world is a logistic item-response model: each problem carries a latent
difficulty, the simulated student one ability scalar, and a solve attempt
succeeds with probability sigmoid(ability - difficulty). Training on a
batch raises ability in proportion to the batch's mean p*(1-p), which is
exactly the premise the curriculum machinery is built on, so curriculum
claims become directly testable at desk scale.

Randomness is derived from (world seed, request seed) so concurrent
callers cannot perturb each other's draws; difficulty assignment is keyed
by question text, making world state order-independent.
"""
from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import random

from ._rng import derive_rng
from .bleu import bleu_similarity
from .gateway import ChatRequest
from .learnability import normalize_answer, parse_numeric
from .problems import Problem
from .prompts import PromptLibrary

_NUMBER = re.compile(r"\d+(?:\.\d+)?")

UNSOLVED_SENTINEL = "unsolved"


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass
class SyntheticWorldConfig:
    ability: float = 0.0
    difficulty_mu: float = 0.0
    difficulty_sigma: float = 1.5
    learn_rate: float = 0.2
    shift_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learn_rate <= 0:
            raise ValueError("learn_rate must be > 0")
        if self.difficulty_sigma < 0 or self.shift_sigma < 0:
            raise ValueError("sigmas must be >= 0")


class SyntheticWorld:
    """Simulated item difficulties plus one evolving student ability."""

    def __init__(self, config: SyntheticWorldConfig):
        self.config = config
        self.ability = config.ability
        self._items: dict[str, tuple[float, Optional[str]]] = {}
        self._lock = threading.Lock()

    def register(self, question: str, gold: Optional[str], difficulty: float) -> None:
        """Idempotent registration; collisions keep the smaller entry so
        the registry is independent of arrival order."""
        with self._lock:
            entry = (difficulty, gold if gold is not None else "")
            existing = self._items.get(question)
            if existing is None or entry < (existing[0], existing[1] or ""):
                self._items[question] = (difficulty, gold)

    def ensure_registered(self, question: str, gold: Optional[str] = None) -> float:
        """Difficulty of a question, drawing one from the prior on first sight."""
        with self._lock:
            entry = self._items.get(question)
            if entry is not None:
                if entry[1] is None and gold is not None:
                    self._items[question] = (entry[0], gold)
                return entry[0]
        rng = derive_rng(self.config.seed, "difficulty", question)
        difficulty = rng.gauss(self.config.difficulty_mu, self.config.difficulty_sigma)
        self.register(question, gold, difficulty)
        return self._items[question][0]

    def lookup(self, question: str) -> tuple[float, Optional[str]]:
        difficulty = self.ensure_registered(question)
        with self._lock:
            return difficulty, self._items[question][1]

    def solve_prob(self, question: str) -> float:
        difficulty = self.ensure_registered(question)
        with self._lock:
            return sigmoid(self.ability - difficulty)

    def verdicts(self, question: str, k: int, rng: random.Random) -> list[bool]:
        """k independent solve outcomes; the text-free fast path."""
        p = self.solve_prob(question)
        return [rng.random() < p for _ in range(k)]

    def train_step(self, batch: list[Problem]) -> float:
        """One simulated policy update from a training batch.

        Ability grows by learn_rate times the batch's mean p*(1-p), with
        success probabilities taken before the update. Never decreases.
        """
        if not batch:
            raise ValueError("training batch must be non-empty")
        signals = []
        for problem in batch:
            p = self.solve_prob(problem.question)
            signals.append(p * (1.0 - p))
        with self._lock:
            self.ability += self.config.learn_rate * (sum(signals) / len(signals))
            return self.ability


def solve_completions(
    world: SyntheticWorld,
    question: str,
    n: int,
    rng: random.Random,
    gold: Optional[str] = None,
) -> list[str]:
    """n completion texts for one problem, each independently correct with
    probability sigmoid(ability - difficulty)."""
    difficulty, known_gold = world.lookup(question)
    answer = gold if gold is not None else known_gold
    p = world.solve_prob(question)
    texts = []
    for _ in range(n):
        correct = rng.random() < p
        texts.append(_completion_text(answer, correct))
    return texts


def _completion_text(gold: Optional[str], correct: bool) -> str:
    if gold is None:
        boxed = UNSOLVED_SENTINEL
    elif correct:
        boxed = gold
    else:
        boxed = _wrong_answer(gold)
    return (
        "Working through the quantities step by step leads to the result. "
        f"The final answer is \\boxed{{{boxed}}}."
    )


def _wrong_answer(gold: str) -> str:
    value = parse_numeric(normalize_answer(gold))
    if isinstance(value, Fraction):
        return str(value + 1)
    if isinstance(value, float):
        return repr(value + 1.0)
    return UNSOLVED_SENTINEL


# --------------------------------------------------------------------------
# Scripted mutation responses

_SETTING_OPENERS = {
    "Personal Life": [
        "While organizing the week at home, a family keeps careful notes.",
        "During a quiet evening routine, a household tallies its chores.",
    ],
    "Professional": [
        "At the office, a project manager reviews the latest workload report.",
        "A consultant preparing an invoice audits the billed engagements.",
    ],
    "Economic": [
        "At the weekly market, a trader balances the ledger of sales.",
        "Reviewing the quarterly budget, an accountant weighs the figures.",
    ],
    "Recreational": [
        "Between rounds of a weekend tournament, a player tracks the scores.",
        "Planning a long hiking trip, a club compares the trail logs.",
    ],
    "Events": [
        "Preparing for the neighborhood festival, the committee counts supplies.",
        "Ahead of the graduation ceremony, organizers check the seating plan.",
    ],
    "Scientific": [
        "In a laboratory study, researchers record a series of measurements.",
        "Analyzing the trial data, a scientist tabulates the observations.",
    ],
    "Technical": [
        "While servicing the assembly line, an engineer logs the readings.",
        "Debugging the control system, a technician inspects the counters.",
    ],
    "Environmental": [
        "Surveying the river basin, a field team notes the seasonal changes.",
        "Monitoring the reforested slope, rangers chart the measurements.",
    ],
}

_SETTING_CLOSERS = [
    "Combining these values in the same way as before, what quantity results?",
    "Using the relationships described, determine the final amount.",
    "Following the identical calculation, what total is obtained?",
]

_DISTRACTOR_SENTENCES = [
    "The weather stayed pleasantly mild through the whole affair.",
    "A curious onlooker paused briefly to watch before moving on.",
    "Soft music played in the background the entire time.",
    "Nobody paid much attention to the clock on the far wall.",
]

# Appended as needed until a rewrite clears the novelty threshold; each
# sentence contributes fresh tokens, so similarity strictly falls.
_FILLER_SENTENCES = [
    "Every figure was copied into the ledger twice for safety.",
    "An assistant read the totals aloud while another confirmed them.",
    "The summary sheet travelled from desk to desk for approval.",
    "Fresh labels were printed so nothing could be confused later.",
    "A short break was taken before the arithmetic continued.",
    "All participants agreed the tally deserved careful double-checking.",
    "Someone fetched a spare calculator from the supply cabinet.",
    "Notes from the previous session stayed pinned to the corkboard.",
]

_MALFORMED_RESPONSES = [
    "I considered the problem carefully but cannot commit to a rewrite.",
    'Here is my attempt: {"mutated_problem": unquoted oops}',
    'After rethinking, the result follows.\n\n```\n{"commentary": "forgot the fields"}\n```',
]


def _format_response(reasoning: str, payload: dict) -> str:
    return f"{reasoning}\n\n```\n{json.dumps(payload)}\n```"


def mutate_response(
    world: SyntheticWorld,
    stage: str,
    question: str,
    gold: Optional[str],
    target_category: Optional[str],
    rng: random.Random,
    failure_rate: float = 0.0,
    echo: bool = False,
) -> str:
    """Scripted stand-in for one LLM mutation response.

    Emits reasoning text followed by a fenced JSON object. With
    probability failure_rate the output is malformed to exercise retry
    handling. Child problems are registered in the world as a side effect:
    setting/distractor children inherit the parent difficulty, symbolic
    children get a harder one.
    """
    if rng.random() < failure_rate:
        return rng.choice(_MALFORMED_RESPONSES)
    difficulty, known_gold = world.lookup(question)
    answer = gold if gold is not None else known_gold
    if echo:
        payload = {"mutated_problem": question}
        if stage == "symbolic":
            payload["mutated_solution"] = answer or UNSOLVED_SENTINEL
        return _format_response("Restating the problem unchanged.", payload)
    if stage == "setting":
        category = target_category or "Personal Life"
        numbers = _NUMBER.findall(question) or ["1"]
        opener = rng.choice(_SETTING_OPENERS[category])
        closer = rng.choice(_SETTING_CLOSERS)
        mutated = (
            f"{opener} The quantities involved are {', '.join(numbers)}. {closer}"
        )
        # dilute until dissimilarity holds by construction, even against a
        # parent that is itself a templated rewrite
        guard = 0
        while bleu_similarity(mutated, question) >= 0.55 and guard < 12:
            mutated += " " + rng.choice(_FILLER_SENTENCES)
            guard += 1
        world.register(mutated, answer, difficulty)
        reasoning = (
            f"The original story must move to the {category} context. "
            "I keep every quantity and swap the narrative frame."
        )
        return _format_response(reasoning, {"mutated_problem": mutated})
    if stage == "distractor":
        sentence = rng.choice(_DISTRACTOR_SENTENCES)
        mutated = f"{question} {sentence}"
        world.register(mutated, answer, difficulty)
        reasoning = (
            "I add one sentence of background colour; it names no new "
            "quantities, so the answer is untouched."
        )
        return _format_response(reasoning, {"mutated_problem": mutated})
    if stage == "symbolic":
        numbers = _NUMBER.findall(question)
        factor = rng.randint(2, 4)
        if numbers:
            original = numbers[rng.randrange(len(numbers))]
            replacement = str(int(float(original) * factor))
            mutated = question.replace(original, replacement, 1)
        else:
            mutated = f"{question} Repeat the process {factor} times."
        new_gold = _scaled_gold(answer, factor)
        shifted = difficulty + abs(rng.gauss(0.5, world.config.shift_sigma))
        world.register(mutated, new_gold, shifted)
        reasoning = (
            "I scale one quantity, which changes the computation and "
            "therefore the solution."
        )
        return _format_response(
            reasoning,
            {
                "mutated_problem": mutated,
                "mutated_reasoning": "Recompute with the scaled quantity.",
                "mutated_solution": new_gold,
            },
        )
    raise ValueError(f"unknown mutation stage {stage!r}")


def _scaled_gold(gold: Optional[str], factor: int) -> str:
    if gold is None:
        return UNSOLVED_SENTINEL
    value = parse_numeric(normalize_answer(gold))
    if isinstance(value, Fraction):
        return str(value * factor)
    if isinstance(value, float):
        return repr(value * factor)
    return f"{gold} x{factor}"


# --------------------------------------------------------------------------
# Gateway backend

class SyntheticBackend:
    """Backend that scripts solve and mutation responses off the world.

    Requests are classified by their system prompt, then the problem text
    is recovered from the known template slots of the user message.
    """

    def __init__(
        self,
        world: SyntheticWorld,
        failure_rate: float = 0.0,
        echo_mutations: bool = False,
        library: Optional[PromptLibrary] = None,
    ):
        self.world = world
        self.failure_rate = failure_rate
        self.echo_mutations = echo_mutations
        self._library = library or PromptLibrary()
        self._solver_prompt = self._library.system_prompt("solve")
        self._teacher_prompt = self._library.system_prompt("setting")
        self._fallback_rng = derive_rng(world.config.seed, "backend")
        self._rng_lock = threading.Lock()

    def complete(self, request: ChatRequest) -> list[str]:
        system = next(
            (m["content"] for m in request.messages if m["role"] == "system"), ""
        )
        user = next(
            (m["content"] for m in request.messages if m["role"] == "user"), ""
        )
        rng = self._request_rng(request)
        if system == self._teacher_prompt:
            stage, question, gold, category = self._parse_mutation_prompt(user)
            text = mutate_response(
                self.world,
                stage,
                question,
                gold,
                category,
                rng,
                failure_rate=self.failure_rate,
                echo=self.echo_mutations,
            )
            return [text] * request.n
        # Anything else is treated as a solve request over the raw question.
        return solve_completions(self.world, user, request.n, rng)

    def _request_rng(self, request: ChatRequest) -> random.Random:
        if request.seed is not None:
            return derive_rng(self.world.config.seed, "request", request.seed)
        with self._rng_lock:
            return random.Random(self._fallback_rng.random())

    @staticmethod
    def _parse_mutation_prompt(user: str) -> tuple[str, str, Optional[str], Optional[str]]:
        category = None
        gold = None
        question_start = user.rfind("Word problem:")
        if question_start < 0:
            raise ValueError("mutation prompt lacks a word problem slot")
        body = user[question_start + len("Word problem:") :]
        if "Candidate context:" in user:
            stage = "setting"
            ctx_start = user.rfind("Candidate context:")
            ctx_end = user.find("\n", ctx_start)
            category = user[ctx_start + len("Candidate context:") : ctx_end].strip()
            question = body.strip()
        elif "\nSolution:" in body:
            stage = "symbolic"
            question, _, tail = body.partition("\nSolution:")
            question = question.strip()
            gold = tail.strip()
        else:
            stage = "distractor"
            question = body.strip()
        return stage, question, gold, category
