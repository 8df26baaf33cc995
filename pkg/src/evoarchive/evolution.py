"""The asynchronous teacher loop and the depth-chain analysis harness.

Each round launches a batch of candidate pipelines (select parent, plan,
mutate, score, insert). Pipelines run concurrently but their candidates
are inserted in slot order, so a fixed seed reproduces the archive
exactly. Pipeline failures are tallied per round, never fatal; a gateway
outage aborts only the current round.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import random

from ._rng import derive_rng
from .archive import Archive, InsertOutcome
from .gateway import ChatRequest, GatewayError, Priority
from .learnability import LearnabilityEstimate, estimate_learnability, verify_answer
from .mutation import (
    ExhaustedRetries,
    MutationPlan,
    Mutator,
    _draw_structure,
    plan_mutation,
)
from .problems import SETTINGS, Problem


@dataclass(frozen=True)
class EvolutionConfig:
    mutation_batch_size: int = 8
    rounds: int = 100
    refresh_period: int = 50
    scoring_k: int = 6
    scoring_temperature: float = 0.7
    scoring_max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.mutation_batch_size < 1:
            raise ValueError("mutation_batch_size must be >= 1")
        if self.scoring_k < 2:
            raise ValueError("scoring_k must be >= 2")
        if self.refresh_period < 1:
            raise ValueError("refresh_period must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


@dataclass
class RoundReport:
    round_index: int
    attempted: int = 0
    parsed: int = 0
    filtered: int = 0
    inserted: int = 0
    category_means: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def tally(self, kind: str) -> None:
        self.errors[kind] = self.errors.get(kind, 0) + 1

    def to_record(self) -> dict:
        return {
            "round": self.round_index,
            "attempted": self.attempted,
            "parsed": self.parsed,
            "filtered": self.filtered,
            "inserted": self.inserted,
            "category_means": self.category_means,
            "errors": self.errors,
        }


def score_candidate(
    candidate: Problem,
    gateway,
    mutator: Mutator,
    k: int,
    step: int,
    rng: random.Random,
    temperature: float = 0.7,
    max_tokens: int = 1024,
    priority: Priority = Priority.SCORING,
) -> LearnabilityEstimate:
    """Learnability of one candidate from k solve completions."""
    messages = mutator.library.render("solve", candidate.question)
    texts = gateway.complete(
        ChatRequest(
            messages=tuple(messages),
            n=k,
            max_tokens=max_tokens,
            temperature=temperature,
            priority=priority,
            seed=rng.randrange(2**63),
        )
    )
    verdicts = [verify_answer(t, candidate.gold_answer) for t in texts]
    return estimate_learnability(verdicts, step=step)


def _candidate_pipeline(
    slot: int,
    archive: Archive,
    gateway,
    mutator: Mutator,
    config: EvolutionConfig,
    round_index: int,
    pipeline_seed: int,
):
    """Returns (candidate, estimate) or a failure exception."""
    rng = random.Random(pipeline_seed)
    parent = archive.select_parent(rng)
    plan = plan_mutation(archive, mutator.config, rng)
    candidate = mutator.mutate(
        parent,
        plan,
        rng,
        candidate_id=f"r{round_index}s{slot}",
        birth_step=archive.global_step,
    )
    estimate = score_candidate(
        candidate,
        gateway,
        mutator,
        k=config.scoring_k,
        step=archive.global_step,
        rng=rng,
        temperature=config.scoring_temperature,
        max_tokens=config.scoring_max_tokens,
    )
    return candidate, estimate


def evolution_round(
    archive: Archive,
    gateway,
    mutator: Mutator,
    config: EvolutionConfig,
    rng: random.Random,
    round_index: int = 0,
    executor: Optional[ThreadPoolExecutor] = None,
) -> RoundReport:
    """One batch of candidate pipelines; raises GatewayError on an outage."""
    report = RoundReport(round_index=round_index)
    batch = config.mutation_batch_size
    report.attempted = batch
    pipeline_seeds = [rng.randrange(2**63) for _ in range(batch)]

    def run(slot: int):
        try:
            return _candidate_pipeline(
                slot, archive, gateway, mutator, config, round_index,
                pipeline_seeds[slot],
            )
        except (ExhaustedRetries, GatewayError) as exc:
            return exc

    if executor is None:
        with ThreadPoolExecutor(max_workers=batch) as pool:
            results = list(pool.map(run, range(batch)))
    else:
        results = list(executor.map(run, range(batch)))

    for outcome in results:
        if isinstance(outcome, GatewayError):
            raise outcome
        if isinstance(outcome, ExhaustedRetries):
            if outcome.parsed_attempts > 0:
                report.parsed += 1
            kind = type(outcome.last_failure).__name__
            report.tally(f"exhausted_retries:{kind}")
            continue
        candidate, estimate = outcome
        report.parsed += 1
        report.filtered += 1
        if archive.insert(candidate, estimate.l_hat) is InsertOutcome.INSERTED:
            report.inserted += 1
        else:
            report.tally("rejected_low_score")
    report.category_means = archive.category_means()
    return report


def run_evolution(
    archive: Archive,
    gateway,
    mutator: Mutator,
    config: EvolutionConfig,
    rng: random.Random,
    stop: Optional[threading.Event] = None,
    rounds: Optional[int] = None,
) -> Iterator[RoundReport]:
    """Round generator; refreshes from seed every refresh_period rounds.

    Runs for `rounds` (default config.rounds) or until `stop` is set.
    A gateway outage is reported for the round and retried on the next.
    """
    total = config.rounds if rounds is None else rounds
    with ThreadPoolExecutor(max_workers=config.mutation_batch_size) as pool:
        index = 0
        while index < total:
            if stop is not None and stop.is_set():
                return
            index += 1
            try:
                report = evolution_round(
                    archive, gateway, mutator, config, rng, index, executor=pool
                )
            except GatewayError as exc:
                report = RoundReport(round_index=index, attempted=config.mutation_batch_size)
                report.tally(f"gateway_unavailable:{type(exc).__name__}")
                report.category_means = archive.category_means()
            if index % config.refresh_period == 0:
                archive.refresh_from_seed(mutator.seed_pool, rng)
            yield report


@dataclass
class ChainRow:
    seed_id: str
    depth: int
    question: str
    answer: str
    score: float

    def to_record(self) -> dict:
        return {
            "kind": "candidate",
            "seed_id": self.seed_id,
            "depth": self.depth,
            "question": self.question,
            "answer": self.answer,
            "score": self.score,
        }


@dataclass
class ChainSummary:
    seed_id: str
    completed_depth: int
    requested_depth: int
    terminated_early: bool
    failure: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "kind": "chain",
            "seed_id": self.seed_id,
            "completed_depth": self.completed_depth,
            "requested_depth": self.requested_depth,
            "terminated_early": self.terminated_early,
            "failure": self.failure,
        }


def run_depth_chain_experiment(
    seeds: Sequence[Problem],
    depth: int,
    gateway,
    mutator: Mutator,
    scoring_k: int,
    master_seed: int = 0,
) -> tuple[list[ChainRow], list[ChainSummary]]:
    """Mutate each seed along a linear chain with no selection pressure.

    Every surviving candidate is scored and emitted; a hard mutation
    failure ends that seed's chain early and is recorded in its summary.
    With depth 0 the seeds themselves are echoed (scored, depth 0).
    """
    if not seeds:
        raise ValueError("seeds must be non-empty")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    rows: list[ChainRow] = []
    summaries: list[ChainSummary] = []
    for i, seed in enumerate(seeds):
        rng = derive_rng(master_seed, "chain", i)
        current = seed
        if depth == 0:
            estimate = _chain_score(seed, gateway, mutator, scoring_k, rng)
            rows.append(
                ChainRow(seed.id, 0, seed.question, seed.gold_answer, estimate.l_hat)
            )
            summaries.append(ChainSummary(seed.id, 0, 0, terminated_early=False))
            continue
        failure = None
        reached = 0
        for d in range(1, depth + 1):
            plan = _chain_plan(mutator, rng)
            try:
                current = mutator.mutate(
                    current, plan, rng, candidate_id=f"c{i}d{d}", birth_step=0
                )
            except ExhaustedRetries as exc:
                failure = type(exc.last_failure).__name__
                break
            estimate = _chain_score(current, gateway, mutator, scoring_k, rng)
            rows.append(
                ChainRow(
                    seed.id, d, current.question, current.gold_answer, estimate.l_hat
                )
            )
            reached = d
        summaries.append(
            ChainSummary(
                seed.id,
                reached,
                depth,
                terminated_early=reached < depth,
                failure=failure,
            )
        )
    return rows, summaries


def _chain_plan(mutator: Mutator, rng: random.Random) -> MutationPlan:
    # Chains measure mutation depth, so resampling is excluded; the target
    # category is drawn uniformly since no archive is involved.
    target = rng.choice(SETTINGS)
    distractor = symbolic = False
    if mutator.config.mutator_profile == "A":
        outcome = _draw_structure(mutator.config.structure_probs, rng)
        distractor = outcome in ("distractor", "both")
        symbolic = outcome in ("symbolic", "both")
    return MutationPlan(
        kind="llm_chain",
        target_category=target,
        apply_distractor=distractor,
        apply_symbolic=symbolic,
    )


def _chain_score(
    problem: Problem, gateway, mutator: Mutator, scoring_k: int, rng: random.Random
) -> LearnabilityEstimate:
    return score_candidate(
        problem, gateway, mutator, k=scoring_k, step=0, rng=rng
    )
