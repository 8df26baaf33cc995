"""Setting-keyed elite archive with learnability fitness.

Each of the eight setting categories owns one cell holding up to
``cell_size`` occupants. Candidates enter a full cell only by strictly
beating its weakest occupant. Scores decay exponentially per trainer step
and are refreshed whenever an item reappears in a training batch, so the
archive tracks the solver's current frontier.

All public operations are atomic: the archive is shared by an evolution
writer and a trainer-side sampler running on separate threads.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import random

from .learnability import LearnabilityEstimate
from .problems import SETTINGS, Problem

PARENT_WEIGHT_FLOOR = 1e-6
BATCH_WEIGHT_FLOOR = 1e-6

IGNORE_TOP_K_MODES = ("batch", "parent", "target")


@dataclass(frozen=True)
class ArchiveConfig:
    cell_size: int = 4
    score_decay: float = 0.95
    score_alpha: float = 0.5
    ignore_top_k: int = 6
    depth_penalty_gamma: float = 0.8
    refresh_fraction: float = 0.05
    ignore_top_k_mode: str = "batch"

    def __post_init__(self) -> None:
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")
        if not 0.0 < self.score_decay <= 1.0:
            raise ValueError("score_decay must be in (0, 1]")
        if not 0.0 <= self.score_alpha <= 1.0:
            raise ValueError("score_alpha must be in [0, 1]")
        if self.ignore_top_k < 0:
            raise ValueError("ignore_top_k must be >= 0")
        if not 0.0 < self.depth_penalty_gamma <= 1.0:
            raise ValueError("depth_penalty_gamma must be in (0, 1]")
        if not 0.0 <= self.refresh_fraction <= 1.0:
            raise ValueError("refresh_fraction must be in [0, 1]")
        if self.ignore_top_k_mode not in IGNORE_TOP_K_MODES:
            raise ValueError(f"ignore_top_k_mode must be one of {IGNORE_TOP_K_MODES}")


class InsertOutcome(Enum):
    INSERTED = "inserted"
    REJECTED_LOW_SCORE = "rejected_low_score"


def _minmax(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi <= lo:
        return [1.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def _weighted_sample_without_replacement(
    items: list[Problem], weights: list[float], count: int, rng: random.Random
) -> list[Problem]:
    pool = list(zip(items, weights))
    picked: list[Problem] = []
    for _ in range(count):
        total = sum(w for _, w in pool)
        u = rng.random() * total
        acc = 0.0
        chosen = len(pool) - 1
        for i, (_, w) in enumerate(pool):
            acc += w
            if u < acc:
                chosen = i
                break
        picked.append(pool.pop(chosen)[0])
    return picked


class Archive:
    """The shared elite grid. One cell per setting category."""

    def __init__(self, config: ArchiveConfig, tie_break_seed: int = 0):
        self.config = config
        self.global_step = 0
        self.refresh_miss_count = 0
        self._cells: dict[str, list[Problem]] = {s: [] for s in SETTINGS}
        self._refresh_epoch = 0
        self._rng = random.Random(tie_break_seed)
        self._lock = threading.RLock()

    # ---------------------------------------------------------------- basics

    def __len__(self) -> int:
        with self._lock:
            return sum(len(cell) for cell in self._cells.values())

    def occupants(self) -> list[Problem]:
        """Flat occupant list in canonical category-then-cell order."""
        with self._lock:
            return [p for s in SETTINGS for p in self._cells[s]]

    def cell(self, setting: str) -> list[Problem]:
        with self._lock:
            return list(self._cells[setting])

    def contains_id(self, problem_id: str) -> bool:
        with self._lock:
            return any(p.id == problem_id for c in self._cells.values() for p in c)

    # ------------------------------------------------------------ operations

    def insert(self, candidate: Problem, score: float) -> InsertOutcome:
        """Place a scored candidate in its category's cell.

        Empty or non-full cells accept unconditionally; full cells evict
        the minimum-score occupant only on a strict improvement (ties
        reject; tied minima are evicted uniformly at random).
        """
        if not math.isfinite(score) or score < 0.0:
            raise ValueError(f"score must be finite and >= 0, got {score}")
        with self._lock:
            if self.contains_id(candidate.id):
                raise ValueError(f"duplicate problem id {candidate.id!r}")
            candidate.score = score
            cell = self._cells[candidate.setting]
            if len(cell) < self.config.cell_size:
                cell.append(candidate)
                return InsertOutcome.INSERTED
            min_score = min(p.score for p in cell)
            if score > min_score:
                losers = [i for i, p in enumerate(cell) if p.score == min_score]
                cell.pop(self._rng.choice(losers))
                cell.append(candidate)
                return InsertOutcome.INSERTED
            return InsertOutcome.REJECTED_LOW_SCORE

    def select_parent(self, rng: random.Random) -> Problem:
        """Draw a mutation parent, favouring high scores, penalizing depth.

        Weight is score * gamma^depth with a small floor so zero-score
        items stay reachable.
        """
        with self._lock:
            pool = self.occupants()
            if not pool:
                raise ValueError("cannot select a parent from an empty archive")
            if self.config.ignore_top_k_mode == "parent":
                pool = self._without_top_k(pool)
            gamma = self.config.depth_penalty_gamma
            weights = [
                max(p.score * gamma**p.depth, PARENT_WEIGHT_FLOOR) for p in pool
            ]
            return rng.choices(pool, weights=weights, k=1)[0]

    def select_target_category(self, rng: random.Random) -> str:
        """Category most in need of new material.

        Empty cells win outright (uniform among them); otherwise the cell
        with the lowest mean occupant score, ties uniform.
        """
        with self._lock:
            empty = [s for s in SETTINGS if not self._cells[s]]
            if empty:
                return rng.choice(empty)
            scoring_pool = None
            if self.config.ignore_top_k_mode == "target":
                scoring_pool = {id(p) for p in self._without_top_k(self.occupants())}
            means: dict[str, float] = {}
            for s in SETTINGS:
                cell = self._cells[s]
                if scoring_pool is not None:
                    kept = [p.score for p in cell if id(p) in scoring_pool]
                    means[s] = sum(kept) / len(kept) if kept else 0.0
                else:
                    means[s] = sum(p.score for p in cell) / len(cell)
            lowest = min(means.values())
            candidates = [s for s in SETTINGS if means[s] == lowest]
            return rng.choice(candidates)

    def sample_training_batch(
        self, n: int, step: int, rng: random.Random
    ) -> list[Problem]:
        """Draw a training batch mixing learnability and recency.

        The ignore_top_k highest-score occupants sit out (skipped when
        that would empty the pool). Weight is
        alpha * normalized score + (1 - alpha) * normalized 1/(1 + age),
        floored at 1e-6. Draws are without replacement; a batch larger
        than the pool wraps with replacement for the remainder.
        """
        if n < 1:
            raise ValueError("batch size must be >= 1")
        with self._lock:
            occupants = self.occupants()
            if not occupants:
                raise ValueError("cannot sample from an empty archive")
            pool = occupants
            if self.config.ignore_top_k_mode == "batch":
                pool = self._without_top_k(occupants)
            alpha = self.config.score_alpha
            scores = _minmax([p.score for p in pool])
            recency = _minmax(
                [1.0 / (1.0 + max(0, step - p.birth_step)) for p in pool]
            )
            weights = [
                max(alpha * s + (1.0 - alpha) * r, BATCH_WEIGHT_FLOOR)
                for s, r in zip(scores, recency)
            ]
            head = _weighted_sample_without_replacement(
                pool, weights, min(n, len(pool)), rng
            )
            if n <= len(pool):
                return head
            tail = rng.choices(pool, weights=weights, k=n - len(pool))
            return head + tail

    def decay_and_refresh(
        self,
        step: int,
        refreshed: Iterable[tuple[str, LearnabilityEstimate]] = (),
    ) -> tuple[int, int]:
        """Advance to *step*: decay every score, then overwrite refreshed ids.

        Ids no longer present (evicted between sampling and refresh) are
        counted, not raised. Returns (applied, ignored).
        """
        with self._lock:
            if step < self.global_step:
                raise ValueError(
                    f"step {step} behind archive step {self.global_step}"
                )
            delta = step - self.global_step
            if delta > 0:
                factor = self.config.score_decay**delta
                for cell in self._cells.values():
                    for p in cell:
                        p.score *= factor
            by_id = {p.id: p for c in self._cells.values() for p in c}
            applied = ignored = 0
            for problem_id, estimate in refreshed:
                target = by_id.get(problem_id)
                if target is None:
                    self.refresh_miss_count += 1
                    ignored += 1
                    continue
                target.score = estimate.l_hat
                target.last_refresh_step = step
                applied += 1
            self.global_step = step
            return applied, ignored

    def refresh_from_seed(
        self, seed_set: Sequence[Problem], rng: random.Random
    ) -> int:
        """Swap a small fraction of occupants for clean seed copies.

        A drawn seed replaces the chosen occupant in place when their
        settings agree; otherwise the occupant is dropped and the seed
        copy competes in its own category's cell under insert semantics.
        Replacements restart at depth 0 with score 0 pending refresh.
        """
        if not seed_set:
            raise ValueError("seed_set must be non-empty")
        with self._lock:
            occupants = self.occupants()
            count = math.ceil(self.config.refresh_fraction * len(occupants))
            if count == 0:
                return 0
            self._refresh_epoch += 1
            chosen = rng.sample(occupants, count)
            for i, occupant in enumerate(chosen):
                seed = rng.choice(seed_set)
                fresh = Problem(
                    id=f"refresh{self._refresh_epoch}-{i}",
                    question=seed.question,
                    gold_answer=seed.gold_answer,
                    setting=seed.setting,
                    depth=0,
                    parent_id=None,
                    mutator_kind="resample",
                    birth_step=self.global_step,
                    score=0.0,
                )
                cell = self._cells[occupant.setting]
                slot = next(i for i, p in enumerate(cell) if p is occupant)
                if seed.setting == occupant.setting:
                    cell[slot] = fresh
                else:
                    cell.pop(slot)
                    self.insert(fresh, 0.0)
            return count

    # ------------------------------------------------------------- reporting

    def category_means(self) -> dict[str, float]:
        with self._lock:
            return {
                s: (sum(p.score for p in cell) / len(cell)) if cell else 0.0
                for s, cell in self._cells.items()
            }

    def stats(self) -> dict:
        """Point-in-time stats: per-category counts/means, depth histogram."""
        with self._lock:
            histogram: dict[str, int] = {}
            for p in self.occupants():
                key = str(p.depth)
                histogram[key] = histogram.get(key, 0) + 1
            return {
                "global_step": self.global_step,
                "total": len(self),
                "refresh_misses": self.refresh_miss_count,
                "per_category": {
                    s: {
                        "count": len(self._cells[s]),
                        "mean_score": (
                            sum(p.score for p in self._cells[s]) / len(self._cells[s])
                            if self._cells[s]
                            else 0.0
                        ),
                    }
                    for s in SETTINGS
                },
                "depth_histogram": histogram,
            }

    def export_state(self) -> tuple[ArchiveConfig, int, list[Problem]]:
        """Consistent snapshot of (config, global_step, occupant copies)."""
        with self._lock:
            copies = [Problem.from_record(p.to_record()) for p in self.occupants()]
            return self.config, self.global_step, copies

    def check_invariants(self) -> None:
        """Raise AssertionError on any structural violation."""
        with self._lock:
            seen: set[str] = set()
            for s, cell in self._cells.items():
                assert len(cell) <= self.config.cell_size, f"cell {s} over capacity"
                for p in cell:
                    assert p.setting == s, f"{p.id} filed under wrong category"
                    assert p.id not in seen, f"duplicate id {p.id}"
                    assert math.isfinite(p.score) and p.score >= 0.0, (
                        f"{p.id} score {p.score}"
                    )
                    seen.add(p.id)

    # -------------------------------------------------------------- internal

    def _without_top_k(self, occupants: list[Problem]) -> list[Problem]:
        k = self.config.ignore_top_k
        if k <= 0 or len(occupants) <= k:
            return occupants
        ranked = sorted(occupants, key=lambda p: (-p.score, p.id))
        excluded = {id(p) for p in ranked[:k]}
        return [p for p in occupants if id(p) not in excluded]


def seed_archive(
    seed_set: Sequence[Problem],
    config: ArchiveConfig,
    tie_break_seed: int = 0,
) -> Archive:
    """Build an archive from pre-classified seed problems.

    Overfull cells keep the cell_size highest-score seeds, ties broken by
    earliest id.
    """
    if not seed_set:
        raise ValueError("seed_set must be non-empty")
    for seed in seed_set:
        if not seed.question or not seed.gold_answer:
            raise ValueError(f"seed {seed.id!r} has an empty question or answer")
    archive = Archive(config, tie_break_seed=tie_break_seed)
    for setting in SETTINGS:
        group = [s for s in seed_set if s.setting == setting]
        group.sort(key=lambda p: (-p.score, p.id))
        # Stored copies: the caller's seed pool stays pristine for later
        # resampling while archive occupants decay and refresh in place.
        archive._cells[setting] = [
            Problem.from_record(p.to_record()) for p in group[: config.cell_size]
        ]
    return archive
