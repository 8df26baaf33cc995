"""Problem records and the fixed setting-category axis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .learnability import normalize_answer, parse_numeric

# The eight real-world setting categories used as the archive's descriptor
# axis. Order is canonical and used for deterministic iteration everywhere.
SETTINGS: tuple[str, ...] = (
    "Personal Life",
    "Professional",
    "Economic",
    "Recreational",
    "Events",
    "Scientific",
    "Technical",
    "Environmental",
)

SETTING_SET = frozenset(SETTINGS)

MUTATOR_KINDS: tuple[str, ...] = (
    "seed",
    "resample",
    "setting",
    "distractor",
    "symbolic",
    "setting+distractor",
    "setting+symbolic",
    "setting+both",
)

# Kinds that start a fresh lineage at depth 0.
ROOT_KINDS = frozenset({"seed", "resample"})


@dataclass
class Problem:
    """One verifiable question-answer pair with lineage and a live score."""

    id: str
    question: str
    gold_answer: str
    setting: str
    depth: int = 0
    parent_id: Optional[str] = None
    mutator_kind: str = "seed"
    birth_step: int = 0
    score: float = 0.0
    last_refresh_step: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.setting not in SETTING_SET:
            raise ValueError(f"unknown setting category: {self.setting!r}")
        if self.mutator_kind not in MUTATOR_KINDS:
            raise ValueError(f"unknown mutator kind: {self.mutator_kind!r}")
        root = self.mutator_kind in ROOT_KINDS
        if root != (self.depth == 0):
            raise ValueError(
                f"depth {self.depth} inconsistent with mutator kind {self.mutator_kind!r}"
            )
        # Estimator-produced scores live in [0, SCORE_MAX]; caller-supplied
        # seed scores may exceed the clamp, so only the floor is structural.
        if not (math.isfinite(self.score) and self.score >= 0.0):
            raise ValueError(f"score must be finite and >= 0, got {self.score}")
        if self.last_refresh_step < 0:
            self.last_refresh_step = self.birth_step
        if self.last_refresh_step < self.birth_step:
            raise ValueError("last_refresh_step before birth_step")

    @property
    def gold_numeric(self) -> Optional[Fraction]:
        """Exact rational value of the gold answer, when it has one."""
        value = parse_numeric(normalize_answer(self.gold_answer))
        return value if isinstance(value, Fraction) else None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "setting": self.setting,
            "depth": self.depth,
            "parent_id": self.parent_id,
            "mutator_kind": self.mutator_kind,
            "birth_step": self.birth_step,
            "score": self.score,
            "last_refresh_step": self.last_refresh_step,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Problem":
        return cls(
            id=record["id"],
            question=record["question"],
            gold_answer=record["gold_answer"],
            setting=record["setting"],
            depth=record["depth"],
            parent_id=record.get("parent_id"),
            mutator_kind=record["mutator_kind"],
            birth_step=record["birth_step"],
            score=record["score"],
            last_refresh_step=record["last_refresh_step"],
        )
