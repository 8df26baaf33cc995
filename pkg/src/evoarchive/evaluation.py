"""Batch evaluation of a solver on fixed datasets.

Produces mean accuracy with a 95% confidence half-width over pooled
trials, plus the tail-robustness curve: mean success over the hardest
alpha-fraction of items at each requested alpha.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ._rng import derive_rng
from .gateway import ChatRequest, Priority
from .learnability import confidence_interval, cvar_accuracy, verify_answer
from .prompts import PromptLibrary

DEFAULT_ALPHAS = (0.05, 0.1, 0.2, 0.5, 1.0)


class DatasetParseError(Exception):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


class DuplicateIndex(Exception):
    def __init__(self, index: int):
        super().__init__(f"duplicate item index {index}")
        self.index = index


@dataclass(frozen=True)
class EvalItem:
    index: int
    question: str
    gold_answer: str
    tags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EvalDataset:
    name: str
    items: tuple[EvalItem, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("dataset must be non-empty")


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    item_rates: tuple[float, ...]
    mean_accuracy: float
    ci_half_width: float
    cvar_curve: tuple[tuple[float, float], ...]
    samples_per_item: int

    def to_records(self) -> list[dict]:
        """Line-delimited form: one record per item plus a summary record."""
        records = [
            {"kind": "item", "index": i, "success_rate": rate}
            for i, rate in enumerate(self.item_rates)
        ]
        records.append(
            {
                "kind": "summary",
                "dataset": self.dataset,
                "items": len(self.item_rates),
                "samples_per_item": self.samples_per_item,
                "mean_accuracy": self.mean_accuracy,
                "ci_half_width": self.ci_half_width,
                "cvar_curve": [list(pair) for pair in self.cvar_curve],
            }
        )
        return records


def load_dataset(path: Path | str, name: Optional[str] = None) -> EvalDataset:
    """Read a line-delimited dataset (index, question, answer, tags)."""
    path = Path(path)
    items: list[EvalItem] = []
    seen: set[int] = set()
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(line_number, f"invalid record: {exc.msg}")
            for required in ("index", "question", "answer"):
                if required not in record:
                    raise DatasetParseError(line_number, f"missing field {required!r}")
            index = record["index"]
            if index in seen:
                raise DuplicateIndex(index)
            seen.add(index)
            items.append(
                EvalItem(
                    index=index,
                    question=record["question"],
                    gold_answer=str(record["answer"]),
                    tags=record.get("tags", {}),
                )
            )
    if not items:
        raise DatasetParseError(0, "dataset file holds no items")
    return EvalDataset(name=name or path.stem, items=tuple(items))


def save_dataset(dataset: EvalDataset, path: Path | str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for item in dataset.items:
            handle.write(
                json.dumps(
                    {
                        "index": item.index,
                        "question": item.question,
                        "answer": item.gold_answer,
                        "tags": item.tags,
                    }
                )
                + "\n"
            )


def evaluate_dataset(
    dataset: EvalDataset,
    gateway,
    samples_per_item: int = 1,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    library: Optional[PromptLibrary] = None,
    master_seed: int = 0,
) -> EvalReport:
    """Solve every item samples_per_item times and assemble the report.

    Items are submitted up front so the gateway's in-flight bound sets the
    concurrency; assembly is deterministic in item order.
    """
    if samples_per_item < 1:
        raise ValueError("samples_per_item must be >= 1")
    lib = library or PromptLibrary()
    futures = []
    for position, item in enumerate(dataset.items):
        messages = lib.render("solve", item.question)
        request = ChatRequest(
            messages=tuple(messages),
            n=samples_per_item,
            priority=Priority.SCORING,
            seed=derive_rng(master_seed, "eval", dataset.name, position).randrange(2**63),
        )
        futures.append(gateway.submit(request))
    rates: list[float] = []
    total_successes = 0
    for item, future in zip(dataset.items, futures):
        texts = future.result()
        successes = sum(1 for t in texts if verify_answer(t, item.gold_answer))
        total_successes += successes
        rates.append(successes / samples_per_item)
    mean_accuracy = sum(rates) / len(rates)
    half_width = confidence_interval(
        total_successes, samples_per_item * len(dataset.items)
    )
    curve = tuple(
        (alpha, cvar_accuracy(rates, alpha)) for alpha in sorted(alphas)
    )
    return EvalReport(
        dataset=dataset.name,
        item_rates=tuple(rates),
        mean_accuracy=mean_accuracy,
        ci_half_width=half_width,
        cvar_curve=curve,
        samples_per_item=samples_per_item,
    )


def write_report(report: EvalReport, path: Path | str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in report.to_records():
            handle.write(json.dumps(record) + "\n")
