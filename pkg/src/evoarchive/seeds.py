"""Built-in seed problem generator.

Produces small arithmetic word problems with exact integer answers across
all eight setting categories, so synthetic-backend runs need no external
seed file. Real deployments load pre-classified seeds from disk instead.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import random

from .problems import SETTINGS, Problem

# One (template, answer) recipe per category; slots a, b, c are integers.
_RECIPES = {
    "Personal Life": (
        "A family packs {a} boxes with {b} books each and keeps {c} books "
        "on the shelf. How many books do they have in total?",
        lambda a, b, c: a * b + c,
    ),
    "Professional": (
        "A clerk files {a} reports every day for {b} days and then files "
        "{c} more. How many reports are filed altogether?",
        lambda a, b, c: a * b + c,
    ),
    "Economic": (
        "A shop sells {a} crates at {b} dollars each and pays a fee of "
        "{c} dollars. How many dollars remain?",
        lambda a, b, c: a * b - c,
    ),
    "Recreational": (
        "A team scores {a} points in each of {b} games and loses {c} "
        "points to penalties. What is the final score?",
        lambda a, b, c: a * b - c,
    ),
    "Events": (
        "A hall seats {a} rows of {b} chairs and {c} extra chairs are "
        "added. How many chairs are there?",
        lambda a, b, c: a * b + c,
    ),
    "Scientific": (
        "An experiment records {a} readings per trial over {b} trials, "
        "discarding {c} faulty readings. How many readings remain?",
        lambda a, b, c: a * b - c,
    ),
    "Technical": (
        "A machine produces {a} parts per cycle across {b} cycles, and "
        "{c} parts fail inspection. How many parts pass?",
        lambda a, b, c: a * b - c,
    ),
    "Environmental": (
        "Volunteers plant {a} saplings along each of {b} trails and {c} "
        "more by the river. How many saplings are planted?",
        lambda a, b, c: a * b + c,
    ),
}


def generate_seed_problems(
    count: int, rng: random.Random, id_prefix: str = "seed"
) -> list[Problem]:
    """Deterministic seed pool; categories cycle so all eight get covered."""
    if count < 1:
        raise ValueError("count must be >= 1")
    problems = []
    for i in range(count):
        setting = SETTINGS[i % len(SETTINGS)]
        template, solve = _RECIPES[setting]
        a = rng.randint(3, 40)
        b = rng.randint(2, 12)
        c = rng.randint(1, min(a * b - 1, 30))
        question = template.format(a=a, b=b, c=c)
        problems.append(
            Problem(
                id=f"{id_prefix}-{i:04d}",
                question=question,
                gold_answer=str(solve(a, b, c)),
                setting=setting,
            )
        )
    return problems


def load_seed_problems(path: Path | str) -> list[Problem]:
    """Seed file format: one JSON record per line.

    Required fields: id, question, gold_answer (or answer), setting.
    """
    path = Path(path)
    problems = []
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"seed file line {line_number}: {exc.msg}")
            gold = record.get("gold_answer", record.get("answer"))
            if gold is None:
                raise ValueError(f"seed file line {line_number}: missing answer")
            problems.append(
                Problem(
                    id=str(record.get("id", f"seed-{line_number:04d}")),
                    question=record["question"],
                    gold_answer=str(gold),
                    setting=record["setting"],
                )
            )
    if not problems:
        raise ValueError("seed file holds no problems")
    return problems


def save_seed_problems(problems: Sequence[Problem], path: Path | str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for p in problems:
            handle.write(
                json.dumps(
                    {
                        "id": p.id,
                        "question": p.question,
                        "gold_answer": p.gold_answer,
                        "setting": p.setting,
                    }
                )
                + "\n"
            )
