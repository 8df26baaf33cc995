"""Prompt template assets and chat-message rendering.

Templates live as plain text files with ``{{ placeholder }}`` slots and are
shipped verbatim; an alternate directory can be supplied for customized
prompt sets.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from .problems import Problem

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "prompts"

MUTATION_STAGES = ("setting", "distractor", "symbolic")
STAGES = MUTATION_STAGES + ("solve",)

_STAGE_FILES = {
    "setting": "mutate_setting.txt",
    "distractor": "mutate_distractor.txt",
    "symbolic": "mutate_symbolic.txt",
}


class PromptLibrary:
    """Loads and renders the prompt templates from one directory."""

    def __init__(self, directory: Optional[Path] = None):
        self.directory = Path(directory) if directory else DEFAULT_TEMPLATE_DIR
        self._cache: dict[str, str] = {}

    def raw(self, filename: str) -> str:
        if filename not in self._cache:
            self._cache[filename] = (self.directory / filename).read_text(
                encoding="utf-8"
            )
        return self._cache[filename]

    def system_prompt(self, stage: str) -> str:
        name = "system_solver.txt" if stage == "solve" else "system_teacher.txt"
        return self.raw(name).rstrip("\n")

    def user_prompt(
        self,
        stage: str,
        question: str,
        target_category: Optional[str] = None,
        solution: Optional[str] = None,
    ) -> str:
        if stage == "solve":
            return question
        template = self.raw(_STAGE_FILES[stage])
        substitutions = {"word_problem": question}
        if stage == "setting":
            substitutions["candidate_context"] = target_category
        if stage == "symbolic":
            substitutions["solution"] = solution
        return _substitute(template, substitutions)

    def render(
        self,
        stage: str,
        question: str,
        target_category: Optional[str] = None,
        solution: Optional[str] = None,
    ) -> list[dict]:
        """[system, user] messages for one stage."""
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        return [
            {"role": "system", "content": self.system_prompt(stage)},
            {
                "role": "user",
                "content": self.user_prompt(stage, question, target_category, solution),
            },
        ]


def _substitute(template: str, substitutions: dict[str, Optional[str]]) -> str:
    rendered = template
    for name, value in substitutions.items():
        if value is None:
            raise ValueError(f"missing value for placeholder {name!r}")
        rendered = rendered.replace("{{ " + name + " }}", value)
    return rendered


def render_prompt(
    stage: str,
    parent: Problem,
    target_category: Optional[str] = None,
    library: Optional[PromptLibrary] = None,
) -> list[dict]:
    """Render a stage prompt for one problem with the default templates."""
    lib = library or PromptLibrary()
    return lib.render(
        stage,
        parent.question,
        target_category=target_category,
        solution=parent.gold_answer,
    )
