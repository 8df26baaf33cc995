import random

import pytest

from evoarchive.archive import ArchiveConfig, seed_archive
from evoarchive.problems import SETTINGS, Problem
from evoarchive.seeds import generate_seed_problems
from evoarchive.synthetic import SyntheticWorld, SyntheticWorldConfig


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def seed_pool(rng):
    return generate_seed_problems(64, rng)


@pytest.fixture
def small_archive(seed_pool):
    return seed_archive(seed_pool, ArchiveConfig(), tie_break_seed=9)


@pytest.fixture
def world():
    return SyntheticWorld(SyntheticWorldConfig(seed=42))


def make_problem(
    id="p0",
    question="A shop sells 3 crates at 5 dollars each and pays a fee of 2 dollars. How many dollars remain?",
    gold="13",
    setting="Economic",
    **kwargs,
):
    return Problem(
        id=id, question=question, gold_answer=gold, setting=setting, **kwargs
    )


@pytest.fixture
def problem_factory():
    return make_problem
