"""Co-evolving archive of verifiable math word problems.

An elite archive over eight real-world setting categories is evolved by
LLM-guided mutation operators and scored by learnability, while a trainer
consumes batches and reports rollout verdicts over an HTTP API. A
deterministic synthetic backend stands in for a model server so the whole
loop runs on a desk.
"""
from .archive import Archive, ArchiveConfig, InsertOutcome, seed_archive
from .config import EngineConfig
from .engine import Engine
from .gateway import ChatRequest, InferenceGateway, Priority
from .learnability import (
    LearnabilityEstimate,
    cvar_accuracy,
    confidence_interval,
    estimate_learnability,
    extract_boxed,
    verify_answer,
)
from .mutation import MutationConfig, MutationPlan, Mutator, parse_mutator_response
from .problems import SETTINGS, Problem
from .synthetic import SyntheticBackend, SyntheticWorld, SyntheticWorldConfig

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "ArchiveConfig",
    "ChatRequest",
    "Engine",
    "EngineConfig",
    "InferenceGateway",
    "InsertOutcome",
    "LearnabilityEstimate",
    "MutationConfig",
    "MutationPlan",
    "Mutator",
    "Priority",
    "Problem",
    "SETTINGS",
    "SyntheticBackend",
    "SyntheticWorld",
    "SyntheticWorldConfig",
    "confidence_interval",
    "cvar_accuracy",
    "estimate_learnability",
    "extract_boxed",
    "parse_mutator_response",
    "seed_archive",
    "verify_answer",
    "__version__",
]
