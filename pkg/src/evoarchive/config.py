"""Engine configuration: defaults, file loading, and rendering.

The evolution section mirrors the published hyperparameter names exactly
(cell_size, ignore_top_k, score_decay, score_alpha, bleu_threshold,
resample_prob, structure_probs, max_tries, mutation_batch_size,
num_generations); a rendered default config is pinned by a golden test.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .archive import ArchiveConfig
from .evolution import EvolutionConfig
from .gateway import RemoteBackendConfig
from .mutation import MutationConfig
from .synthetic import SyntheticWorldConfig

DEFAULTS: dict = {
    "random_seed": 0,
    "seed_path": None,
    "seed_count": 64,
    "snapshot_path": None,
    "template_dir": None,
    "evolution": {
        "cell_size": 4,
        "ignore_top_k": 6,
        "score_decay": 0.95,
        "score_alpha": 0.5,
        "bleu_threshold": 0.6,
        "resample_prob": 0.25,
        "structure_probs": {
            "distractor": 0.4,
            "symbolic": 0.4,
            "both": 0.2,
            "none": 0.0,
        },
        "max_tries": 5,
        "mutation_batch_size": 8,
        "num_generations": 6,
        "depth_penalty_gamma": 0.8,
        "refresh_fraction": 0.05,
        "refresh_period": 50,
        "rounds": 100,
        "mutator_profile": "A",
        "ignore_top_k_mode": "batch",
    },
    "gateway": {
        "backend": "synthetic",
        "endpoint_url": "http://localhost:8000/v1/chat/completions",
        "model": "default",
        "timeout": 120.0,
        "max_attempts": 3,
        "max_in_flight": 8,
        "temperature": 0.7,
        "scoring_temperature": 0.7,
        "max_tokens": 1024,
    },
    "synthetic": {
        "ability": 0.0,
        "difficulty_mu": 0.0,
        "difficulty_sigma": 1.5,
        "learn_rate": 0.2,
        "shift_sigma": 0.5,
        "failure_rate": 0.0,
    },
    "trainer": {
        "batch_size": 6,
        "steps_per_round": 1,
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8321,
    },
}


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in merged:
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass
class EngineConfig:
    """Validated view over the nested config mapping."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self) -> None:
        # Construct every sub-config once so bad values fail at load time.
        self.archive_config()
        self.mutation_config()
        self.evolution_config()
        self.synthetic_config()

    @classmethod
    def default(cls) -> "EngineConfig":
        return cls()

    @classmethod
    def from_dict(cls, override: dict) -> "EngineConfig":
        return cls(_merge(DEFAULTS, override or {}))

    @classmethod
    def from_file(cls, path: Path | str) -> "EngineConfig":
        with Path(path).open(encoding="utf-8") as handle:
            loaded = yaml.safe_load(handle) or {}
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a mapping")
        return cls.from_dict(loaded)

    def render(self) -> dict:
        """The full effective config as a plain mapping."""
        return copy.deepcopy(self.data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.render(), sort_keys=False)

    # ------------------------------------------------------------- sections

    @property
    def random_seed(self) -> int:
        return self.data["random_seed"]

    @property
    def seed_path(self) -> Optional[str]:
        return self.data["seed_path"]

    @property
    def seed_count(self) -> int:
        return self.data["seed_count"]

    @property
    def snapshot_path(self) -> Optional[str]:
        return self.data["snapshot_path"]

    @property
    def template_dir(self) -> Optional[str]:
        return self.data["template_dir"]

    def archive_config(self) -> ArchiveConfig:
        evo = self.data["evolution"]
        return ArchiveConfig(
            cell_size=evo["cell_size"],
            score_decay=evo["score_decay"],
            score_alpha=evo["score_alpha"],
            ignore_top_k=evo["ignore_top_k"],
            depth_penalty_gamma=evo["depth_penalty_gamma"],
            refresh_fraction=evo["refresh_fraction"],
            ignore_top_k_mode=evo["ignore_top_k_mode"],
        )

    def mutation_config(self) -> MutationConfig:
        evo = self.data["evolution"]
        gw = self.data["gateway"]
        return MutationConfig(
            resample_prob=evo["resample_prob"],
            structure_probs=dict(evo["structure_probs"]),
            bleu_threshold=evo["bleu_threshold"],
            max_tries=evo["max_tries"],
            mutator_profile=evo["mutator_profile"],
            max_tokens=gw["max_tokens"],
            temperature=gw["temperature"],
        )

    def evolution_config(self) -> EvolutionConfig:
        evo = self.data["evolution"]
        gw = self.data["gateway"]
        return EvolutionConfig(
            mutation_batch_size=evo["mutation_batch_size"],
            rounds=evo["rounds"],
            refresh_period=evo["refresh_period"],
            scoring_k=evo["num_generations"],
            scoring_temperature=gw["scoring_temperature"],
            scoring_max_tokens=gw["max_tokens"],
        )

    def remote_backend_config(self) -> RemoteBackendConfig:
        gw = self.data["gateway"]
        return RemoteBackendConfig(
            endpoint_url=gw["endpoint_url"],
            model=gw["model"],
            timeout=gw["timeout"],
            max_attempts=gw["max_attempts"],
        )

    def synthetic_config(self) -> SyntheticWorldConfig:
        syn = self.data["synthetic"]
        return SyntheticWorldConfig(
            ability=syn["ability"],
            difficulty_mu=syn["difficulty_mu"],
            difficulty_sigma=syn["difficulty_sigma"],
            learn_rate=syn["learn_rate"],
            shift_sigma=syn["shift_sigma"],
            seed=self.random_seed,
        )
