"""Wires config into a runnable engine and hosts the closed loops.

The engine owns the archive, gateway, and mutator, and exposes the
trainer-facing operations consumed by the HTTP service. `simulate` runs
the evolution loop and a simulated trainer in deterministic lockstep so
that identical seeds reproduce identical archives byte for byte.
"""
from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional, Sequence

from ._rng import derive_rng, derive_seed
from .archive import Archive, seed_archive
from .config import EngineConfig
from .evaluation import EvalDataset, EvalReport, evaluate_dataset
from .evolution import (
    EvolutionConfig,
    RoundReport,
    run_depth_chain_experiment,
    run_evolution,
    score_candidate,
)
from .gateway import (
    ChatRequest,
    InferenceGateway,
    Priority,
    RemoteBackend,
)
from .learnability import estimate_from_counts, verify_answer
from .mutation import Mutator
from .problems import Problem
from .prompts import PromptLibrary
from .seeds import generate_seed_problems, load_seed_problems
from .snapshot import write_snapshot
from .synthetic import SyntheticBackend, SyntheticWorld


class EmptyArchive(Exception):
    pass


class Engine:
    def __init__(
        self,
        config: EngineConfig,
        backend: Optional[str] = None,
        seed_problems: Optional[Sequence[Problem]] = None,
        failure_rate: Optional[float] = None,
    ):
        self.config = config
        self.backend_kind = backend or config.data["gateway"]["backend"]
        master = config.random_seed
        self.library = PromptLibrary(config.template_dir)

        if seed_problems is not None:
            self.seed_pool = list(seed_problems)
        elif config.seed_path:
            self.seed_pool = load_seed_problems(config.seed_path)
        else:
            self.seed_pool = generate_seed_problems(
                config.seed_count, derive_rng(master, "seeds")
            )

        self.world: Optional[SyntheticWorld] = None
        if self.backend_kind == "synthetic":
            self.world = SyntheticWorld(config.synthetic_config())
            for p in self.seed_pool:
                self.world.ensure_registered(p.question, p.gold_answer)
            rate = (
                failure_rate
                if failure_rate is not None
                else config.data["synthetic"]["failure_rate"]
            )
            backend_impl = SyntheticBackend(
                self.world, failure_rate=rate, library=self.library
            )
        elif self.backend_kind == "remote":
            backend_impl = RemoteBackend(config.remote_backend_config())
        else:
            raise ValueError(f"unknown backend {self.backend_kind!r}")

        self.gateway = InferenceGateway(
            backend_impl, max_in_flight=config.data["gateway"]["max_in_flight"]
        )
        self.archive: Archive = seed_archive(
            self.seed_pool,
            config.archive_config(),
            tie_break_seed=derive_seed(master, "archive-ties"),
        )
        self.mutator = Mutator(
            self.gateway, config.mutation_config(), self.seed_pool, self.library
        )
        self.evolution_config: EvolutionConfig = config.evolution_config()
        self._evolution_rng = derive_rng(master, "evolution")
        self._trainer_rng = derive_rng(master, "trainer")
        self._service_rng = derive_rng(master, "service")
        self._lock = threading.Lock()

    def close(self) -> None:
        self.gateway.close()

    # ------------------------------------------------------------ seed scores

    def score_all_occupants(self) -> int:
        """Initial learnability pass over every occupant."""
        estimates = []
        k = self.evolution_config.scoring_k
        step = self.archive.global_step
        for p in self.archive.occupants():
            rng = derive_rng(self.config.random_seed, "initial-score", p.id)
            estimates.append(
                (p.id, score_candidate(p, self.gateway, self.mutator, k, step, rng))
            )
        applied, _ = self.archive.decay_and_refresh(step, estimates)
        return applied

    # -------------------------------------------------------- trainer surface

    def fetch_batch(self, n: int, step: Optional[int] = None) -> dict:
        if n < 1:
            raise ValueError("n must be >= 1")
        if len(self.archive) == 0:
            raise EmptyArchive("archive holds no problems")
        at_step = self.archive.global_step if step is None else step
        with self._lock:
            batch = self.archive.sample_training_batch(n, at_step, self._service_rng)
        return {
            "problems": [
                {
                    "id": p.id,
                    "question": p.question,
                    "gold_answer": p.gold_answer,
                    "setting": p.setting,
                    "depth": p.depth,
                }
                for p in batch
            ],
            "global_step": self.archive.global_step,
        }

    def post_scores(self, step: int, results: Sequence[tuple[str, int, int]]) -> dict:
        """Apply decayed refresh from trainer rollout verdicts.

        Results with k < 2 are rejected individually; unknown ids count as
        ignored (eviction races are expected).
        """
        rejected = 0
        estimates = []
        for problem_id, k, successes in results:
            if k < 2 or not 0 <= successes <= k:
                rejected += 1
                continue
            estimates.append((problem_id, estimate_from_counts(k, successes, step)))
        applied, ignored = self.archive.decay_and_refresh(step, estimates)
        return {"applied": applied, "ignored": ignored, "rejected": rejected}

    # ------------------------------------------------------------------ loops

    def evolve(
        self,
        rounds: Optional[int] = None,
        stop: Optional[threading.Event] = None,
        log_path: Optional[Path | str] = None,
    ) -> list[RoundReport]:
        reports = []
        log = Path(log_path).open("a", encoding="utf-8") if log_path else None
        try:
            for report in run_evolution(
                self.archive,
                self.gateway,
                self.mutator,
                self.evolution_config,
                self._evolution_rng,
                stop=stop,
                rounds=rounds,
            ):
                reports.append(report)
                if log:
                    log.write(json.dumps(report.to_record()) + "\n")
                    log.flush()
        finally:
            if log:
                log.close()
        return reports

    def simulate(
        self,
        rounds: Optional[int] = None,
        log_path: Optional[Path | str] = None,
        snapshot_path: Optional[Path | str] = None,
        trainer_steps_per_round: Optional[int] = None,
    ) -> dict:
        """Closed loop against the synthetic backend.

        Evolution rounds and simulated trainer steps interleave on a fixed
        schedule (round, then trainer steps), which keeps runs bit-repeatable
        while both sides share the archive through its atomic operations.
        """
        if self.world is None:
            raise ValueError("simulate requires the synthetic backend")
        total = self.evolution_config.rounds if rounds is None else rounds
        per_round = (
            self.config.data["trainer"]["steps_per_round"]
            if trainer_steps_per_round is None
            else trainer_steps_per_round
        )
        batch_size = self.config.data["trainer"]["batch_size"]
        k = self.evolution_config.scoring_k

        self.score_all_occupants()
        reports = []
        log = Path(log_path).open("w", encoding="utf-8") if log_path else None
        try:
            for report in run_evolution(
                self.archive,
                self.gateway,
                self.mutator,
                self.evolution_config,
                self._evolution_rng,
                rounds=total,
            ):
                reports.append(report)
                if log:
                    log.write(json.dumps(report.to_record()) + "\n")
                for _ in range(per_round):
                    self._trainer_step(batch_size, k)
        finally:
            if log:
                log.close()
        if snapshot_path:
            write_snapshot(self.archive, snapshot_path)
        return {
            "rounds": len(reports),
            "global_step": self.archive.global_step,
            "ability": self.world.ability,
            "archive_total": len(self.archive),
            "inserted_total": sum(r.inserted for r in reports),
        }

    def _trainer_step(self, batch_size: int, k: int) -> None:
        step = self.archive.global_step + 1
        batch = self.archive.sample_training_batch(batch_size, step, self._trainer_rng)
        results = []
        for p in batch:
            texts = self.gateway.complete(
                ChatRequest(
                    messages=tuple(self.library.render("solve", p.question)),
                    n=k,
                    priority=Priority.TRAINING,
                    seed=self._trainer_rng.randrange(2**63),
                )
            )
            successes = sum(1 for t in texts if verify_answer(t, p.gold_answer))
            results.append((p.id, k, successes))
        self.post_scores(step, results)
        self.world.train_step(batch)

    def run_chains(
        self,
        seeds_count: int,
        depth: int,
    ) -> tuple[list, list]:
        seeds = generate_seed_problems(
            seeds_count, derive_rng(self.config.random_seed, "chain-seeds"),
            id_prefix="chain-seed",
        )
        if self.world is not None:
            for p in seeds:
                self.world.ensure_registered(p.question, p.gold_answer)
        return run_depth_chain_experiment(
            seeds,
            depth,
            self.gateway,
            self.mutator,
            scoring_k=self.evolution_config.scoring_k,
            master_seed=self.config.random_seed,
        )

    def evaluate(
        self,
        dataset: EvalDataset,
        samples_per_item: int = 1,
        alphas: Optional[Sequence[float]] = None,
    ) -> EvalReport:
        if self.world is not None:
            for item in dataset.items:
                self.world.ensure_registered(item.question, item.gold_answer)
        kwargs = {} if alphas is None else {"alphas": alphas}
        return evaluate_dataset(
            dataset,
            self.gateway,
            samples_per_item=samples_per_item,
            master_seed=self.config.random_seed,
            library=self.library,
            **kwargs,
        )
