"""Command-line entry points for every experiment mode."""
from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

import click
import yaml

from ._rng import derive_rng
from .config import EngineConfig
from .engine import Engine
from .evaluation import load_dataset, write_report
from .seeds import generate_seed_problems, load_seed_problems, save_seed_problems
from .snapshot import read_snapshot, write_snapshot


def _deep_update(base: dict, override: dict) -> dict:
    for key, value in override.items():
        if isinstance(base.get(key), dict) and isinstance(value, dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _build_config(
    config_path: Optional[str],
    seed_rng: Optional[int] = None,
    backend: Optional[str] = None,
    rounds: Optional[int] = None,
) -> EngineConfig:
    data: dict = {}
    if config_path:
        with open(config_path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    if seed_rng is not None:
        _deep_update(data, {"random_seed": seed_rng})
    if backend is not None:
        _deep_update(data, {"gateway": {"backend": backend}})
    if rounds is not None:
        _deep_update(data, {"evolution": {"rounds": rounds}})
    try:
        return EngineConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise click.ClickException(f"invalid config: {exc}")


config_option = click.option("--config", "config_path", type=click.Path(exists=True))
seed_rng_option = click.option("--seed-rng", type=int, default=None)
backend_option = click.option(
    "--backend", type=click.Choice(["remote", "synthetic"]), default=None
)


@click.group()
def main() -> None:
    """Evolving archive of verifiable math problems."""


@main.command()
@config_option
@seed_rng_option
@click.option("--seeds-file", type=click.Path(exists=True), default=None)
@click.option("--generate", "generate_count", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--dump-seeds", type=click.Path(), default=None)
def seed(config_path, seed_rng, seeds_file, generate_count, out_path, dump_seeds):
    """Build an archive from seed problems and write its snapshot."""
    cfg = _build_config(config_path, seed_rng)
    try:
        if seeds_file:
            problems = load_seed_problems(seeds_file)
        else:
            count = generate_count or cfg.seed_count
            problems = generate_seed_problems(
                count, derive_rng(cfg.random_seed, "seeds")
            )
        engine = Engine(cfg, seed_problems=problems)
        write_snapshot(engine.archive, out_path)
        if dump_seeds:
            save_seed_problems(problems, dump_seeds)
        engine.close()
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"seeded archive with {len(problems)} problems -> {out_path}")


@main.command()
@config_option
@seed_rng_option
@backend_option
@click.option("--rounds", type=int, default=None)
@click.option("--snapshot", "snapshot_path", type=click.Path(), default=None)
@click.option("--log", "log_path", type=click.Path(), default=None)
@click.option("--serve", is_flag=True, default=False)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--score-seeds", is_flag=True, default=False)
def evolve(
    config_path, seed_rng, backend, rounds, snapshot_path, log_path,
    serve, host, port, score_seeds,
):
    """Run the evolution loop, optionally serving the trainer API."""
    cfg = _build_config(config_path, seed_rng, backend, rounds)
    engine = Engine(cfg)
    try:
        if score_seeds:
            engine.score_all_occupants()
        if serve:
            _serve_while_evolving(engine, cfg, host, port, log_path)
        else:
            reports = engine.evolve(log_path=log_path)
            click.echo(
                f"completed {len(reports)} rounds, "
                f"inserted {sum(r.inserted for r in reports)} candidates"
            )
        if snapshot_path:
            write_snapshot(engine.archive, snapshot_path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    finally:
        engine.close()


def _serve_while_evolving(engine, cfg, host, port, log_path):
    import uvicorn

    from .service import create_app

    stop = threading.Event()
    worker = threading.Thread(
        target=engine.evolve,
        kwargs={"stop": stop, "log_path": log_path},
        daemon=True,
    )
    worker.start()
    try:
        uvicorn.run(
            create_app(engine),
            host=host or cfg.data["service"]["host"],
            port=port or cfg.data["service"]["port"],
            log_level="warning",
        )
    finally:
        stop.set()
        worker.join(timeout=10.0)


@main.command()
@config_option
@seed_rng_option
@click.option("--rounds", type=int, default=None)
@click.option(
    "--backend", type=click.Choice(["remote", "synthetic"]), default="synthetic"
)
@click.option("--snapshot", "snapshot_path", type=click.Path(), default="archive_snapshot.jsonl")
@click.option("--log", "log_path", type=click.Path(), default="round_log.jsonl")
def simulate(config_path, seed_rng, rounds, backend, snapshot_path, log_path):
    """Full closed loop: evolution plus a simulated trainer."""
    if backend != "synthetic":
        raise click.ClickException("simulate runs against the synthetic backend")
    cfg = _build_config(config_path, seed_rng, backend, rounds)
    engine = Engine(cfg)
    try:
        summary = engine.simulate(log_path=log_path, snapshot_path=snapshot_path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    finally:
        engine.close()
    click.echo(json.dumps(summary))


@main.command()
@config_option
@seed_rng_option
@backend_option
@click.option("--seeds", "seeds_count", type=int, default=200)
@click.option("--depth", type=int, default=10)
@click.option("--failure-rate", type=float, default=None)
@click.option("--profile", type=click.Choice(["S", "A"]), default=None)
@click.option("--out", "out_path", type=click.Path(), default="chain_table.jsonl")
def chains(config_path, seed_rng, backend, seeds_count, depth, failure_rate, profile, out_path):
    """Depth-chain experiment: repeated mutation without selection."""
    cfg = _build_config(config_path, seed_rng, backend)
    if profile is not None:
        cfg = EngineConfig.from_dict(
            _deep_update(cfg.render(), {"evolution": {"mutator_profile": profile}})
        )
    engine = Engine(cfg, failure_rate=failure_rate)
    try:
        rows, summaries = engine.run_chains(seeds_count, depth)
        with open(out_path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row.to_record()) + "\n")
            for summary in summaries:
                handle.write(json.dumps(summary.to_record()) + "\n")
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    finally:
        engine.close()
    early = sum(1 for s in summaries if s.terminated_early)
    click.echo(
        f"wrote {len(rows)} candidate rows over {len(summaries)} chains "
        f"({early} terminated early) -> {out_path}"
    )


@main.command("eval")
@config_option
@seed_rng_option
@backend_option
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--samples-per-item", type=int, default=1)
@click.option("--alphas", default=None, help="comma-separated, e.g. 0.05,0.1,1.0")
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_command(config_path, seed_rng, backend, dataset_path, samples_per_item, alphas, out_path):
    """Evaluate the configured solver on a dataset file."""
    cfg = _build_config(config_path, seed_rng, backend)
    engine = Engine(cfg)
    try:
        dataset = load_dataset(dataset_path)
        alpha_list = (
            [float(a) for a in alphas.split(",")] if alphas else None
        )
        report = engine.evaluate(dataset, samples_per_item, alpha_list)
        destination = out_path or f"{dataset_path}.report"
        write_report(report, destination)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    finally:
        engine.close()
    click.echo(
        f"accuracy {report.mean_accuracy:.4f} ± {report.ci_half_width:.4f} "
        f"over {len(report.item_rates)} items -> {destination}"
    )


@main.command()
@click.option("--snapshot", "snapshot_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def export(snapshot_path, out_path):
    """Dump stats for a stored archive snapshot."""
    try:
        archive = read_snapshot(snapshot_path)
    except Exception as exc:
        raise click.ClickException(str(exc))
    stats = json.dumps(archive.stats(), indent=2)
    if out_path:
        Path(out_path).write_text(stats + "\n", encoding="utf-8")
        click.echo(f"stats -> {out_path}")
    else:
        click.echo(stats)


if __name__ == "__main__":
    main()
