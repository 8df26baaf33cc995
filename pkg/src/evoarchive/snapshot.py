"""Line-delimited archive snapshots with a versioned header.

One header record (schema version, config, global step) followed by one
record per occupant in canonical order. Writing is deterministic, so
identical archives produce identical bytes; reading an unknown schema
fails loudly instead of migrating.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .archive import Archive, ArchiveConfig
from .problems import Problem

SCHEMA_VERSION = 1


class SchemaVersionMismatch(Exception):
    pass


def write_snapshot(archive: Archive, path: Path | str) -> None:
    config, global_step, occupants = archive.export_state()
    path = Path(path)
    lines = [
        json.dumps(
            {
                "kind": "header",
                "schema_version": SCHEMA_VERSION,
                "global_step": global_step,
                "config": asdict(config),
            }
        )
    ]
    lines.extend(json.dumps(p.to_record()) for p in occupants)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_snapshot(path: Path | str, tie_break_seed: int = 0) -> Archive:
    path = Path(path)
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    if not lines:
        raise SchemaVersionMismatch("snapshot file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise SchemaVersionMismatch("snapshot header is not a valid record")
    if header.get("kind") != "header" or header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"expected schema version {SCHEMA_VERSION}, "
            f"got {header.get('schema_version')!r}"
        )
    config = ArchiveConfig(**header["config"])
    archive = Archive(config, tie_break_seed=tie_break_seed)
    archive.global_step = header["global_step"]
    for line in lines[1:]:
        problem = Problem.from_record(json.loads(line))
        archive._cells[problem.setting].append(problem)
    archive.check_invariants()
    return archive
