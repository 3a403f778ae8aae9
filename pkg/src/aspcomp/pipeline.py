"""select -> run -> verify -> score -> report, one directory per stage."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import ConfigError, StageError
from .ledger import Ledger, dumps
from .registry import Category, InstanceRef, Registry, ResourceLimits, TrackId, load_registry, select_instances
from .report import FORMATS, emit_reports, read_scores, write_scores
from .scheduler import RunRequest, schedule
from .scorer import ScoreRecord, score_competition, track_rankings
from .verifier import adjudicate, group_verdicts, read_verdicts, write_verdicts

log = logging.getLogger(__name__)

STAGE_DIRS = ("selection", "ledger", "verdicts", "scores", "reports")

Selection = dict[str, list[InstanceRef]]


@dataclass
class CompetitionConfig:
    registry_path: Path
    seed: str
    category: Category
    out_dir: Path
    tracks: frozenset[TrackId] = field(default_factory=lambda: frozenset(TrackId))
    instances_per_domain: Optional[int] = None
    limits: Mapping[str, object] = field(default_factory=dict)
    cores: Optional[int] = None
    formats: tuple[str, ...] = FORMATS
    checker_jobs: int = 1

    def __post_init__(self):
        if not self.tracks:
            raise ConfigError("no tracks selected")
        if self.instances_per_domain is not None and self.instances_per_domain < 1:
            raise ConfigError("instance count per domain must be >= 1")
        if not self.seed:
            raise ConfigError("seed must be non-empty")

    @property
    def paths(self) -> dict[str, Path]:
        return {
            "selection": self.out_dir / "selection" / "selection.jsonl",
            "ledger": self.out_dir / "ledger" / "ledger.jsonl",
            "verdicts": self.out_dir / "verdicts" / "verdicts.jsonl",
            "scores": self.out_dir / "scores" / "scores.jsonl",
            "reports": self.out_dir / "reports",
        }


def machine_cores() -> int:
    return len(os.sched_getaffinity(0))


def make_selection(
    registry: Registry, seed: str, n: Optional[int] = None, tracks: Iterable[TrackId] | None = None
) -> Selection:
    n = n or registry.instances_per_domain
    return {p.id: select_instances(p, n, seed) for p in sorted(registry.problems_in(tracks), key=lambda p: p.id)}


def selection_lines(selection: Selection) -> list[str]:
    return [f"{pid}/{ref.instance_id}" for pid, refs in selection.items() for ref in refs]


def write_selection(path: Path, selection: Selection, seed: str) -> None:
    text = "".join(
        dumps({"seed": seed, "problemId": pid, "instanceId": ref.instance_id, "digest": ref.digest, "order": i}) + "\n"
        for pid, refs in selection.items()
        for i, ref in enumerate(refs)
    )
    if path.exists():
        if path.read_text(encoding="utf-8") != text:
            raise ConfigError(f"{path} holds a different selection; use a fresh output directory")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def limits_for(registry: Registry, category: Category, overrides: Mapping[str, object]) -> ResourceLimits:
    try:
        return registry.limits[category].with_overrides(**overrides).for_category(category)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid limits: {exc}") from exc


def build_requests(
    registry: Registry, selection: Selection, category: Category, limits: ResourceLimits
) -> list[RunRequest]:
    requests = []
    for pid, refs in selection.items():
        problem = registry.problems[pid]
        for solver in sorted(registry.participants(problem, category), key=lambda s: s.id):
            for ref in refs:
                requests.append(RunRequest(solver, problem, ref, limits, registry.root))
    return requests


def run_stage(
    registry: Registry,
    seed: str,
    category: Category,
    ledger_path: Path,
    *,
    n: Optional[int] = None,
    tracks: Iterable[TrackId] | None = None,
    limits: Mapping[str, object] | None = None,
    cores: Optional[int] = None,
    selection: Selection | None = None,
):
    selection = selection if selection is not None else make_selection(registry, seed, n, tracks)
    run_limits = limits_for(registry, category, limits or {})
    requests = build_requests(registry, selection, category, run_limits)
    budget = cores or machine_cores()
    if run_limits.cores > budget:
        raise ConfigError(f"runs need {run_limits.cores} cores but only {budget} are available")
    return schedule(requests, budget, Ledger(ledger_path))


def verify_stage(registry: Registry, ledger_path: Path, verdicts_path: Path, *, jobs: int = 1) -> None:
    outcomes = Ledger(ledger_path).load()
    write_verdicts(verdicts_path, adjudicate(outcomes, registry, jobs=jobs), registry)


def score_stage(registry: Registry, verdicts_path: Path, scores_path: Path) -> list[ScoreRecord]:
    records = score_competition(group_verdicts(read_verdicts(verdicts_path)), registry)
    write_scores(scores_path, records)
    return records


def report_stage(scores_path: Path, out_dir: Path, formats: Iterable[str] = FORMATS) -> list[Path]:
    records = read_scores(scores_path)
    return emit_reports(records, track_rankings(records), out_dir, formats)


def run_competition(config: CompetitionConfig) -> int:
    """Run every stage, persisting each artifact; raises :class:`StageError`."""
    paths = config.paths
    try:
        registry = load_registry(config.registry_path)
    except Exception as exc:
        raise StageError("registry", exc) from exc

    stage = "selection"
    try:
        selection = make_selection(registry, config.seed, config.instances_per_domain, config.tracks)
        write_selection(paths["selection"], selection, config.seed)
        stage = "run"
        run_stage(
            registry,
            config.seed,
            config.category,
            paths["ledger"],
            limits=config.limits,
            cores=config.cores,
            selection=selection,
        )
        stage = "verify"
        verify_stage(registry, paths["ledger"], paths["verdicts"], jobs=config.checker_jobs)
        stage = "score"
        score_stage(registry, paths["verdicts"], paths["scores"])
        stage = "report"
        report_stage(paths["scores"], paths["reports"], config.formats)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return 0


def read_selection(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
