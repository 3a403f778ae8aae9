"""Benchmark suite and participant roster.

A registry document is YAML (JSON is accepted too, being a YAML subset).
Relative paths inside it resolve against the document's directory.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from .errors import RegistryLoadError, RegistryValidationError
from .selection import seeded_sample

DEFAULT_INSTANCES_PER_DOMAIN = 20
MAX_MP_CORES = 8


class FeatureTag(str, enum.Enum):
    BASIC = "basic"
    AGGR = "aggr"
    CHOICE = "choice"
    CHOICE_BOUNDED = "choiceBounded"
    DISJ = "disj"
    NON_HCF_DISJ = "nonHcfDisj"
    NONTIGHT = "nontight"
    LEVEL = "level"


class ProblemKind(str, enum.Enum):
    DECISION = "D"
    QUERY = "Q"
    OPTIMIZATION = "O"


class TrackId(str, enum.Enum):
    T1 = "T1_BasicDecision"
    T2 = "T2_AdvancedDecision"
    T3 = "T3_Optimization"
    T4 = "T4_Unrestricted"

    @property
    def short(self) -> str:
        return self.value[:2]

    @property
    def rank(self) -> int:
        return int(self.value[1])

    def __lt__(self, other):
        if not isinstance(other, TrackId):
            return NotImplemented
        return self.rank < other.rank


class Category(str, enum.Enum):
    SP = "SP"
    MP = "MP"


_BASIC_FEATURES = frozenset({FeatureTag.BASIC, FeatureTag.NONTIGHT})


def validate_features(features: Iterable[FeatureTag]) -> frozenset[FeatureTag]:
    fs = frozenset(features)
    if FeatureTag.CHOICE_BOUNDED in fs and FeatureTag.CHOICE not in fs:
        raise RegistryValidationError("feature 'choiceBounded' requires 'choice'")
    if FeatureTag.NON_HCF_DISJ in fs and FeatureTag.DISJ not in fs:
        raise RegistryValidationError("feature 'nonHcfDisj' requires 'disj'")
    return fs


def classify_track(features: Iterable[FeatureTag], kind: ProblemKind) -> TrackId:
    """Place an encoding in the most restrictive track that admits it."""
    fs = frozenset(features)
    if FeatureTag.NON_HCF_DISJ in fs:
        return TrackId.T4
    if kind is ProblemKind.OPTIMIZATION:
        return TrackId.T3
    if kind is ProblemKind.DECISION and fs <= _BASIC_FEATURES:
        return TrackId.T1
    return TrackId.T2


@dataclass(frozen=True)
class InstanceRef:
    problem_id: str
    instance_id: str
    digest: str
    path: Path = field(compare=False)

    @property
    def key(self) -> tuple[str, str]:
        return (self.problem_id, self.instance_id)


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    kind: ProblemKind
    features: frozenset[FeatureTag]
    encoding_year: int
    checker: Path
    encoding: Path
    instance_pool: tuple[InstanceRef, ...]
    domain: str = ""

    def __post_init__(self):
        if not self.domain:
            object.__setattr__(self, "domain", self.id)

    @property
    def track(self) -> TrackId:
        return classify_track(self.features, self.kind)

    @property
    def is_optimization(self) -> bool:
        return self.kind is ProblemKind.OPTIMIZATION

    def instance(self, instance_id: str) -> InstanceRef:
        for ref in self.instance_pool:
            if ref.instance_id == instance_id:
                return ref
        raise KeyError(f"{self.id}/{instance_id}")


@dataclass(frozen=True)
class SolverSpec:
    id: str
    team: str
    category: Category
    tracks: frozenset[TrackId]
    command_template: str
    supports_query: bool = False

    def participates(self, problem: ProblemSpec) -> bool:
        if problem.track not in self.tracks:
            return False
        return problem.kind is not ProblemKind.QUERY or self.supports_query


@dataclass(frozen=True)
class ResourceLimits:
    """Per-run limits; ``time_mode`` selects whether ``cpu_seconds`` bounds
    the process tree's CPU time (``cpu``) or elapsed wall time (``wall``)."""

    cpu_seconds: int = 600
    memory_bytes: int = 6 * 2**30
    cores: int = 1
    time_mode: str = "cpu"
    wall_factor: float = 1.5

    def __post_init__(self):
        if self.cpu_seconds <= 0 or self.memory_bytes <= 0 or self.cores <= 0:
            raise ValueError(f"limits must be positive: {self}")
        if self.cores > MAX_MP_CORES:
            raise ValueError(f"at most {MAX_MP_CORES} cores per run")
        if self.time_mode not in ("cpu", "wall"):
            raise ValueError(f"unknown time mode {self.time_mode!r}")

    def for_category(self, category: Category) -> ResourceLimits:
        if category is Category.SP and self.cores != 1:
            raise ValueError("SP runs are confined to exactly one core")
        return self

    def with_overrides(self, **kw: Any) -> ResourceLimits:
        values = {
            "cpu_seconds": self.cpu_seconds,
            "memory_bytes": self.memory_bytes,
            "cores": self.cores,
            "time_mode": self.time_mode,
            "wall_factor": self.wall_factor,
        }
        values.update({k: v for k, v in kw.items() if v is not None})
        return ResourceLimits(**values)


_DEFAULT_LIMITS = {
    Category.SP: ResourceLimits(cores=1, time_mode="cpu"),
    Category.MP: ResourceLimits(cores=MAX_MP_CORES, time_mode="wall"),
}


@dataclass
class Registry:
    problems: dict[str, ProblemSpec]
    solvers: dict[str, SolverSpec]
    limits: dict[Category, ResourceLimits] = field(default_factory=lambda: dict(_DEFAULT_LIMITS))
    instances_per_domain: int = DEFAULT_INSTANCES_PER_DOMAIN
    root: Path = field(default_factory=Path.cwd)

    def problems_in(self, tracks: Iterable[TrackId] | None = None) -> list[ProblemSpec]:
        wanted = set(tracks) if tracks is not None else set(TrackId)
        return [p for p in self.problems.values() if p.track in wanted]

    def solvers_in(self, category: Category) -> list[SolverSpec]:
        return [s for s in self.solvers.values() if s.category is category]

    def participants(self, problem: ProblemSpec, category: Category) -> list[SolverSpec]:
        return [s for s in self.solvers_in(category) if s.participates(problem)]


def select_instances(problem: ProblemSpec, n: int, seed: str) -> list[InstanceRef]:
    """Deterministically pick ``min(n, pool size)`` instances of ``problem``.

    Encodings sharing a ``domain`` draw the same instances.
    """
    return seeded_sample(problem.instance_pool, n, seed, problem.domain)


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _enum(enum_cls, raw: Any, what: str):
    text = str(raw)
    for member in enum_cls:
        if text in (member.value, member.name):
            return member
    if enum_cls is TrackId:
        for member in enum_cls:
            if text == member.short:
                return member
    if enum_cls is ProblemKind:
        for member in enum_cls:
            if text.lower() == member.name.lower():
                return member
    raise RegistryValidationError(f"unknown {what} {raw!r}")


def _require_path(root: Path, raw: Any, what: str) -> Path:
    if raw is None:
        raise RegistryValidationError(f"missing {what}")
    path = Path(raw)
    if not path.is_absolute():
        path = root / path
    if not path.exists():
        raise RegistryLoadError(f"{what} not found: {path}", str(path))
    return path


def _scan_pool(problem_id: str, directory: Path) -> tuple[InstanceRef, ...]:
    if not directory.is_dir():
        raise RegistryLoadError(f"instance directory is not a directory: {directory}", str(directory))
    files = sorted(p for p in directory.iterdir() if p.is_file() and not p.name.startswith("."))
    return tuple(InstanceRef(problem_id, p.name, file_digest(p), p) for p in files)


_SIZE = re.compile(r"^\s*(\d+)\s*([KMGT]?)(?:i?B)?\s*$", re.IGNORECASE)
_UNITS = {"": 1, "k": 2**10, "m": 2**20, "g": 2**30, "t": 2**40}


def parse_size(value: Any) -> int:
    """Bytes from an int or a string such as ``512MiB`` / ``6G`` (binary units)."""
    if isinstance(value, int):
        return value
    m = _SIZE.match(str(value))
    if not m:
        raise ValueError(f"bad memory size {value!r}")
    return int(m.group(1)) * _UNITS[m.group(2).lower()]


def _parse_limits(raw: Mapping[str, Any] | None) -> dict[Category, ResourceLimits]:
    limits = dict(_DEFAULT_LIMITS)
    for cat_name, spec in (raw or {}).items():
        cat = _enum(Category, cat_name, "category")
        limits[cat] = limits[cat].with_overrides(
            cpu_seconds=spec.get("cpu"),
            memory_bytes=None if spec.get("mem") is None else parse_size(spec["mem"]),
            cores=spec.get("cores"),
            time_mode=spec.get("time_mode"),
            wall_factor=spec.get("wall_factor"),
        ).for_category(cat)
    return limits


def _parse_problem(root: Path, raw: Mapping[str, Any]) -> ProblemSpec:
    pid = raw.get("id")
    if not pid:
        raise RegistryValidationError(f"problem without id: {raw!r}")
    pid = str(pid)
    kind = _enum(ProblemKind, raw.get("kind"), "problem kind")
    try:
        features = validate_features(_enum(FeatureTag, f, "feature tag") for f in raw.get("features") or ())
    except RegistryValidationError as exc:
        raise RegistryValidationError(f"problem {pid}: {exc}") from None
    year = int(raw.get("encoding_year", 2013))
    if year not in (2013, 2014):
        raise RegistryValidationError(f"problem {pid}: encoding year must be 2013 or 2014")
    checker = _require_path(root, raw.get("checker"), f"checker for {pid}")
    encoding = _require_path(root, raw.get("encoding"), f"encoding for {pid}")
    pool = _scan_pool(pid, _require_path(root, raw.get("instances"), f"instance directory for {pid}"))
    if not pool:
        raise RegistryValidationError(f"problem {pid}: instance pool is empty")
    return ProblemSpec(
        id=pid,
        kind=kind,
        features=features,
        encoding_year=year,
        checker=checker,
        encoding=encoding,
        instance_pool=pool,
        domain=str(raw.get("domain") or pid),
    )


def _parse_solver(raw: Mapping[str, Any]) -> SolverSpec:
    sid = raw.get("id")
    if not sid:
        raise RegistryValidationError(f"solver without id: {raw!r}")
    tracks = frozenset(_enum(TrackId, t, "track") for t in raw.get("tracks") or ())
    if not tracks:
        raise RegistryValidationError(f"solver {sid}: must declare at least one track")
    command = raw.get("command")
    if not command or "{instance}" not in command:
        raise RegistryValidationError(f"solver {sid}: command must contain an {{instance}} placeholder")
    return SolverSpec(
        id=str(sid),
        team=str(raw.get("team", "")),
        category=_enum(Category, raw.get("category", "SP"), "category"),
        tracks=tracks,
        command_template=command,
        supports_query=bool(raw.get("supports_query", False)),
    )


def load_registry(source: str | Path) -> Registry:
    """Load and validate a registry document from ``source``."""
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RegistryLoadError(f"cannot read registry {path}: {exc}", str(path)) from exc
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise RegistryLoadError(f"cannot parse registry {path}: {exc}", str(path)) from exc
    if not isinstance(doc, dict):
        raise RegistryValidationError("registry document must be a mapping")
    return registry_from_dict(doc, path.resolve().parent)


def registry_from_dict(doc: Mapping[str, Any], root: Path) -> Registry:
    problems: dict[str, ProblemSpec] = {}
    for raw in doc.get("problems") or ():
        problem = _parse_problem(root, raw)
        if problem.id in problems:
            raise RegistryValidationError(f"duplicate problem id {problem.id!r}")
        problems[problem.id] = problem
    if not problems:
        raise RegistryValidationError("registry contains no problems")

    solvers: dict[str, SolverSpec] = {}
    for raw in doc.get("solvers") or ():
        solver = _parse_solver(raw)
        if solver.id in solvers:
            raise RegistryValidationError(f"duplicate solver id {solver.id!r}")
        solvers[solver.id] = solver

    selection = doc.get("selection") or {}
    n = int(selection.get("n", DEFAULT_INSTANCES_PER_DOMAIN))
    if n < 1:
        raise RegistryValidationError("selection.n must be >= 1")
    try:
        limits = _parse_limits(doc.get("limits"))
    except ValueError as exc:
        raise RegistryValidationError(str(exc)) from None
    return Registry(problems, solvers, limits, n, root)
