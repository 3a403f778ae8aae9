from __future__ import annotations

import os
import stat
import sys
import textwrap
from pathlib import Path

import pytest
import yaml

FIXTURES = Path(__file__).parent / "fixtures"
SOLVERS = FIXTURES / "solvers"
SUITE = FIXTURES / "suite"
PY = sys.executable


def write_executable(path: Path, body: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"#!{PY}\n" + textwrap.dedent(body))
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return path


@pytest.fixture
def suite_registry_path() -> Path:
    return SUITE / "registry.yaml"


class RegistryBuilder:
    """Writes a registry document plus dummy checker/encoding/instance files."""

    def __init__(self, root: Path):
        self.root = root
        self.problems: list[dict] = []
        self.solvers: list[dict] = []
        self.extra: dict = {}
        self.accept_all = write_executable(root / "checkers" / "accept_all", "import sys\nsys.exit(0)\n")

    def problem(self, pid, kind="D", features=("basic",), year=2013, n_instances=3, checker=None, domain=None,
                instances: dict[str, str] | None = None):
        inst_dir = self.root / "instances" / pid
        inst_dir.mkdir(parents=True, exist_ok=True)
        contents = instances or {f"i{k:03d}.lp": f"instance {pid} {k}\n" for k in range(n_instances)}
        for name, text in contents.items():
            (inst_dir / name).write_text(text)
        enc = self.root / "encodings" / f"{pid}.asp"
        enc.parent.mkdir(parents=True, exist_ok=True)
        enc.write_text(f"% {pid}\n")
        entry = {
            "id": pid,
            "kind": kind,
            "features": list(features),
            "encoding_year": year,
            "checker": str(checker or self.accept_all),
            "encoding": str(enc.relative_to(self.root)),
            "instances": str(inst_dir.relative_to(self.root)),
        }
        if domain:
            entry["domain"] = domain
        self.problems.append(entry)
        return self

    def solver(self, sid, command, category="SP", tracks=("T1", "T2", "T3", "T4"), supports_query=False):
        self.solvers.append(
            {"id": sid, "team": "t", "category": category, "tracks": list(tracks),
             "command": command, "supports_query": supports_query}
        )
        return self

    def write(self, name="registry.yaml") -> Path:
        doc = {"problems": self.problems, "solvers": self.solvers, **self.extra}
        path = self.root / name
        path.write_text(yaml.safe_dump(doc, sort_keys=False))
        return path


@pytest.fixture
def builder(tmp_path) -> RegistryBuilder:
    return RegistryBuilder(tmp_path)


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))


def benchmark_domains() -> list[dict]:
    from importlib import resources

    text = resources.files("aspcomp").joinpath("data/benchmark_suite.yaml").read_text()
    return yaml.safe_load(text)["domains"]


def slug(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name.lower()).strip("_")


def add_benchmark_suite(builder: RegistryBuilder, year: int, n_instances: int = 3) -> RegistryBuilder:
    """One problem per benchmark domain that has an encoding for ``year``."""
    for dom in benchmark_domains():
        features = dom.get(str(year))
        if features is None:
            continue
        builder.problem(f"{slug(dom['name'])}_{year}", kind=dom["kind"], features=features, year=year,
                        n_instances=n_instances, domain=slug(dom["name"]))
    return builder


def make_outcome(solver="s", problem="p", instance="i1", claim=None, status="Completed", cpu=1.0,
                 cpu_limit=600.0, year=2013, reason=""):
    from aspcomp.executor import RunOutcome, RunStatus
    from aspcomp.protocol import NoClaim
    from aspcomp.registry import InstanceRef

    return RunOutcome(
        solver_id=solver,
        instance=InstanceRef(problem, instance, "d" * 64, Path()),
        encoding_year=year,
        claim=claim if claim is not None else NoClaim(),
        status=RunStatus(status),
        cpu_seconds=cpu,
        wall_seconds=cpu + 0.25,
        peak_memory_bytes=1234,
        cpu_limit=cpu_limit,
        reason=reason,
    )
