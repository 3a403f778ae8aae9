from __future__ import annotations

import threading
import time
from pathlib import Path

import pytest

from aspcomp.errors import LedgerError
from aspcomp.executor import RunStatus
from aspcomp.ledger import Ledger
from aspcomp.protocol import NoClaim
from aspcomp.registry import Category, InstanceRef, ProblemKind, ProblemSpec, ResourceLimits, SolverSpec, TrackId
from aspcomp.scheduler import CorePool, RunRequest, schedule

from .conftest import SOLVERS, make_outcome


def requests(n, tmp_path, command="{python} x.py {instance}", cores=1, solvers=("s",)):
    insts = []
    for k in range(n):
        p = tmp_path / f"i{k}.lp"
        p.write_text(str(k))
        insts.append(InstanceRef("p", f"i{k}.lp", "d" * 64, p))
    enc = tmp_path / "enc.asp"
    enc.write_text("")
    problem = ProblemSpec("p", ProblemKind.DECISION, frozenset(), 2013, enc, enc, tuple(insts))
    limits = ResourceLimits(cpu_seconds=30, cores=cores, time_mode="wall" if cores > 1 else "cpu")
    out = []
    for sid in solvers:
        solver = SolverSpec(sid, "t", Category.MP if cores > 1 else Category.SP, frozenset({TrackId.T1}), command)
        out.extend(RunRequest(solver, problem, inst, limits) for inst in insts)
    return out


class FakeRunner:
    def __init__(self, delay=0.05, fail_after=None):
        self.delay = delay
        self.fail_after = fail_after
        self.active = 0
        self.peak = 0
        self.calls = 0
        self.lock = threading.Lock()

    def __call__(self, req, cpus):
        with self.lock:
            self.calls += 1
            if self.fail_after is not None and self.calls > self.fail_after:
                raise RuntimeError("harness crashed")
            self.active += req.limits.cores
            self.peak = max(self.peak, self.active)
        time.sleep(self.delay)
        with self.lock:
            self.active -= req.limits.cores
        return make_outcome(req.solver.id, req.problem.id, req.instance.instance_id, NoClaim(), cpu=0.01)


def test_zero_runs(tmp_path):
    ledger = Ledger(tmp_path / "l.jsonl")
    assert schedule([], 2, ledger) == []
    assert ledger.load() == []


def test_no_oversubscription_fake(tmp_path):
    runner = FakeRunner()
    out = schedule(requests(6, tmp_path), 2, Ledger(tmp_path / "l.jsonl"), runner=runner)
    assert len(out) == 6
    assert runner.peak == 2


def test_multicore_runs_respect_budget(tmp_path):
    runner = FakeRunner()
    pool = CorePool(8, physical=[0])
    schedule(requests(4, tmp_path, cores=3), 8, Ledger(tmp_path / "l.jsonl"), runner=runner, pool=pool)
    assert pool.max_in_use <= 8
    assert runner.peak == 6


def test_run_larger_than_budget_rejected(tmp_path):
    with pytest.raises(ValueError):
        schedule(requests(1, tmp_path, cores=4), 2, Ledger(tmp_path / "l.jsonl"), runner=FakeRunner())


@pytest.mark.slow
def test_four_real_runs_on_two_slots(tmp_path):
    log = tmp_path / "sleep.log"
    reqs = requests(4, tmp_path, command=f"{{python}} {SOLVERS}/sleeper.py {log} 0.6 {{instance}}")
    out = schedule(reqs, 2, Ledger(tmp_path / "l.jsonl"))
    assert {o.key for o in out} == {r.key for r in reqs}
    assert all(o.status is RunStatus.COMPLETED for o in out)
    events = []
    for line in log.read_text().splitlines():
        kind, stamp, _ = line.split()
        events.append((float(stamp), 1 if kind == "start" else -1))
    running = peak = 0
    for _, delta in sorted(events, key=lambda e: (e[0], e[1])):
        running += delta
        peak = max(peak, running)
    assert peak <= 2


def test_ledger_completeness_and_resume(tmp_path):
    reqs = requests(5, tmp_path, solvers=("a", "b"))
    ledger = Ledger(tmp_path / "l.jsonl")
    crashing = FakeRunner(delay=0, fail_after=4)
    with pytest.raises(RuntimeError):
        schedule(reqs, 1, ledger, runner=crashing)
    partial = Ledger(tmp_path / "l.jsonl").keys()
    assert 0 < len(partial) <= 4

    resumed = FakeRunner(delay=0)
    out = schedule(reqs, 1, Ledger(tmp_path / "l.jsonl"), runner=resumed)
    assert resumed.calls == 10 - len(partial)
    keys = [tuple(r[k] for k in ("solverId", "problemId", "instanceId")) for r in Ledger(tmp_path / "l.jsonl").records()]
    assert sorted(keys) == sorted({r.key for r in reqs})
    assert {o.key for o in out} == {r.key for r in reqs}


def test_ledger_failure_aborts_with_partial_ledger(tmp_path):
    path = tmp_path / "l.jsonl"

    class FlakyLedger(Ledger):
        writes = 0

        def append(self, outcome):
            if FlakyLedger.writes >= 2:
                raise LedgerError("disk full")
            FlakyLedger.writes += 1
            super().append(outcome)

    runner = FakeRunner(delay=0)
    with pytest.raises(LedgerError):
        schedule(requests(6, tmp_path), 1, FlakyLedger(path), runner=runner)
    assert len(Ledger(path).load()) == 2
    assert runner.calls <= 3


def test_core_pool_maps_slots_onto_physical_cpus():
    pool = CorePool(4, physical=[2, 5])
    slots = pool.acquire(3)
    assert pool.cpus_for(slots) == [2, 5]
    pool.release(slots)
    assert pool.in_use == 0 and pool.max_in_use == 3
