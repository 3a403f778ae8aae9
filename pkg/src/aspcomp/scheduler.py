"""Concurrent batch execution with core accounting and a resumable ledger."""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import LedgerError
from .executor import RunOutcome, execute
from .ledger import Ledger, RunKey
from .registry import InstanceRef, ProblemSpec, ResourceLimits, SolverSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunRequest:
    solver: SolverSpec
    problem: ProblemSpec
    instance: InstanceRef
    limits: ResourceLimits
    cwd: Optional[Path] = None

    @property
    def key(self) -> RunKey:
        return (self.solver.id, self.problem.id, self.instance.instance_id)


Runner = Callable[[RunRequest, Sequence[int]], RunOutcome]


def default_runner(request: RunRequest, cpus: Sequence[int]) -> RunOutcome:
    return execute(
        request.solver,
        request.problem.encoding,
        request.instance,
        request.limits,
        encoding_year=request.problem.encoding_year,
        cpus=cpus,
        cwd=request.cwd,
    )


class CorePool:
    """Hands out disjoint sets of core slots; blocks until enough are free.

    Slots are logical. Each maps onto a physical CPU from the engine's own
    affinity mask, round-robin, so a budget larger than the host still keeps
    the accounting exact while pinning shares physical CPUs.
    """

    def __init__(self, cores: int, physical: Sequence[int] | None = None):
        if cores < 1:
            raise ValueError("core budget must be >= 1")
        self.physical = sorted(physical if physical is not None else os.sched_getaffinity(0))
        self._free = list(range(cores))
        self._cond = threading.Condition()
        self.in_use = 0
        self.max_in_use = 0

    def acquire(self, k: int) -> list[int]:
        with self._cond:
            while len(self._free) < k:
                self._cond.wait()
            slots, self._free = self._free[:k], self._free[k:]
            self.in_use += k
            self.max_in_use = max(self.max_in_use, self.in_use)
            return slots

    def release(self, slots: Sequence[int]) -> None:
        with self._cond:
            self._free.extend(slots)
            self._free.sort()
            self.in_use -= len(slots)
            self._cond.notify_all()

    def cpus_for(self, slots: Sequence[int]) -> list[int]:
        return sorted({self.physical[s % len(self.physical)] for s in slots})


def schedule(
    runs: Sequence[RunRequest],
    cores: int,
    ledger: Ledger,
    *,
    runner: Runner = default_runner,
    pool: CorePool | None = None,
) -> list[RunOutcome]:
    """Execute every run not yet in ``ledger``, appending outcomes as they finish.

    Returns the ledger's outcomes for exactly the requested run keys. A
    ledger write failure stops new runs from starting and is re-raised
    once in-flight runs have drained.
    """
    wanted: dict[RunKey, RunRequest] = {}
    for req in runs:
        if req.limits.cores > cores:
            raise ValueError(f"run {req.key} needs {req.limits.cores} cores, machine budget is {cores}")
        wanted.setdefault(req.key, req)

    done = ledger.keys()
    pending = [req for key, req in wanted.items() if key not in done]
    if done & wanted.keys():
        log.info("resuming: %d of %d runs already in ledger", len(done & wanted.keys()), len(wanted))

    pool = pool or CorePool(cores)
    abort = threading.Event()
    failures: list[BaseException] = []

    def work(req: RunRequest) -> None:
        if abort.is_set():
            return
        slots = pool.acquire(req.limits.cores)
        try:
            if abort.is_set():
                return
            outcome = runner(req, pool.cpus_for(slots))
        finally:
            pool.release(slots)
        try:
            ledger.append(outcome)
        except LedgerError as exc:
            abort.set()
            failures.append(exc)

    if pending:
        with ThreadPoolExecutor(max_workers=cores) as tpe:
            futures = [tpe.submit(work, req) for req in pending]
            for fut in futures:
                exc = fut.exception()
                if exc is not None:
                    abort.set()
                    failures.append(exc)
    if failures:
        raise failures[0]

    return [o for o in ledger.load() if o.key in wanted]
