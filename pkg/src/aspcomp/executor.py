"""Run one solver on one instance under CPU, memory and core limits.

The child gets its own session so the whole process tree can be signalled
at once. A monitor loop samples the tree with psutil; CPU time is the sum
over every process ever seen in the tree, resident memory the sum over the
live ones. Per-process rlimits act only as backstops behind the poller.
"""

from __future__ import annotations

import enum
import logging
import math
import os
import re
import resource
import shlex
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import psutil

from .errors import ProtocolViolation
from .protocol import Claim, NoClaim, OptWitness, parse_solver_output
from .registry import InstanceRef, ResourceLimits, SolverSpec

log = logging.getLogger(__name__)

TIMEOUT_TOLERANCE = 2.0
KILL_GRACE = 5.0
POLL_INTERVAL = 0.05

_MEMORY_HINTS = re.compile(rb"MemoryError|bad_alloc|[Oo]ut of memory|Cannot allocate memory")


class RunStatus(str, enum.Enum):
    COMPLETED = "Completed"
    TIMEOUT = "Timeout"
    MEMOUT = "MemOut"
    CRASH = "Crash"


@dataclass(frozen=True)
class RunOutcome:
    solver_id: str
    instance: InstanceRef
    encoding_year: int
    claim: Claim
    status: RunStatus
    cpu_seconds: float
    wall_seconds: float
    peak_memory_bytes: int
    cpu_limit: float
    reason: str = ""

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.solver_id, self.instance.problem_id, self.instance.instance_id)

    @property
    def problem_id(self) -> str:
        return self.instance.problem_id


def build_argv(template: str, *, instance: Path, encoding: Path | None) -> list[str]:
    """Expand a command template into argv.

    Placeholders: ``{instance}``, ``{encoding}`` and ``{python}`` (the
    interpreter running the engine, handy for script-based solvers).
    """
    values = {
        "instance": str(instance),
        "encoding": str(encoding) if encoding is not None else "",
        "python": sys.executable,
    }
    return [tok.format(**values) for tok in shlex.split(template)]


class _TreeMonitor:
    """Accumulates CPU time and memory over a process tree."""

    def __init__(self, pid: int):
        self.root_pid = pid
        self.cpu_by_proc: dict[tuple[int, float], float] = {}
        self.peak_rss = 0

    def sample(self) -> tuple[float, int]:
        try:
            root = psutil.Process(self.root_pid)
            procs = [root, *root.children(recursive=True)]
        except psutil.Error:
            procs = []
        rss = 0
        for proc in procs:
            try:
                with proc.oneshot():
                    times = proc.cpu_times()
                    ident = (proc.pid, proc.create_time())
                    self.cpu_by_proc[ident] = times.user + times.system
                    rss += proc.memory_info().rss
            except psutil.Error:
                continue
        self.peak_rss = max(self.peak_rss, rss)
        return self.cpu_seconds, rss

    @property
    def cpu_seconds(self) -> float:
        return math.fsum(self.cpu_by_proc.values())


def _signal_group(pgid: int, sig: int) -> None:
    try:
        os.killpg(pgid, sig)
    except (ProcessLookupError, PermissionError):
        pass


def _child_setup(limits: ResourceLimits, cpus: Sequence[int] | None):
    memory_backstop = max(2 * limits.memory_bytes, limits.memory_bytes + 2**30)

    def setup():
        if cpus:
            os.sched_setaffinity(0, cpus)
        resource.setrlimit(resource.RLIMIT_AS, (memory_backstop, memory_backstop))
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
        if limits.time_mode == "cpu":
            soft = int(math.ceil(limits.cpu_seconds + TIMEOUT_TOLERANCE))
            resource.setrlimit(resource.RLIMIT_CPU, (soft, soft + 1))

    return setup


def _tail(fh, size: int = 4096) -> bytes:
    fh.seek(0, os.SEEK_END)
    end = fh.tell()
    fh.seek(max(0, end - size))
    return fh.read()


def execute(
    solver: SolverSpec,
    encoding: Path | None,
    instance: InstanceRef,
    limits: ResourceLimits,
    *,
    encoding_year: int = 2013,
    cpus: Sequence[int] | None = None,
    cwd: Path | None = None,
    kill_grace: float = KILL_GRACE,
    poll_interval: float = POLL_INTERVAL,
) -> RunOutcome:
    """Run ``solver`` on ``instance`` and return the observed outcome.

    Never raises for solver misbehaviour: failure to start, crashes and
    protocol violations all come back as status ``Crash``.
    """
    limits = limits.for_category(solver.category)
    if cpus is not None and len(cpus) > limits.cores:
        raise ValueError(f"{len(cpus)} cpus assigned to a {limits.cores}-core run")

    def outcome(claim: Claim, status: RunStatus, cpu: float, wall: float, mem: int, reason: str = "") -> RunOutcome:
        return RunOutcome(
            solver_id=solver.id,
            instance=instance,
            encoding_year=encoding_year,
            claim=claim,
            status=status,
            cpu_seconds=round(cpu, 6),
            wall_seconds=round(wall, 6),
            peak_memory_bytes=int(mem),
            cpu_limit=float(limits.cpu_seconds),
            reason=reason,
        )

    try:
        argv = build_argv(solver.command_template, instance=instance.path, encoding=encoding)
    except (ValueError, KeyError, IndexError) as exc:
        return outcome(NoClaim(), RunStatus.CRASH, 0.0, 0.0, 0, f"bad command template: {exc}")

    time_cap = float(limits.cpu_seconds)
    wall_cap = time_cap if limits.time_mode == "wall" else time_cap * limits.wall_factor

    with tempfile.TemporaryFile() as out, tempfile.TemporaryFile() as err:
        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.DEVNULL,
                stdout=out,
                stderr=err,
                cwd=cwd,
                start_new_session=True,
                preexec_fn=_child_setup(limits, cpus),
            )
        except (OSError, subprocess.SubprocessError) as exc:
            return outcome(NoClaim(), RunStatus.CRASH, 0.0, time.monotonic() - start, 0, f"failed to start: {exc}")

        monitor = _TreeMonitor(proc.pid)
        kill_reason: RunStatus | None = None
        term_sent_at = 0.0
        hard_killed = False
        while True:
            pid, wait_status, rusage = os.wait4(proc.pid, os.WNOHANG)
            if pid:
                break
            cpu, rss = monitor.sample()
            now = time.monotonic()
            wall = now - start
            if kill_reason is None:
                if limits.time_mode == "cpu" and cpu >= time_cap:
                    kill_reason = RunStatus.TIMEOUT
                elif wall >= wall_cap:
                    kill_reason = RunStatus.TIMEOUT
                elif rss > limits.memory_bytes:
                    kill_reason = RunStatus.MEMOUT
                if kill_reason is not None:
                    log.debug("%s on %s: %s, sending SIGTERM", solver.id, instance.instance_id, kill_reason.value)
                    _signal_group(proc.pid, signal.SIGTERM)
                    term_sent_at = now
            elif not hard_killed and now - term_sent_at >= kill_grace:
                _signal_group(proc.pid, signal.SIGKILL)
                hard_killed = True
            time.sleep(poll_interval)
        wall = time.monotonic() - start
        proc.returncode = os.waitstatus_to_exitcode(wait_status)
        # orphaned descendants must not outlive the run
        _signal_group(proc.pid, signal.SIGKILL)

        cpu = max(monitor.cpu_seconds, rusage.ru_utime + rusage.ru_stime)
        peak = max(monitor.peak_rss, rusage.ru_maxrss * 1024)
        out.seek(0)
        raw = out.read()
        stderr_tail = _tail(err)

    code = proc.returncode
    status = kill_reason
    reason = ""
    if status is None:
        if code == -signal.SIGXCPU or (limits.time_mode == "cpu" and cpu >= time_cap and code < 0):
            status = RunStatus.TIMEOUT
        elif peak > limits.memory_bytes or (code != 0 and _MEMORY_HINTS.search(stderr_tail)):
            status = RunStatus.MEMOUT
        elif code < 0:
            status, reason = RunStatus.CRASH, f"killed by signal {-code}"
        else:
            status = RunStatus.COMPLETED

    try:
        claim = parse_solver_output(raw, truncated=status is not RunStatus.COMPLETED)
    except ProtocolViolation as exc:
        claim = NoClaim()
        if status is RunStatus.COMPLETED:
            status, reason = RunStatus.CRASH, f"protocol violation: {exc}"

    if status is RunStatus.COMPLETED and code != 0 and isinstance(claim, NoClaim):
        status, reason = RunStatus.CRASH, f"exit code {code}"
    if status is not RunStatus.COMPLETED and not isinstance(claim, OptWitness):
        claim = NoClaim()
    return outcome(claim, status, cpu, wall, peak, reason)
