"""Append-only JSON-lines run ledger.

Each line is one :class:`RunOutcome`. Witness atoms are kept out of the
ledger in a content-addressed ``witnesses/`` directory next to it, keyed by
the digest recorded in the line.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import LedgerError
from .executor import RunOutcome, RunStatus
from .protocol import Claim, NoClaim, OptWitness, Unsat, Witness
from .registry import InstanceRef

RunKey = tuple[str, str, str]

_CLAIM_KINDS = {Witness: "witness", Unsat: "unsat", OptWitness: "opt", NoClaim: "none"}


def dumps(record: dict[str, Any]) -> str:
    """Canonical single-line JSON; float repr round-trips exactly."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def outcome_to_record(outcome: RunOutcome) -> dict[str, Any]:
    claim = outcome.claim
    inst = outcome.instance
    return {
        "solverId": outcome.solver_id,
        "problemId": inst.problem_id,
        "instanceId": inst.instance_id,
        "instanceDigest": inst.digest,
        "encodingYear": outcome.encoding_year,
        "status": outcome.status.value,
        "claim": _CLAIM_KINDS[type(claim)],
        "claimDigest": claim.digest if isinstance(claim, (Witness, OptWitness)) else None,
        "cost": list(claim.cost) if isinstance(claim, OptWitness) else None,
        "optimumClaimed": bool(isinstance(claim, OptWitness) and claim.optimum_claimed),
        "cpuSeconds": outcome.cpu_seconds,
        "wallSeconds": outcome.wall_seconds,
        "peakMemoryBytes": outcome.peak_memory_bytes,
        "cpuLimit": outcome.cpu_limit,
        "reason": outcome.reason,
    }


def record_to_outcome(record: dict[str, Any], atoms_for) -> RunOutcome:
    """Rebuild an outcome; ``atoms_for(digest)`` supplies witness text."""
    kind = record["claim"]
    claim: Claim
    if kind == "witness":
        claim = Witness(atoms_for(record["claimDigest"]))
    elif kind == "opt":
        claim = OptWitness(atoms_for(record["claimDigest"]), tuple(record["cost"]), record["optimumClaimed"])
    elif kind == "unsat":
        claim = Unsat()
    elif kind == "none":
        claim = NoClaim()
    else:
        raise LedgerError(f"unknown claim kind {kind!r}")
    instance = InstanceRef(record["problemId"], record["instanceId"], record["instanceDigest"], Path())
    return RunOutcome(
        solver_id=record["solverId"],
        instance=instance,
        encoding_year=record["encodingYear"],
        claim=claim,
        status=RunStatus(record["status"]),
        cpu_seconds=record["cpuSeconds"],
        wall_seconds=record["wallSeconds"],
        peak_memory_bytes=record["peakMemoryBytes"],
        cpu_limit=record["cpuLimit"],
        reason=record.get("reason", ""),
    )


class Ledger:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.witness_dir = self.path.parent / "witnesses"
        self._lock = threading.Lock()
        self._repair_tail()

    def _repair_tail(self) -> None:
        """Drop a partial last line left behind by a killed writer."""
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if data and not data.endswith(b"\n"):
            cut = data.rfind(b"\n") + 1
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)

    def records(self) -> Iterator[dict[str, Any]]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise LedgerError(f"{self.path}:{lineno}: corrupt record: {exc}") from exc

    def keys(self) -> set[RunKey]:
        return {(r["solverId"], r["problemId"], r["instanceId"]) for r in self.records()}

    def witness(self, digest: str) -> str:
        try:
            return (self.witness_dir / f"{digest}.txt").read_text(encoding="utf-8")
        except OSError as exc:
            raise LedgerError(f"witness {digest} missing from {self.witness_dir}") from exc

    def load(self) -> list[RunOutcome]:
        return [record_to_outcome(r, self.witness) for r in self.records()]

    def _store_witness(self, claim: Claim) -> None:
        if not isinstance(claim, (Witness, OptWitness)):
            return
        target = self.witness_dir / f"{claim.digest}.txt"
        if target.exists():
            return
        self.witness_dir.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(claim.atoms, encoding="utf-8")
        os.replace(tmp, target)

    def append(self, outcome: RunOutcome) -> None:
        """Durably append one outcome (witness first, then the ledger line)."""
        line = dumps(outcome_to_record(outcome)) + "\n"
        with self._lock:
            try:
                self._store_witness(outcome.claim)
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise LedgerError(f"cannot write ledger {self.path}: {exc}") from exc

    def extend(self, outcomes: Iterable[RunOutcome]) -> None:
        for outcome in outcomes:
            self.append(outcome)

