"""Answer verification and disqualification.

Checker contract: ``checker <instance> <witness-file>``; exit 0 means valid,
1 invalid, anything else is an infrastructure failure. Checkers of
optimization problems print one ``COST <ints>`` line when exiting 0.
"""

from __future__ import annotations

import enum
import json
import logging
import subprocess
import tempfile
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import CheckerError, ProtocolViolation
from .executor import RunOutcome, RunStatus
from .ledger import dumps
from .protocol import OptWitness, Unsat, Witness, parse_cost
from .registry import Category, InstanceRef, ProblemSpec, Registry

log = logging.getLogger(__name__)

CHECKER_TIMEOUT = 300.0

Cost = tuple[int, ...]


class EffectiveClaim(str, enum.Enum):
    VALID_WITNESS = "ValidWitness"
    INVALID_WITNESS = "InvalidWitness"
    UNSAT_CLAIM = "UnsatClaim"
    NOTHING = "Nothing"


class DisqualificationReason(str, enum.Enum):
    INVALID_WITNESS = "InvalidWitness"
    FALSE_UNSAT = "FalseUnsat"
    FALSE_OPTIMUM = "FalseOptimum"


@dataclass(frozen=True)
class CheckerVerdict:
    valid: bool
    cost: Optional[Cost] = None


@dataclass(frozen=True)
class VerifiedResult:
    run: RunOutcome
    verdict: Optional[CheckerVerdict]
    effective: EffectiveClaim
    confirmed: bool = False

    @property
    def cost(self) -> Optional[Cost]:
        if self.effective is EffectiveClaim.VALID_WITNESS and self.verdict is not None:
            return self.verdict.cost
        return None

    @property
    def optimum_claimed(self) -> bool:
        claim = self.run.claim
        return isinstance(claim, OptWitness) and claim.optimum_claimed


@dataclass(frozen=True, order=True)
class Disqualification:
    solver_id: str
    problem_id: str
    reason: DisqualificationReason
    instance_id: str = ""


@dataclass(frozen=True)
class Quarantined:
    run: RunOutcome
    error: str


@dataclass
class Adjudication:
    results: list[VerifiedResult]
    disqualifications: list[Disqualification]
    quarantined: list[Quarantined]

    def disqualified(self) -> dict[tuple[str, str], Disqualification]:
        return {(d.solver_id, d.problem_id): d for d in self.disqualifications}


CheckFn = Callable[[ProblemSpec, InstanceRef, str], CheckerVerdict]


def check_witness(
    problem: ProblemSpec,
    instance: InstanceRef,
    witness: str,
    *,
    timeout: float = CHECKER_TIMEOUT,
) -> CheckerVerdict:
    """Ask the problem's checker whether ``witness`` solves ``instance``."""
    with tempfile.NamedTemporaryFile("w", suffix=".witness", encoding="utf-8") as fh:
        fh.write(witness + "\n")
        fh.flush()
        argv = [str(problem.checker), str(instance.path), fh.name]
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout, stdin=subprocess.DEVNULL)
        except (OSError, subprocess.SubprocessError) as exc:
            raise CheckerError(f"checker {problem.checker} failed: {exc}") from exc
    if proc.returncode == 1:
        return CheckerVerdict(False)
    if proc.returncode != 0:
        raise CheckerError(f"checker {problem.checker} exited with {proc.returncode}")
    if not problem.is_optimization:
        return CheckerVerdict(True)
    cost_lines = [ln.split() for ln in proc.stdout.decode("utf-8", "replace").splitlines() if ln.startswith("COST")]
    if len(cost_lines) != 1:
        raise CheckerError(f"checker {problem.checker} printed {len(cost_lines)} COST lines, expected 1")
    try:
        return CheckerVerdict(True, parse_cost(cost_lines[0][1:]))
    except ProtocolViolation as exc:
        raise CheckerError(f"checker {problem.checker}: {exc}") from exc


def cross_check_unsat(
    problem_id: str,
    instance_id: str,
    unsat_claims: Iterable[str],
    verified: Iterable[VerifiedResult],
) -> set[Disqualification]:
    holders = {
        r.run.solver_id
        for r in verified
        if r.effective is EffectiveClaim.VALID_WITNESS and r.run.instance.instance_id == instance_id
    }
    return {
        Disqualification(s, problem_id, DisqualificationReason.FALSE_UNSAT, instance_id)
        for s in unsat_claims
        if holders - {s}
    }


def imperfect_optimum(verified: Iterable[VerifiedResult]) -> Optional[Cost]:
    """Lexicographically smallest checker-confirmed cost, or None."""
    costs = [r.cost for r in verified if r.cost is not None]
    return min(costs) if costs else None


def validate_optimum_claims(
    verified: Iterable[VerifiedResult], optimum: Optional[Cost]
) -> tuple[set[Disqualification], list[VerifiedResult]]:
    """Disqualify false optimality claims; mark the rest confirmed.

    Returns the disqualifications and the results with ``confirmed`` set.
    """
    disq: set[Disqualification] = set()
    out = []
    for r in verified:
        if r.optimum_claimed and r.cost is not None:
            if r.cost != optimum:
                disq.add(
                    Disqualification(
                        r.run.solver_id, r.run.problem_id, DisqualificationReason.FALSE_OPTIMUM, r.run.instance.instance_id
                    )
                )
            else:
                r = replace(r, confirmed=True)
        out.append(r)
    return disq, out


def _judge(
    run: RunOutcome, problem: ProblemSpec, check: CheckFn
) -> VerifiedResult | Quarantined:
    claim = run.claim
    if isinstance(claim, (Witness, OptWitness)):
        try:
            verdict = check(problem, problem.instance(run.instance.instance_id), claim.atoms)
        except (CheckerError, KeyError) as exc:
            return Quarantined(run, str(exc))
        if verdict.valid and problem.is_optimization and verdict.cost is None:
            return Quarantined(run, "checker reported no cost for a valid witness")
        effective = EffectiveClaim.VALID_WITNESS if verdict.valid else EffectiveClaim.INVALID_WITNESS
        return VerifiedResult(run, verdict, effective)
    if isinstance(claim, Unsat) and run.status is RunStatus.COMPLETED:
        return VerifiedResult(run, None, EffectiveClaim.UNSAT_CLAIM)
    return VerifiedResult(run, None, EffectiveClaim.NOTHING)


def adjudicate(
    outcomes: Sequence[RunOutcome],
    registry: Registry,
    *,
    check: CheckFn = check_witness,
    jobs: int = 1,
) -> Adjudication:
    """Run the full verification pipeline over a complete ledger.

    Order: checker verdicts, invalid-witness disqualifications, unsat
    cross-check, imperfect optimum, optimum claims. Cross-checking and the
    imperfect optimum are scoped to the category of the solvers involved.
    A timeout, memout or crash is never itself a reason to disqualify; only
    a claim the run actually emitted can be.
    """
    runs = sorted(outcomes, key=lambda o: o.key)
    for run in runs:
        if run.problem_id not in registry.problems:
            raise KeyError(f"ledger references unknown problem {run.problem_id!r}")
        if run.solver_id not in registry.solvers:
            raise KeyError(f"ledger references unknown solver {run.solver_id!r}")

    def judge(run: RunOutcome):
        return _judge(run, registry.problems[run.problem_id], check)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as tpe:
            judged = list(tpe.map(judge, runs))
    else:
        judged = [judge(r) for r in runs]

    results = [j for j in judged if isinstance(j, VerifiedResult)]
    quarantined = [j for j in judged if isinstance(j, Quarantined)]

    disq: set[Disqualification] = set()
    for r in results:
        if r.effective is EffectiveClaim.INVALID_WITNESS:
            disq.add(
                Disqualification(
                    r.run.solver_id, r.run.problem_id, DisqualificationReason.INVALID_WITNESS, r.run.instance.instance_id
                )
            )

    groups: dict[tuple[Category, str, str], list[VerifiedResult]] = defaultdict(list)
    for r in results:
        category = registry.solvers[r.run.solver_id].category
        groups[(category, r.run.problem_id, r.run.instance.instance_id)].append(r)

    final: list[VerifiedResult] = []
    for (category, problem_id, instance_id), group in sorted(groups.items()):
        unsat = [r.run.solver_id for r in group if r.effective is EffectiveClaim.UNSAT_CLAIM]
        disq |= cross_check_unsat(problem_id, instance_id, unsat, group)
        if registry.problems[problem_id].is_optimization:
            optimum = imperfect_optimum(group)
            found, group = validate_optimum_claims(group, optimum)
            disq |= found
        final.extend(group)

    final.sort(key=lambda r: r.run.key)
    return Adjudication(final, _first_per_problem(disq), quarantined)


_REASON_ORDER = {
    DisqualificationReason.INVALID_WITNESS: 0,
    DisqualificationReason.FALSE_UNSAT: 1,
    DisqualificationReason.FALSE_OPTIMUM: 2,
}


def _first_per_problem(disq: Iterable[Disqualification]) -> list[Disqualification]:
    """Keep one disqualification per (solver, problem), earliest pipeline stage first."""
    best: dict[tuple[str, str], Disqualification] = {}
    for d in sorted(disq, key=lambda d: (d.solver_id, d.problem_id, _REASON_ORDER[d.reason], d.instance_id)):
        best.setdefault((d.solver_id, d.problem_id), d)
    return sorted(best.values(), key=lambda d: (d.solver_id, d.problem_id))


# -- verdicts file --------------------------------------------------------


def result_to_record(r: VerifiedResult, category: Category) -> dict:
    run = r.run
    return {
        "type": "result",
        "category": category.value,
        "solverId": run.solver_id,
        "problemId": run.problem_id,
        "instanceId": run.instance.instance_id,
        "encodingYear": run.encoding_year,
        "status": run.status.value,
        "effectiveClaim": r.effective.value,
        "valid": None if r.verdict is None else r.verdict.valid,
        "cost": None if r.cost is None else list(r.cost),
        "optimumClaimed": r.optimum_claimed,
        "confirmed": r.confirmed,
        "cpuSeconds": run.cpu_seconds,
        "cpuLimit": run.cpu_limit,
    }


def write_verdicts(path: Path, adjudication: Adjudication, registry: Registry) -> None:
    lines = []
    for r in adjudication.results:
        lines.append(dumps(result_to_record(r, registry.solvers[r.run.solver_id].category)))
    for d in adjudication.disqualifications:
        lines.append(
            dumps(
                {
                    "type": "disqualification",
                    "category": registry.solvers[d.solver_id].category.value,
                    "solverId": d.solver_id,
                    "problemId": d.problem_id,
                    "reason": d.reason.value,
                    "instanceId": d.instance_id,
                }
            )
        )
    for q in adjudication.quarantined:
        lines.append(
            dumps(
                {
                    "type": "quarantine",
                    "category": registry.solvers[q.run.solver_id].category.value,
                    "solverId": q.run.solver_id,
                    "problemId": q.run.problem_id,
                    "instanceId": q.run.instance.instance_id,
                    "cpuLimit": q.run.cpu_limit,
                    "error": q.error,
                }
            )
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    tmp.replace(path)


def read_verdicts(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def group_verdicts(records: Iterable[Mapping]) -> dict[str, list[Mapping]]:
    out: dict[str, list[Mapping]] = defaultdict(list)
    for rec in records:
        out[rec["type"]].append(rec)
    return out
