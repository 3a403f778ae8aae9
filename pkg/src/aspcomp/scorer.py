"""Problem scores and rankings.

Points are exact :class:`fractions.Fraction` values end to end; rendering
to two decimals happens only in reports.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .registry import Category, ProblemKind, ProblemSpec, Registry

Cost = tuple[int, ...]

OVERALL = "overall"


class Quality(enum.Enum):
    WITNESS = "witness"
    UNSAT = "unsat"
    NOTHING = "nothing"


@dataclass(frozen=True)
class SolutionQuality:
    kind: Quality
    cost: Optional[Cost] = None
    confirmed: bool = False

    @classmethod
    def witness(cls, cost: Sequence[int], confirmed: bool = False) -> SolutionQuality:
        return cls(Quality.WITNESS, tuple(cost), confirmed)

    @classmethod
    def unsat(cls) -> SolutionQuality:
        return cls(Quality.UNSAT, None, True)

    @classmethod
    def nothing(cls) -> SolutionQuality:
        return cls(Quality.NOTHING)


NOTHING = SolutionQuality.nothing()


def strictly_better(a: SolutionQuality, b: SolutionQuality) -> bool:
    """Whether ``a`` is a strictly better solution than ``b``.

    Lower cost wins lexicographically; at equal cost a confirmed optimum
    beats an unconfirmed one. Any solution or unsat report beats nothing.
    An unsat report counts as a confirmed optimum, so it ties with another
    unsat report; it is incomparable with a witness, since a witness on the
    same instance means the unsat claim was false and already disqualified.
    """
    if a.kind is Quality.NOTHING:
        return False
    if b.kind is Quality.NOTHING:
        return True
    if a.kind is not b.kind:
        return False
    if a.kind is Quality.UNSAT:
        return False
    if a.cost < b.cost:
        return True
    return a.cost == b.cost and a.confirmed and not b.confirmed


@dataclass(frozen=True)
class ScoreRecord:
    solver_id: str
    problem_id: str
    points: Fraction
    disqualified: bool
    runtime_sum: float
    category: str = ""
    track: str = ""
    encoding_year: int = 0
    reason: str = ""

    def __post_init__(self):
        if self.disqualified and self.points != 0:
            raise ValueError("a disqualified solver scores 0")
        if not 0 <= self.points <= 100:
            raise ValueError(f"points out of range: {self.points}")


@dataclass(frozen=True)
class RankEntry:
    solver_id: str
    total_points: Fraction
    total_runtime: float


Ranking = list[RankEntry]


def decision_points(solved: int, n: int) -> Fraction:
    if n < 1:
        raise ValueError("a problem needs at least one instance")
    if not 0 <= solved <= n:
        raise ValueError(f"solved count {solved} outside [0, {n}]")
    return Fraction(solved * 100, n)


def score_decision(
    solved: Mapping[str, int], n: int, disqualified: Iterable[str] = ()
) -> dict[str, Fraction]:
    """Decision/query points from per-solver solved-instance counts."""
    out = {s: decision_points(k, n) for s, k in solved.items()}
    for s in disqualified:
        out[s] = Fraction(0)
    return out


def score_opt_instance(
    qualities: Mapping[str, SolutionQuality], m: int, n: int
) -> dict[str, Fraction]:
    """Per-instance points for every solver in ``qualities``.

    ``m`` counts all participants of the problem; participants missing from
    ``qualities`` are treated as having produced nothing. A solver's rank
    value is the number of participants (itself included) not strictly
    better than it, i.e. ``m`` minus those strictly better.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if len(qualities) > m:
        raise ValueError(f"{len(qualities)} results but only {m} participants")
    points = {}
    for solver, q in qualities.items():
        if q.kind is Quality.NOTHING:
            rank_value = 0
        else:
            rank_value = m - sum(1 for other in qualities.values() if strictly_better(other, q))
        points[solver] = Fraction(rank_value * 100, m * n)
    return points


def score_opt_problem(per_instance: Iterable[Mapping[str, Fraction]], disqualified: Iterable[str] = ()) -> dict[str, Fraction]:
    totals: dict[str, Fraction] = defaultdict(Fraction)
    for inst_points in per_instance:
        for solver, pts in inst_points.items():
            totals[solver] += pts
    for solver in disqualified:
        totals[solver] = Fraction(0)
    return dict(totals)


def _rank_key(entry: RankEntry):
    return (-entry.total_points, entry.total_runtime, entry.solver_id)


def rank(entries: Iterable[RankEntry]) -> Ranking:
    return sorted(entries, key=_rank_key)


def global_ranking(records: Iterable[ScoreRecord]) -> dict[str, Ranking]:
    """Rankings per track plus an ``overall`` one."""
    points: dict[str, dict[str, Fraction]] = defaultdict(lambda: defaultdict(Fraction))
    runtimes: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for rec in sorted(records, key=lambda r: (r.problem_id, r.solver_id)):
        for group in (rec.track, OVERALL):
            points[group][rec.solver_id] += rec.points
            runtimes[group][rec.solver_id].append(rec.runtime_sum)
    out = {}
    for group in sorted(points, key=lambda g: (g == OVERALL, g)):
        out[group] = rank(
            RankEntry(s, points[group][s], math.fsum(runtimes[group][s])) for s in points[group]
        )
    return out


# -- scoring from adjudicated verdict records ------------------------------


def _quality(rec: Mapping) -> SolutionQuality:
    effective = rec["effectiveClaim"]
    if effective == "ValidWitness":
        return SolutionQuality.witness(rec["cost"] or (), rec["confirmed"])
    if effective == "UnsatClaim":
        return SolutionQuality.unsat()
    return NOTHING


def _solved(rec: Mapping, problem: ProblemSpec, disqualified: bool) -> bool:
    effective = rec["effectiveClaim"]
    if rec["status"] != "Completed" or disqualified:
        return False
    if problem.is_optimization:
        return effective == "UnsatClaim" or (effective == "ValidWitness" and rec["confirmed"])
    return effective in ("ValidWitness", "UnsatClaim")


def score_competition(verdicts: Mapping[str, Sequence[Mapping]], registry: Registry) -> list[ScoreRecord]:
    """Score every (category, problem) present in a verdicts file.

    The divisor for optimization problems is the number of solvers of the
    category registered for the problem's track; registered participants
    without results simply score nothing. Runtimes charge the full CPU
    limit for every run that did not solve its instance.
    """
    results = verdicts.get("result", [])
    quarantine = verdicts.get("quarantine", [])
    disq = {(d["solverId"], d["problemId"]): d["reason"] for d in verdicts.get("disqualification", [])}

    by_cp: dict[tuple[str, str], list[Mapping]] = defaultdict(list)
    instances: dict[tuple[str, str], set[str]] = defaultdict(set)
    limits: dict[tuple[str, str], float] = {}
    for rec in [*results, *quarantine]:
        cp = (rec["category"], rec["problemId"])
        instances[cp].add(rec["instanceId"])
        limits[cp] = max(limits.get(cp, 0.0), float(rec["cpuLimit"]))
    for rec in results:
        by_cp[(rec["category"], rec["problemId"])].append(rec)

    records: list[ScoreRecord] = []
    for (cat_name, problem_id) in sorted(instances):
        problem = registry.problems[problem_id]
        category = Category(cat_name)
        participants = sorted(s.id for s in registry.participants(problem, category))
        if not participants:
            continue
        inst_ids = sorted(instances[(cat_name, problem_id)])
        n = len(inst_ids)
        cpu_limit = limits[(cat_name, problem_id)]
        cell = {(r["solverId"], r["instanceId"]): r for r in by_cp[(cat_name, problem_id)]}

        if problem.is_optimization:
            per_instance = []
            for inst in inst_ids:
                qualities = {s: _quality(cell[(s, inst)]) if (s, inst) in cell else NOTHING for s in participants}
                per_instance.append(score_opt_instance(qualities, len(participants), n))
            pts = score_opt_problem(per_instance, [s for s in participants if (s, problem_id) in disq])
        else:
            if problem.kind not in (ProblemKind.DECISION, ProblemKind.QUERY):
                raise ValueError(f"cannot score {problem.kind} as decision")
            solved = {
                s: sum(1 for inst in inst_ids if (s, inst) in cell and _solved(cell[(s, inst)], problem, False))
                for s in participants
            }
            pts = score_decision(solved, n, [s for s in participants if (s, problem_id) in disq])

        for s in participants:
            is_dq = (s, problem_id) in disq
            times = []
            for inst in inst_ids:
                rec = cell.get((s, inst))
                if rec is not None and _solved(rec, problem, is_dq):
                    times.append(float(rec["cpuSeconds"]))
                else:
                    times.append(cpu_limit)
            records.append(
                ScoreRecord(
                    solver_id=s,
                    problem_id=problem_id,
                    points=pts.get(s, Fraction(0)),
                    disqualified=is_dq,
                    runtime_sum=math.fsum(times),
                    category=cat_name,
                    track=problem.track.value,
                    encoding_year=problem.encoding_year,
                    reason=disq.get((s, problem_id), ""),
                )
            )
    return records


def track_rankings(records: Sequence[ScoreRecord]) -> dict[str, dict[str, Ranking]]:
    """``{category: {track or 'overall': ranking}}``."""
    by_cat: dict[str, list[ScoreRecord]] = defaultdict(list)
    for rec in records:
        by_cat[rec.category].append(rec)
    return {cat: global_ranking(recs) for cat, recs in sorted(by_cat.items())}

