"""Score files and human/machine readable reports.

Score exports (``scores.csv``/``scores.jsonl``) carry points and
disqualifications only, so they depend on nothing but the verdicts and are
byte-stable across reruns. Measured runtimes only enter the ranking
exports, where they serve as the tie-breaker.
"""

from __future__ import annotations

import csv
import io
import json
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ledger import dumps
from .scorer import OVERALL, Ranking, ScoreRecord

FORMATS = ("table", "csv", "jsonl")

EXPORT_FIELDS = [
    "category",
    "solver",
    "problem",
    "track",
    "encoding_year",
    "points",
    "points_2dp",
    "disqualified",
    "disqualification_reason",
]


def render_points(value: Fraction) -> str:
    with localcontext() as ctx:
        ctx.prec = 50
        dec = Decimal(value.numerator) / Decimal(value.denominator)
        return str(dec.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _fraction_text(value: Fraction) -> str:
    return str(value)


# -- stage artifact: full score records ------------------------------------


def score_to_record(rec: ScoreRecord) -> dict:
    return {
        "category": rec.category,
        "solverId": rec.solver_id,
        "problemId": rec.problem_id,
        "track": rec.track,
        "encodingYear": rec.encoding_year,
        "points": _fraction_text(rec.points),
        "disqualified": rec.disqualified,
        "reason": rec.reason,
        "runtimeSum": rec.runtime_sum,
    }


def record_to_score(raw: Mapping) -> ScoreRecord:
    return ScoreRecord(
        solver_id=raw["solverId"],
        problem_id=raw["problemId"],
        points=Fraction(raw["points"]),
        disqualified=bool(raw["disqualified"]),
        runtime_sum=float(raw["runtimeSum"]),
        category=raw["category"],
        track=raw["track"],
        encoding_year=int(raw["encodingYear"]),
        reason=raw.get("reason", ""),
    )


def _write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    tmp.replace(path)
    return path


def write_scores(path: Path, records: Iterable[ScoreRecord]) -> Path:
    ordered = sorted(records, key=lambda r: (r.category, r.problem_id, r.solver_id))
    return _write_atomic(path, "".join(dumps(score_to_record(r)) + "\n" for r in ordered))


def read_scores(path: Path) -> list[ScoreRecord]:
    with open(path, encoding="utf-8") as fh:
        return [record_to_score(json.loads(line)) for line in fh if line.strip()]


# -- exports ----------------------------------------------------------------


def export_row(rec: ScoreRecord) -> dict:
    return {
        "category": rec.category,
        "solver": rec.solver_id,
        "problem": rec.problem_id,
        "track": rec.track,
        "encoding_year": rec.encoding_year,
        "points": rec.points,
        "points_2dp": render_points(rec.points),
        "disqualified": rec.disqualified,
        "disqualification_reason": rec.reason,
    }


def _csv_text(rows: Sequence[Mapping], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row[k]) for k in fields})
    return buf.getvalue()


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return _fraction_text(value)
    return value


def parse_scores_csv(path: Path) -> list[dict]:
    """Inverse of the ``scores.csv`` export."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            rows.append(
                {
                    "category": raw["category"],
                    "solver": raw["solver"],
                    "problem": raw["problem"],
                    "track": raw["track"],
                    "encoding_year": int(raw["encoding_year"]),
                    "points": Fraction(raw["points"]),
                    "points_2dp": raw["points_2dp"],
                    "disqualified": raw["disqualified"] == "true",
                    "disqualification_reason": raw["disqualification_reason"],
                }
            )
        return rows


def _ranking_rows(rankings: Mapping[str, Mapping[str, Ranking]]) -> list[dict]:
    rows = []
    for category, groups in rankings.items():
        for group, ranking in groups.items():
            for pos, entry in enumerate(ranking, 1):
                rows.append(
                    {
                        "category": category,
                        "group": group,
                        "rank": pos,
                        "solver": entry.solver_id,
                        "total_points": entry.total_points,
                        "total_points_2dp": render_points(entry.total_points),
                        "total_runtime": f"{entry.total_runtime:.2f}",
                    }
                )
    return rows


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], right: set[int] = frozenset()) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]

    def line(cells):
        return "  ".join(
            str(c).rjust(w) if i in right else str(c).ljust(w) for i, (c, w) in enumerate(zip(cells, widths))
        ).rstrip()

    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)]) + "\n"


def render_rankings(rankings: Mapping[str, Mapping[str, Ranking]]) -> str:
    parts = []
    for category, groups in rankings.items():
        for group, ranking in groups.items():
            title = "Overall" if group == OVERALL else group.replace("_", " ", 1)
            parts.append(f"== {category} / {title} ==\n")
            rows = [
                (str(pos), e.solver_id, render_points(e.total_points), f"{e.total_runtime:.2f}")
                for pos, e in enumerate(ranking, 1)
            ]
            parts.append(_table(("#", "solver", "points", "runtime[s]"), rows, right={0, 2, 3}))
            parts.append("\n")
    return "".join(parts)


def render_matrix(records: Sequence[ScoreRecord]) -> str:
    """Solvers x problems; both encodings of a domain sit side by side."""
    parts = []
    categories = sorted({r.category for r in records})
    for category in categories:
        recs = [r for r in records if r.category == category]
        problems = sorted({(r.track, r.problem_id) for r in recs})
        problem_ids = [p for _, p in problems]
        solvers = sorted({r.solver_id for r in recs})
        cell = {(r.solver_id, r.problem_id): r for r in recs}
        rows = []
        for s in solvers:
            row = [s]
            for p in problem_ids:
                rec = cell.get((s, p))
                if rec is None:
                    row.append("-")
                elif rec.disqualified:
                    row.append(f"{render_points(rec.points)} DQ")
                else:
                    row.append(render_points(rec.points))
            rows.append(row)
        parts.append(f"== {category} score matrix (DQ = disqualified) ==\n")
        parts.append(_table(["solver", *problem_ids], rows, right=set(range(1, len(problem_ids) + 1))))
        parts.append("\n")
    return "".join(parts)


def emit_reports(
    records: Sequence[ScoreRecord],
    rankings: Mapping[str, Mapping[str, Ranking]],
    out_dir: Path,
    formats: Iterable[str] = FORMATS,
) -> list[Path]:
    formats = list(formats)
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report format(s): {sorted(unknown)}")
    out_dir = Path(out_dir)
    ordered = sorted(records, key=lambda r: (r.category, r.problem_id, r.solver_id))
    exports = [export_row(r) for r in ordered]
    ranking_rows = _ranking_rows(rankings)
    ranking_fields = ["category", "group", "rank", "solver", "total_points", "total_points_2dp", "total_runtime"]
    written = []
    if "table" in formats:
        written.append(_write_atomic(out_dir / "rankings.txt", render_rankings(rankings)))
        written.append(_write_atomic(out_dir / "matrix.txt", render_matrix(ordered)))
    if "csv" in formats:
        written.append(_write_atomic(out_dir / "scores.csv", _csv_text(exports, EXPORT_FIELDS)))
        written.append(_write_atomic(out_dir / "rankings.csv", _csv_text(ranking_rows, ranking_fields)))
    if "jsonl" in formats:
        written.append(
            _write_atomic(
                out_dir / "scores.jsonl",
                "".join(dumps({k: _cell(v) for k, v in row.items()}) + "\n" for row in exports),
            )
        )
        written.append(
            _write_atomic(
                out_dir / "rankings.jsonl",
                "".join(dumps({k: _cell(v) for k, v in row.items()}) + "\n" for row in ranking_rows),
            )
        )
    return written
