from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import CompetitionError, ConfigError, StageError
from .pipeline import (
    CompetitionConfig,
    make_selection,
    report_stage,
    run_competition,
    run_stage,
    score_stage,
    selection_lines,
    verify_stage,
)
from .registry import Category, TrackId, load_registry, parse_size
from .report import FORMATS

log = logging.getLogger("aspcomp")


def parse_limits(text: str | None) -> dict:
    """``cpu=<s>,mem=<bytes>,cores=<n>`` (any subset; mem accepts K/M/G suffixes)."""
    if not text:
        return {}
    out: dict = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"bad limits entry {part!r}")
        try:
            if key == "cpu":
                out["cpu_seconds"] = int(value)
            elif key == "mem":
                out["memory_bytes"] = parse_size(value.strip())
            elif key == "cores":
                out["cores"] = int(value)
            elif key == "mode":
                out["time_mode"] = value.strip()
            else:
                raise ConfigError(f"unknown limit {key!r}")
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    return out


def parse_tracks(text: str | None) -> frozenset[TrackId]:
    if text is None:
        return frozenset(TrackId)
    tracks = set()
    for item in filter(None, (t.strip() for t in text.split(","))):
        matches = [t for t in TrackId if item in (t.value, t.name, t.short)]
        if not matches:
            raise ConfigError(f"unknown track {item!r}")
        tracks.add(matches[0])
    if not tracks:
        raise ConfigError("empty track selection")
    return frozenset(tracks)


def _formats(text: str | None) -> tuple[str, ...]:
    if not text:
        return FORMATS
    formats = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return formats


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aspcomp", description="ASP competition orchestration engine")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    registry = argparse.ArgumentParser(add_help=False)
    registry.add_argument("--registry", required=True, type=Path)
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", required=True)
    seeded.add_argument("--n", type=int, default=None, help="instances per domain (default from registry)")
    seeded.add_argument("--tracks", default=None, help="comma-separated, e.g. T1,T3 (default: all)")
    running = argparse.ArgumentParser(add_help=False)
    running.add_argument("--category", required=True, choices=[c.value for c in Category])
    running.add_argument("--limits", default=None, help="cpu=<s>,mem=<bytes>,cores=<n>")
    running.add_argument("--cores", type=int, default=None, help="machine core budget (default: affinity mask)")

    p = sub.add_parser("select-instances", parents=[registry, seeded], help="print the seeded instance selection")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("run", parents=[registry, seeded, running], help="execute solvers into a ledger")
    p.add_argument("--out", required=True, type=Path, help="ledger file")

    p = sub.add_parser("verify", parents=[registry], help="adjudicate a ledger")
    p.add_argument("--ledger", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="verdicts file")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("score", parents=[registry], help="score adjudicated verdicts")
    p.add_argument("--verdicts", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="scores file")

    p = sub.add_parser("report", help="render rankings and score exports")
    p.add_argument("--scores", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="report directory")
    p.add_argument("--format", default=None, help=f"comma-separated subset of {','.join(FORMATS)}")

    p = sub.add_parser("compete", parents=[registry, seeded, running], help="run the whole pipeline")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--format", default=None)
    p.add_argument("--jobs", type=int, default=1, help="concurrent checker invocations")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "select-instances":
        registry = load_registry(args.registry)
        selection = make_selection(registry, args.seed, args.n, parse_tracks(args.tracks))
        text = "".join(line + "\n" for line in selection_lines(selection))
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.command == "run":
        registry = load_registry(args.registry)
        outcomes = run_stage(
            registry,
            args.seed,
            Category(args.category),
            args.out,
            n=args.n,
            tracks=parse_tracks(args.tracks),
            limits=parse_limits(args.limits),
            cores=args.cores,
        )
        log.info("%d runs in ledger %s", len(outcomes), args.out)
        return 0
    if args.command == "verify":
        verify_stage(load_registry(args.registry), args.ledger, args.out, jobs=args.jobs)
        return 0
    if args.command == "score":
        score_stage(load_registry(args.registry), args.verdicts, args.out)
        return 0
    if args.command == "report":
        for path in report_stage(args.scores, args.out, _formats(args.format)):
            print(path)
        return 0
    if args.command == "compete":
        config = CompetitionConfig(
            registry_path=args.registry,
            seed=args.seed,
            category=Category(args.category),
            out_dir=args.out,
            tracks=parse_tracks(args.tracks),
            instances_per_domain=args.n,
            limits=parse_limits(args.limits),
            cores=args.cores,
            formats=_formats(args.format),
            checker_jobs=args.jobs,
        )
        status = run_competition(config)
        sys.stdout.write((config.paths["reports"] / "rankings.txt").read_text()
                         if "table" in config.formats else "")
        return status
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"aspcomp: configuration error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"aspcomp: {exc}", file=sys.stderr)
        return 1
    except (CompetitionError, OSError, ValueError, KeyError) as exc:
        print(f"aspcomp: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
