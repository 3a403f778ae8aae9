"""Line-oriented solver output protocol.

::

    ANSWER
    <atoms of one witness on a single line>
    COST <v_k> ... <v_1>        # optional, most significant level first
    OPTIMUM FOUND               # optional, after the last answer
    INCONSISTENT                # instead of any answer
    UNKNOWN                     # no claim

Blank lines and ``%`` comment lines are ignored. The last complete answer
wins.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

from .errors import ProtocolViolation


@dataclass(frozen=True)
class Witness:
    atoms: str

    @property
    def digest(self) -> str:
        return witness_digest(self.atoms)


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class OptWitness:
    atoms: str
    cost: tuple[int, ...]
    optimum_claimed: bool = False

    def __post_init__(self):
        if not self.cost:
            raise ValueError("OptWitness needs a non-empty cost tuple")

    @property
    def digest(self) -> str:
        return witness_digest(self.atoms)


@dataclass(frozen=True)
class NoClaim:
    pass


Claim = Union[Witness, Unsat, OptWitness, NoClaim]


def witness_digest(atoms: str) -> str:
    return hashlib.sha256(atoms.encode("utf-8")).hexdigest()


def parse_cost(fields: list[str]) -> tuple[int, ...]:
    if not fields:
        raise ProtocolViolation("COST line without values")
    try:
        return tuple(int(f) for f in fields)
    except ValueError:
        raise ProtocolViolation(f"non-integer COST fields: {' '.join(fields)}") from None


def parse_solver_output(raw: bytes | str, *, truncated: bool = False) -> Claim:
    """Turn a solver's stdout into a :class:`Claim`.

    With ``truncated`` set (the process was killed), a partial final line is
    discarded and so is a final answer still waiting for its ``COST`` line
    when earlier answers carried one.
    """
    text = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
    lines = text.split("\n")
    if text.endswith("\n") or truncated:
        # either the empty tail after the final newline or a partial line
        lines = lines[:-1]

    answers: list[list] = []  # [atoms, cost]
    inconsistent = False
    optimum = False
    expect_atoms = False

    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r")
        if expect_atoms:
            answers.append([line.strip(), None])
            expect_atoms = False
            continue
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        head, *rest = stripped.split()
        if stripped == "ANSWER":
            if inconsistent:
                raise ProtocolViolation(f"line {lineno}: ANSWER after INCONSISTENT")
            if optimum:
                raise ProtocolViolation(f"line {lineno}: ANSWER after OPTIMUM FOUND")
            expect_atoms = True
        elif head == "COST":
            if not answers:
                raise ProtocolViolation(f"line {lineno}: COST without a preceding answer")
            if answers[-1][1] is not None:
                raise ProtocolViolation(f"line {lineno}: second COST for one answer")
            answers[-1][1] = parse_cost(rest)
        elif stripped == "OPTIMUM FOUND":
            if not answers:
                raise ProtocolViolation(f"line {lineno}: OPTIMUM FOUND without a preceding answer")
            if answers[-1][1] is None:
                raise ProtocolViolation(f"line {lineno}: OPTIMUM FOUND for an answer without COST")
            optimum = True
        elif stripped == "INCONSISTENT":
            if answers:
                raise ProtocolViolation(f"line {lineno}: INCONSISTENT after an answer")
            inconsistent = True
        elif stripped == "UNKNOWN":
            pass
        else:
            raise ProtocolViolation(f"line {lineno}: unrecognized output {stripped[:60]!r}")

    if expect_atoms:
        if not truncated:
            raise ProtocolViolation("ANSWER without an atom line")
    if inconsistent:
        return Unsat()
    if not answers:
        return NoClaim()

    atoms, cost = answers[-1]
    if truncated and cost is None and any(c is not None for _, c in answers[:-1]):
        atoms, cost = _last_costed(answers)
    if cost is None:
        return Witness(atoms)
    return OptWitness(atoms, cost, optimum)


def _last_costed(answers):
    for atoms, cost in reversed(answers):
        if cost is not None:
            return atoms, cost
    raise AssertionError("unreachable")


def render_claim(claim: Claim) -> str:
    """Inverse of :func:`parse_solver_output` for well-formed claims."""
    if isinstance(claim, Unsat):
        return "INCONSISTENT\n"
    if isinstance(claim, NoClaim):
        return "UNKNOWN\n"
    out = f"ANSWER\n{claim.atoms}\n"
    if isinstance(claim, OptWitness):
        out += "COST " + " ".join(map(str, claim.cost)) + "\n"
        if claim.optimum_claimed:
            out += "OPTIMUM FOUND\n"
    return out
