from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aspcomp.errors import ProtocolViolation
from aspcomp.protocol import NoClaim, OptWitness, Unsat, Witness, parse_solver_output, render_claim


@pytest.mark.parametrize(
    "raw, claim",
    [
        ("UNKNOWN\n", NoClaim()),
        ("", NoClaim()),
        ("INCONSISTENT\n", Unsat()),
        ("ANSWER\na b c\nCOST 7\nANSWER\na b\nCOST 5\nOPTIMUM FOUND\n", OptWitness("a b", (5,), True)),
        ("ANSWER\np(1) q\n", Witness("p(1) q")),
        ("ANSWER\nx\nANSWER\ny\n", Witness("y")),
        ("ANSWER\nx\nCOST 3 -1 2\n", OptWitness("x", (3, -1, 2), False)),
        ("% solver banner\n\nANSWER\n\n", Witness("")),
        (b"ANSWER\r\nx\r\nCOST 1\r\n", OptWitness("x", (1,), False)),
    ],
)
def test_parse(raw, claim):
    assert parse_solver_output(raw) == claim


@pytest.mark.parametrize(
    "raw",
    [
        "ANSWER\nx\nCOST seven\n",
        "OPTIMUM FOUND\n",
        "ANSWER\nx\nOPTIMUM FOUND\n",
        "COST 1\n",
        "ANSWER\nx\nCOST 1\nCOST 2\n",
        "ANSWER\nx\nINCONSISTENT\n",
        "INCONSISTENT\nANSWER\nx\n",
        "ANSWER\nx\nCOST 1\nOPTIMUM FOUND\nANSWER\ny\n",
        "SATISFIABLE\n",
        "ANSWER\n",
    ],
)
def test_violations(raw):
    with pytest.raises(ProtocolViolation):
        parse_solver_output(raw)


def test_truncated_output_keeps_last_complete_costed_answer():
    raw = "ANSWER\na\nCOST 12\nANSWER\nb\nCOST 10\nANSWER\nc"
    assert parse_solver_output(raw, truncated=True) == OptWitness("b", (10,), False)
    raw = "ANSWER\na\nCOST 12\nANSWER\nb\nCOST 10\nANSWER\nc d\n"
    assert parse_solver_output(raw, truncated=True) == OptWitness("b", (10,), False)
    assert parse_solver_output("ANSWER\n", truncated=True) == NoClaim()


def test_opt_witness_needs_cost():
    with pytest.raises(ValueError):
        OptWitness("a", ())


atoms = st.from_regex(r"[a-z][a-z0-9(),]{0,20}( [a-z][a-z0-9(),]{0,20}){0,4}", fullmatch=True)
claims = st.one_of(
    st.just(NoClaim()),
    st.just(Unsat()),
    atoms.map(Witness),
    st.builds(OptWitness, atoms, st.lists(st.integers(-50, 10**6), min_size=1, max_size=3).map(tuple), st.booleans()),
)


@given(claims)
def test_render_roundtrip(claim):
    assert parse_solver_output(render_claim(claim)) == claim
