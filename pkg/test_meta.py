#!/usr/bin/env python3
"""
Tests for meta-states: lifting, denotation, covering samples, reduction and meta transitions
"""

from pathlib import Path

import pytest

from core.errors import ContractError
from core.meta import (
    cover_sample,
    denote,
    lift,
    lift_state,
    meta_successors,
    reduce,
    undecided_guards,
    variants,
)
from core.metaterms import ERROR_META, FAILED_META, MIXED, FreshVars, Succeeds, TypeOf, meta_state
from core.parser import parse_program, parse_query, parse_term
from core.semantics import successors
from core.solver import Solver, Universe
from core.terms import ERROR_STATE, FAILURE_STATE, Atom, Compound, Int, Var, VarName, make_state
from core.types import BaseType, ListOf

SAMPLES = Path(__file__).parent / "samples"

INT = BaseType("int")
NUM = BaseType("num")
n, m = Var("n"), Var("m")


def _program(name: str):
    return parse_program((SAMPLES / name).read_text(encoding="utf-8"))


def _cmp(op: str, left, right):
    return Compound(op, (left, right))


@pytest.fixture
def zigzag_program():
    return _program("zigzag.chr")


def test_lift_renames_consistently():
    lifted, mapping = lift(parse_term("p(X, Y, X)"))
    assert set(mapping) == {Var("X"), Var("Y")}
    assert lifted.args[0] == lifted.args[2] != lifted.args[1]
    assert all(isinstance(a, Var) and a.name not in ("X", "Y") for a in lifted.args)


def test_lifted_state_variables_are_fresh():
    ms = lift_state(parse_query("p(X), q(Y)"))
    (fresh,) = [c for c in ms.where if isinstance(c, FreshVars)]
    assert len(fresh.vars) == 2


def test_denote_ground_meta_states():
    ms = meta_state([Compound("p", (VarName("X"),))])
    assert denote(ms) == make_state(parse_query("p(X)"))
    assert denote(meta_state([], pending=[_cmp("<", Int(2), Int(1))])) == FAILURE_STATE
    assert denote(meta_state([], pending=[_cmp("<", Atom("a"), Int(1))])) == ERROR_STATE
    with pytest.raises(ContractError):
        denote(meta_state([Compound("p", (n,))]))


def test_cover_sample_enumerates_typed_groundings():
    """A constant-typed argument covers one state per constant of the universe"""
    ms = meta_state([Compound("p", (n,))], where=[TypeOf(BaseType("const"), n)])
    found = cover_sample(ms, Solver(), Universe(consts=("a", "b")))
    assert found == {make_state(parse_query("p(a)")), make_state(parse_query("p(b)"))}


def test_reduce_discharges_decided_builtins():
    solver = Solver()
    assert reduce(meta_state([], pending=[_cmp("<", Int(1), Int(2))]), solver).is_proper
    assert reduce(meta_state([], pending=[_cmp("<", Int(2), Int(1))]), solver) == FAILED_META
    assert reduce(meta_state([], pending=[_cmp("<", Atom("a"), Int(1))]), solver) == ERROR_META
    mixed = reduce(meta_state([Compound("p", (n,))], pending=[_cmp(">", n, Int(0))], where=[TypeOf(INT, n)]), solver)
    assert mixed.status == MIXED
    assert mixed.pending == (_cmp(">", n, Int(0)),)


def test_meta_successors_of_p(zigzag_program):
    ms = meta_state([Compound("p", (n,))], where=[TypeOf(NUM, n)])
    labelled = meta_successors(ms, zigzag_program, Solver())
    assert sorted(label for label, _ in labelled) == ["r1", "r2"]
    assert {t.items for _, t in labelled} == {(Compound("q", (n,)),), (Compound("r", (n,)),)}


def test_guard_needs_proof(zigzag_program):
    """q(n) steps only once n > 0 is known"""
    solver = Solver()
    blocked = meta_state([Compound("q", (n,))], where=[TypeOf(NUM, n)])
    assert meta_successors(blocked, zigzag_program, solver) == []
    assert undecided_guards(blocked, zigzag_program, solver) == [_cmp(">", n, Int(0))]
    allowed = blocked.constrain(Succeeds((_cmp(">", n, Int(0)),)))
    (label, target), = meta_successors(allowed, zigzag_program, solver)
    assert label == "r3"
    assert target.is_proper and target.items == (Compound("r", (n,)),)


def test_variant_key_respects_types_and_fixed_vars():
    a = meta_state([Compound("p", (n,))], where=[TypeOf(INT, n)])
    b = meta_state([Compound("p", (m,))], where=[TypeOf(INT, m)])
    c = meta_state([Compound("p", (m,))], where=[TypeOf(BaseType("const"), m)])
    assert variants(a, b)
    assert not variants(a, c)
    assert not variants(a, b, fixed=[n])


def _covered_states():
    positive = BaseType("positive_int")
    const_list = ListOf(BaseType("const"))
    const = BaseType("const")
    x, y, ls = Var("x"), Var("y"), Var("l")
    return {
        "zigzag.chr": [
            meta_state([Compound("p", (n,))], where=[TypeOf(INT, n)]),
            meta_state([Compound("q", (n,))], where=[TypeOf(INT, n), Succeeds((_cmp(">", n, Int(0)),))]),
            meta_state([Compound("r", (n,))], where=[TypeOf(INT, n), Succeeds((_cmp("=<", n, Int(0)),))]),
        ],
        "gcd.chr": [
            meta_state([Compound("gcd", (n,)), Compound("gcd", (n,))], where=[TypeOf(positive, n)]),
            meta_state(
                [Compound("gcd", (n,)), Compound("gcd", (m,))],
                where=[TypeOf(positive, n), TypeOf(positive, m), Succeeds((_cmp("<", n, m),))],
            ),
        ],
        "set.chr": [
            meta_state([Compound("set", (ls,)), Compound("item", (x,))], where=[TypeOf(const_list, ls), TypeOf(const, x)]),
            meta_state(
                [Compound("set", (ls,)), Compound("item", (x,)), Compound("item", (y,))],
                where=[TypeOf(const_list, ls), TypeOf(const, x), TypeOf(const, y)],
            ),
        ],
    }


def _grounded_transitions(name: str):
    """Each grounding of a sample meta-state with its object and meta-level successors"""
    program = _program(name)
    solver = Solver()
    universe = Universe(ints=(-2, -1, 0, 1, 2), consts=("a", "b"))
    for ms in _covered_states()[name]:
        transitions = meta_successors(ms, program, solver)
        assert transitions, ms
        for grounding in solver.groundings(ms.where, universe, metavars=ms.store_vars()):
            source = denote(ms.substitute(grounding))
            objects = {t for _, t in successors(program, source)}
            metas = {denote(t.substitute(grounding)) for _, t in transitions}
            yield source, objects, metas


@pytest.mark.parametrize("name", ["zigzag.chr", "gcd.chr", "set.chr"])
def test_covering_soundness(name):
    """Every grounding of a meta transition is an object transition"""
    checked = 0
    for source, objects, metas in _grounded_transitions(name):
        assert metas <= objects, source
        checked += 1
    assert checked > 0


@pytest.mark.parametrize("name", ["zigzag.chr", "gcd.chr", "set.chr"])
def test_successor_coverage(name):
    """Every object transition of a grounding is the grounding of a meta transition"""
    checked = 0
    for source, objects, metas in _grounded_transitions(name):
        assert objects <= metas, source
        checked += 1
    assert checked > 0
