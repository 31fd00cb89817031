#!/usr/bin/env python3
"""
Tests for the meta-constraint solver: modal table, satisfiability, entailment and splits
"""

import itertools
import random
from pathlib import Path

from core.builtins import default_table
from core.metaterms import Fails, Inv, Succeeds, TypeOf
from core.parser import parse_analysis_spec, parse_term
from core.solver import (
    DISPROVED,
    ERRORS,
    FAILS,
    PROVED,
    SAT,
    SUCCEEDS,
    UNSAT,
    Solver,
    Universe,
    denote_term,
    load_modal_table,
)
from core.terms import Atom, Bag, Compound, Failure, Float, Int, Var, VarName, make_list
from core.types import BaseType

SAMPLES = Path(__file__).parent / "samples"

INT = BaseType("int")
N, M, K = Var("N"), Var("M"), Var("K")


def _cmp(op: str, left, right):
    return Compound(op, (left, right))


def _letter(outcome) -> str:
    if outcome.is_proper:
        return SUCCEEDS
    return FAILS if isinstance(outcome, Failure) else ERRORS


_X, _Y = VarName("X"), VarName("Y")
_POOL = [
    Int(-1),
    Int(0),
    Int(2),
    Float(1.5),
    Atom("a"),
    Atom("[]"),
    _X,
    _Y,
    Compound("f", (Atom("a"),)),
    Compound("f", (_X,)),
    Compound("+", (Int(1), Int(2))),
    Compound("+", (_X, Int(1))),
    Compound("*", (Atom("a"), Int(2))),
    Compound("-", (Int(3), Float(0.5))),
    Compound("*", (Int(10**400), Float(1.5))),
    make_list([Atom("a")]),
]


def test_modal_table_agrees_with_execution():
    """Every ground call lands in the verdict of the first row its argument classes match"""
    solver = Solver()
    table = load_modal_table()
    builtins = default_table()
    ctx = solver.context(())
    rng = random.Random(42)
    checked = 0
    for row in table.all_rows():
        for _ in range(30):
            args = [rng.choice(_POOL) for _ in row.args]
            classes = [solver.arg_classes(a, ctx) for a in args]
            matched = table.lookup(row.predicate, classes)
            assert matched is not None
            goal = Compound(row.predicate, tuple(args))
            outcome = builtins.exe_seq([denote_term(goal)])
            assert _letter(outcome) in matched.verdict, f"{goal}: {outcome}"
            checked += 1
    assert checked > 0


def test_float_products_may_overflow():
    solver = Solver()
    table = load_modal_table()
    ctx = solver.context(())
    mixed = Compound("*", (Int(10**400), Float(1.5)))
    row = table.lookup("is", [solver.arg_classes(a, ctx) for a in (_X, mixed)])
    assert ERRORS in row.verdict
    integral = Compound("*", (Int(10**400), Int(3)))
    row = table.lookup("is", [solver.arg_classes(a, ctx) for a in (_X, integral)])
    assert row.verdict == frozenset({SUCCEEDS})


def test_linear_entailment_is_transitive():
    where = [TypeOf(INT, N), TypeOf(INT, M), TypeOf(INT, K), Succeeds((_cmp("<", N, M),)), Succeeds((_cmp("<", M, K),))]
    solver = Solver()
    assert solver.entails(where, Succeeds((_cmp("<", N, K),))) == PROVED
    assert solver.entails(where, Fails((_cmp(">=", N, K),))) == DISPROVED
    assert solver.entails(where, Fails((_cmp("<", K, N),))) == PROVED


def test_contradictions_are_refuted():
    solver = Solver()
    where = [TypeOf(INT, N), Succeeds((_cmp("<", N, Int(0)),)), Succeeds((_cmp(">", N, Int(0)),))]
    assert solver.msat(where) == UNSAT
    assert solver.msat([TypeOf(BaseType("var"), N), TypeOf(BaseType("num"), N)]) == UNSAT


def test_satisfiable_constraints_have_a_witness():
    """A positive number exists without an explicit universe"""
    solver = Solver()
    where = [TypeOf(BaseType("num"), N), Succeeds((_cmp(">", N, Int(0)),))]
    assert solver.msat(where) == SAT
    assert solver.witness(where, Universe()) == {N: Int(1)}


def test_unbound_comparison_errors():
    """A comparison on a variable-typed argument can only raise an error"""
    solver = Solver()
    where = [TypeOf(BaseType("var"), N)]
    assert solver.entails(where, Succeeds((_cmp("<", N, Int(1)),))) == DISPROVED
    assert solver.modal_seq((_cmp("<", N, Int(1)),), solver.context(where)).outcomes == frozenset({ERRORS})


_GOALS = [
    _cmp("<", N, M),
    _cmp("=<", N, Int(0)),
    _cmp(">", M, Int(1)),
    _cmp(">=", N, M),
    _cmp("=:=", N, M),
    _cmp("<", M, Int(1)),
    _cmp(">", N, Int(-1)),
]


def _random_constraint(rng: random.Random):
    goal = rng.choice(_GOALS)
    return Succeeds((goal,)) if rng.random() < 0.6 else Fails((goal,))


def test_entailment_soundness_property():
    """Proved constraints hold in every grounding, disproved ones in none"""
    rng = random.Random(2024)
    solver = Solver()
    universe = Universe(ints=(-2, -1, 0, 1, 2))
    decided = 0
    for _ in range(200):
        where = [TypeOf(INT, N), TypeOf(INT, M)] + [_random_constraint(rng) for _ in range(rng.randint(0, 2))]
        candidate = _random_constraint(rng)
        answer = solver.entails(where, candidate)
        groundings = list(solver.groundings(where, universe, metavars=[N, M]))
        if answer == PROVED:
            decided += 1
            assert all(solver.holds(candidate, g) for g in groundings)
        elif answer == DISPROVED:
            decided += 1
            assert not any(solver.holds(candidate, g) for g in groundings)
    assert decided > 0


def test_refutation_soundness_property():
    """A refuted conjunction has no grounding"""
    rng = random.Random(5)
    solver = Solver()
    universe = Universe(ints=(-2, -1, 0, 1, 2))
    for _ in range(200):
        where = [TypeOf(INT, N), TypeOf(INT, M)] + [_random_constraint(rng) for _ in range(rng.randint(1, 3))]
        if solver.refuted(solver.context(where)):
            assert not list(solver.groundings(where, universe, metavars=[N, M]))


def test_complement_builds_exhaustive_split():
    solver = Solver()
    where = [TypeOf(INT, N)]
    split = solver.complement(_cmp(">", N, Int(0)), solver.context(where))
    assert split is not None
    assert split.alternatives == (
        (Succeeds((_cmp(">", N, Int(0)),)),),
        (Succeeds((_cmp("=<", N, Int(0)),)),),
    )
    assert solver.validate_split(where, split)


def test_no_split_on_non_arithmetic_arguments():
    solver = Solver()
    where = [TypeOf(BaseType("const"), N)]
    assert solver.complement(_cmp(">", N, Int(0)), solver.context(where)) is None


def test_derived_equalities():
    solver = Solver()
    where = [TypeOf(INT, N), TypeOf(INT, M), Succeeds((_cmp("=<", N, M),)), Succeeds((_cmp("=<", M, N),))]
    assert solver.derived_equalities(solver.context(where)) == {N: M}
    where = [TypeOf(INT, N), Succeeds((_cmp(">=", N, Int(1)),)), Succeeds((_cmp("=<", N, Int(1)),))]
    assert solver.derived_equalities(solver.context(where)) == {N: Int(1)}


def test_instantiate_invariant_pattern():
    """A closed store instantiates the set pattern with an empty remainder"""
    spec = parse_analysis_spec((SAMPLES / "set.cspec").read_text(encoding="utf-8"))
    solver = Solver(spec.types, invariant=spec.invariant)
    (pattern,) = spec.invariant.patterns
    a = Var("A")
    results = list(solver.instantiate_pattern(Bag((parse_term("set(A)"),)), pattern, solver.context(())))
    assert len(results) == 1
    bindings, conditions = results[0]
    assert a in bindings.values()
    assert any(isinstance(c, TypeOf) and c.term == a for c in conditions)
    assert Bag(()) in bindings.values()
    assert not list(solver.instantiate_pattern(Bag((parse_term("item(a)"),)), pattern, solver.context(())))


def test_invariant_entailment_from_types():
    spec = parse_analysis_spec((SAMPLES / "zigzag.cspec").read_text(encoding="utf-8"))
    solver = Solver(spec.types, invariant=spec.invariant)
    store = Bag((parse_term("p(N)"),))
    where = [TypeOf(BaseType("num"), N)]
    assert solver.entails(where, Inv(store)) == PROVED
    assert solver.msat([Inv(Bag((parse_term("p(N)"), parse_term("q(N)"))))]) == UNSAT


def test_groundings_respect_types():
    solver = Solver()
    universe = Universe(ints=(0, 1), consts=("a",))
    where = [TypeOf(INT, N), Succeeds((_cmp(">", N, Int(0)),))]
    assert list(solver.groundings(where, universe)) == [{N: Int(1)}]
    pairs = {(g[N], g[M]) for g in solver.groundings([TypeOf(INT, N), TypeOf(INT, M)], universe)}
    assert pairs == set(itertools.product([Int(0), Int(1)], repeat=2))
