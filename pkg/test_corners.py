#!/usr/bin/env python3
"""
Tests for critical corner generation, join search, oracle validation and the full check
"""

import logging
from pathlib import Path

import pytest

from core.builtins import default_table
from core.corners import (
    ALPHA1,
    ALPHA2,
    ALPHA3,
    BETA1,
    CONFLUENT,
    INCONSISTENT,
    JOINABLE,
    NOT_CONFLUENT,
    NOT_JOINABLE_VERDICT,
    SETTLED,
    SPLIT_JOINABLE,
    UNKNOWN_SUMMARY,
    CheckOptions,
    Corner,
    CornerGenerator,
    JoinSearch,
    Verdict,
    alpha1_corners,
    alpha2_corners,
    alpha3_corners,
    analyze_corner,
    beta_corners,
    build_solver,
    builtin_templates,
    check,
    check_invariant_closure,
    join_search,
    observe,
    oracle_validate,
    validate_result,
)
from core.errors import SpecError
from core.parser import parse_analysis_spec, parse_program, parse_query
from core.solver import Solver, Universe, load_modal_table
from core.specs import AnalysisSpec
from core.terms import ERROR_STATE, Bag, Compound, Int, VarName, make_state

SAMPLES = Path(__file__).parent / "samples"


def _load(name: str, spec_name: str = None):
    program = parse_program((SAMPLES / f"{name}.chr").read_text(encoding="utf-8"))
    spec = AnalysisSpec()
    if spec_name:
        spec = parse_analysis_spec((SAMPLES / f"{spec_name}.cspec").read_text(encoding="utf-8"))
    return program, spec


def _analyze(name: str, spec_name: str = None, **flags):
    program, spec = _load(name, spec_name)
    options = CheckOptions(assume_termination=True, observable=not spec.invariant.trivial, **flags)
    solver = build_solver(spec, default_table(), options, load_modal_table())
    return check(program, solver, options), solver


def _of_kind(analysis, kind):
    return [r for r in analysis.results if r.corner.kind == kind]


def test_zigzag_single_alpha1_corner():
    """The r1/r2 overlap is found once; a rule against itself is not a corner"""
    program, spec = _load("zigzag")
    corners = alpha1_corners(program, Solver(spec.types, invariant=spec.invariant))
    assert len(corners) == 1
    assert len(corners[0].ancestor.items) == 1


def test_zigzag_not_confluent_without_invariant():
    analysis, _ = _analyze("zigzag")
    (result,) = _of_kind(analysis, ALPHA1)
    assert result.verdict.kind == NOT_JOINABLE_VERDICT
    assert result.verdict.witness is not None
    assert analysis.summary == NOT_CONFLUENT


def test_zigzag_observably_confluent_by_split():
    """Under the numeric invariant the corner joins on both sides of n > 0"""
    analysis, _ = _analyze("zigzag", "zigzag", modulo_equivalence=True)
    (result,) = _of_kind(analysis, ALPHA1)
    assert result.verdict.kind == SPLIT_JOINABLE
    (specialized,) = result.observed
    (n,) = specialized.ancestor.items[0].args
    goals = result.verdict.split.alternatives
    assert all(len(alternative) == 1 and len(alternative[0].goals) == 1 for alternative in goals)
    assert {alternative[0].goals[0] for alternative in goals} == {
        Compound(">", (n, Int(0))),
        Compound("=<", (n, Int(0))),
    }
    assert all(branch.settled for branch in result.verdict.branches)
    assert all(r.verdict.kind == INCONSISTENT for r in _of_kind(analysis, ALPHA2) + _of_kind(analysis, ALPHA3))
    assert analysis.summary == CONFLUENT


def test_summary_needs_termination_assumption():
    program, spec = _load("zigzag", "zigzag")
    options = CheckOptions(observable=True)
    solver = build_solver(spec, default_table(), options, load_modal_table())
    analysis = check(program, solver, options)
    assert all(r.verdict.kind in SETTLED for r in analysis.results)
    assert analysis.summary == UNKNOWN_SUMMARY


def test_empty_program_order_of_builtins():
    """X is Y+1 errors before Y = 2 and succeeds after it"""
    program = parse_program("")
    options = CheckOptions(templates=["is", "="], assume_termination=True)
    solver = build_solver(AnalysisSpec(), default_table(), options, load_modal_table())
    analysis = check(program, solver, options)
    assert analysis.summary == NOT_CONFLUENT
    (result,) = [
        r
        for r in analysis.results
        if r.verdict.kind == NOT_JOINABLE_VERDICT and {t.functor for t in r.corner.ancestor.items} == {"is", "="}
    ]
    assert "error" in (result.verdict.witness["left"], result.verdict.witness["right"])

    grounding = {}
    for item in result.corner.ancestor.items:
        if item.functor == "is":
            grounding.update({item.args[0]: VarName("X"), item.args[1]: Compound("+", (VarName("Y"), Int(1)))})
        else:
            grounding.update({item.args[0]: VarName("Y"), item.args[1]: Int(2)})
    if result.corner.ancestor.store.rest is not None:
        grounding[result.corner.ancestor.store.rest] = Bag(())
    search = JoinSearch(program, solver, universe=analysis.universe)
    witness = search.find_witness(result.corner.substitute(grounding))
    assert witness["ancestor"] == str(make_state(parse_query("X is Y + 1, Y = 2")))
    assert {witness["left"], witness["right"]} == {str(ERROR_STATE), str(make_state(parse_query("X is 2 + 1")))}


def test_gcd_confluent_over_positive_integers():
    analysis, _ = _analyze("gcd", "gcd")
    assert len(_of_kind(analysis, ALPHA1)) == 5
    assert analysis.count(NOT_JOINABLE_VERDICT) == 0
    assert analysis.summary == CONFLUENT


def test_set_confluent_modulo_permutation():
    analysis, _ = _analyze("set", "set", modulo_equivalence=True)
    assert analysis.mode == "confluence-modulo-equivalence"
    alpha = _of_kind(analysis, ALPHA1)
    assert len(alpha) == 2
    assert {r.verdict.kind for r in alpha} == {INCONSISTENT, JOINABLE}
    joined = [r for r in alpha if r.verdict.kind == JOINABLE][0]
    assert joined.verdict.proof["meet"] == "equivalent"
    assert [r.verdict.kind for r in _of_kind(analysis, BETA1)] == [JOINABLE]
    assert analysis.summary == CONFLUENT


def test_set_not_confluent_without_equivalence():
    analysis, _ = _analyze("set", "set", modulo_equivalence=True, invariant_only=True)
    assert analysis.mode == "confluence"
    assert not _of_kind(analysis, BETA1)
    assert analysis.summary == NOT_CONFLUENT


def test_generator_drops_duplicate_corners():
    program, spec = _load("gcd", "gcd")
    solver = Solver(spec.types, invariant=spec.invariant)
    templates = builtin_templates(solver.builtins)
    generator = CornerGenerator(program, solver, templates)
    first = generator.alpha1()
    assert first
    assert generator.alpha1() == []


def test_observe_specializes_to_invariant_patterns():
    program, spec = _load("zigzag", "zigzag")
    solver = Solver(spec.types, invariant=spec.invariant)
    (corner,) = alpha1_corners(program, solver)
    (specialized,) = observe(corner, solver)
    assert len(specialized.where) > len(corner.where)


@pytest.mark.parametrize("name", ["zigzag", "set", "gcd"])
def test_oracle_agrees_on_sample_bundles(name):
    analysis, solver = _analyze(name, name, modulo_equivalence=True)
    search = JoinSearch(analysis.program, solver, universe=analysis.universe)
    outcomes = [validate_result(r, search) for r in analysis.results]
    assert all(o.agreement for o in outcomes)
    assert sum(o.checked for o in outcomes) > 0


def test_invariant_closure_violation():
    """p(N) may step to q(N), which the invariant does not describe"""
    program = parse_program("p(X) <=> q(X).")
    spec = parse_analysis_spec("invariant {p(N)} where type(num, N).")
    solver = Solver(spec.types, invariant=spec.invariant)
    with pytest.raises(SpecError):
        check_invariant_closure(program, solver, Universe())


def test_oracle_flags_a_wrong_verdict():
    """Claiming the zigzag corner joinable without the invariant is refuted by q(X), r(X)"""
    program, _ = _load("zigzag")
    solver = Solver()
    (corner,) = alpha1_corners(program, solver)
    search = JoinSearch(program, solver, universe=Universe())
    outcome = oracle_validate(corner, Verdict(JOINABLE), search)
    assert not outcome.agreement
    assert outcome.details


def test_builtin_corner_generators():
    solver = Solver()
    templates = builtin_templates(solver.builtins, ["is", "="])
    assert alpha3_corners(solver, templates)
    program, _ = _load("zigzag")
    assert all(c.kind == ALPHA2 for c in alpha2_corners(program, solver, templates))
    assert beta_corners(program, solver, templates) == []


def test_join_search_on_a_single_corner():
    program, spec = _load("zigzag", "zigzag")
    solver = Solver(spec.types, invariant=spec.invariant)
    (corner,) = alpha1_corners(program, solver)
    (specialized,) = observe(corner, solver)
    verdict = join_search(specialized, program, solver)
    assert verdict.kind == SPLIT_JOINABLE


@pytest.mark.parametrize(
    "name, spec_name",
    [("zigzag", None), ("zigzag", "zigzag"), ("gcd", "gcd"), ("set", "set")],
)
def test_swapping_wings_keeps_the_verdict(name, spec_name):
    analysis, solver = _analyze(name, spec_name, modulo_equivalence=True)
    options = analysis.options
    search = JoinSearch(analysis.program, solver, options.fuel, options.split_budget, analysis.universe)
    for result in analysis.results:
        corner = result.corner
        swapped = Corner(corner.kind, corner.ancestor, corner.right, corner.left, corner.where, corner.provenance)
        verdict, _ = analyze_corner(swapped, search)
        assert verdict.kind == result.verdict.kind, corner.provenance


def test_check_logs_the_corner_count(caplog):
    caplog.set_level(logging.INFO, logger="core.corners")
    corners_logger = logging.getLogger("core.corners")
    corners_logger.addHandler(caplog.handler)
    try:
        analysis, _ = _analyze("gcd", "gcd")
    finally:
        corners_logger.removeHandler(caplog.handler)
    assert f"Analyzing {len(analysis.results)} corners" in caplog.messages
