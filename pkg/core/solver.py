"""
Meta-Level Solver
Sound, incomplete reasoning for meta-constraints: type environments, modal evaluation of
built-ins from a declarative table, linear arithmetic facts, satisfiability, entailment,
complement splits and the ground-instance oracle
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from core.builtins import BuiltinTable, default_table
from core.errors import SpecError
from core.linear import (
    NEGATED_COMPARISON,
    LinearConstraint,
    LinearTerm,
    comparison_constraints,
    entails as linear_entails,
    entails_comparison,
    feasible,
    linearize,
    make_linear,
    to_expression,
)
from core.metaterms import (
    Eq,
    Equiv,
    Errors,
    Fails,
    FreshVars,
    Inv,
    MetaConstraint,
    Perm,
    Succeeds,
    TypeOf,
    constraint_vars,
)
from core.specs import IDENTITY, ALL_STATES, EquivSpec, InvariantSpec, match_pattern, same_bag
from core.terms import (
    EMPTY_LIST,
    Atom,
    Bag,
    Compound,
    Error,
    Failure,
    Float,
    Int,
    ListCell,
    Term,
    Var,
    VarName,
    canonical_store,
    list_items,
    make_list,
    signature,
    term_vars,
    unify,
)
from core.types import (
    ANY,
    VAR,
    BaseType,
    ListOf,
    Literal,
    MultisetOf,
    Shape,
    TypeExpr,
    TypeTable,
    UnionOf,
)

logger = logging.getLogger(__name__)

DEFAULT_MODAL_TABLE = Path(__file__).with_name("modal_table.json")

SUCCEEDS = "S"
FAILS = "F"
ERRORS = "E"
ALL_OUTCOMES: FrozenSet[str] = frozenset({SUCCEEDS, FAILS, ERRORS})

VERDICTS: Dict[str, FrozenSet[str]] = {
    "succeeds": frozenset({SUCCEEDS}),
    "fails": frozenset({FAILS}),
    "errors": frozenset({ERRORS}),
    "succeeds_or_fails": frozenset({SUCCEEDS, FAILS}),
    "succeeds_or_errors": frozenset({SUCCEEDS, ERRORS}),
    "fails_or_errors": frozenset({FAILS, ERRORS}),
    "unknown": ALL_OUTCOMES,
}

COMPARISONS = ("<", "=<", ">", ">=", "=:=", "=\\=")
STRICT = ("<", ">", "=\\=")
SIMPLE_ARITH = {"+", "-", "*"}

# Three-valued answers
PROVED = "proved"
DISPROVED = "disproved"
UNKNOWN = "unknown"

SAT = "sat"
UNSAT = "unsat"

MAX_WITNESS_CANDIDATES = 2000


def verdict_name(outcomes: FrozenSet[str]) -> str:
    for name, value in VERDICTS.items():
        if value == outcomes:
            return name
    return "unknown"


@dataclass(frozen=True)
class ModalRow:
    predicate: str
    args: Tuple[str, ...]
    verdict: FrozenSet[str]
    binds: Tuple[int, ...] = ()


class ModalTable:
    """Rows keyed by predicate and arity; the first matching row wins"""

    def __init__(self, rows: Iterable[ModalRow]):
        self.rows: Dict[Tuple[str, int], List[ModalRow]] = {}
        for row in rows:
            self.rows.setdefault((row.predicate, len(row.args)), []).append(row)

    def lookup(self, predicate: str, classes: Sequence[Set[str]]) -> Optional[ModalRow]:
        for row in self.rows.get((predicate, len(classes)), []):
            if all(name in arg for name, arg in zip(row.args, classes)):
                return row
        return None

    def all_rows(self) -> List[ModalRow]:
        return [row for rows in self.rows.values() for row in rows]


def load_modal_table(path: Optional[str] = None) -> ModalTable:
    """Load the JSON modal table shipped with the package or a user replacement"""
    source = Path(path) if path else DEFAULT_MODAL_TABLE
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise SpecError(f"cannot read modal table {source}: {exc}") from exc
    rows = []
    for entry in data.get("rows", []):
        verdict = entry.get("verdict")
        if verdict not in VERDICTS:
            raise SpecError(f"unknown modal verdict {verdict!r} in {source}")
        rows.append(
            ModalRow(entry["predicate"], tuple(entry["args"]), VERDICTS[verdict], tuple(entry.get("binds", ())))
        )
    logger.debug("Loaded %d modal rows from %s", len(rows), source)
    return ModalTable(rows)


@dataclass(frozen=True)
class Universe:
    """Finite pool of ground values used to sample groundings"""

    ints: Tuple[int, ...] = (-2, -1, 0, 1, 2)
    consts: Tuple[str, ...] = ("a", "b")
    var_names: Tuple[str, ...] = ("X", "Y")
    max_list: int = 2
    max_bag: int = 1


@dataclass
class ModalResult:
    """Outcome set of a built-in sequence plus the bindings of its success path"""

    outcomes: FrozenSet[str]
    bindings: Dict[Var, Term] = field(default_factory=dict)
    bindings_known: bool = True
    undecided: Optional[Term] = None


@dataclass(frozen=True)
class Split:
    """Alternatives whose disjunction holds under the corner's constraints"""

    alternatives: Tuple[Tuple[MetaConstraint, ...], ...]
    provenance: str = ""

    def __str__(self):
        return "{" + "; ".join(", ".join(str(c) for c in alt) or "true" for alt in self.alternatives) + "}"


class Context:
    """Type environment and linear facts derived from a conjunction of meta-constraints"""

    def __init__(self, solver: "Solver", where: Sequence[MetaConstraint]):
        self.solver = solver
        self.where = tuple(where)
        self.types: Dict[Var, List[TypeExpr]] = {}
        self.bottom = False
        self.facts: List[LinearConstraint] = []
        self.fresh: List[FreshVars] = [c for c in self.where if isinstance(c, FreshVars)]
        for c in self.where:
            if isinstance(c, TypeOf):
                self.add_type(c.type, c.term)
            elif isinstance(c, FreshVars):
                for var in c.vars:
                    if isinstance(var, Var):
                        self.add_type(VAR, var)
        for c in self.where:
            if isinstance(c, Succeeds):
                self._infer_sequence(c.goals)
            elif isinstance(c, Fails) and len(c.goals) == 1:
                self._infer_failure(c.goals[0])
            elif isinstance(c, Eq):
                self._infer_sequence((Compound("=", (c.left, c.right)),))
        for var, types in self.types.items():
            for t in types:
                name = self.solver.types.resolve(t)
                if name == BaseType("positive_int"):
                    self.facts.extend(comparison_constraints(">=", var, Int(1)))
                elif name == BaseType("natural"):
                    self.facts.extend(comparison_constraints(">=", var, Int(0)))

    # -- types -------------------------------------------------------------

    def add_type(self, type_expr: TypeExpr, term: Term):
        table = self.solver.types
        resolved = table.resolve(type_expr)
        if resolved == ANY:
            return
        if isinstance(term, Var):
            existing = self.types.setdefault(term, [])
            if resolved in existing:
                return
            if any(table.disjoint(resolved, old) for old in existing):
                self.bottom = True
            existing.append(resolved)
            return
        if isinstance(resolved, UnionOf):
            viable = [alt for alt in resolved.alternatives if self.solver.type_check(term, alt, self) != DISPROVED]
            if not viable:
                self.bottom = True
            elif len(viable) == 1:
                self.add_type(viable[0], term)
            return
        if isinstance(term, Bag):
            if not isinstance(resolved, MultisetOf):
                self.bottom = True
                return
            for item in term.items:
                self.add_type(resolved.item, item)
            if term.rest is not None:
                self.add_type(resolved, term.rest)
            return
        if isinstance(resolved, ListOf) and isinstance(term, ListCell):
            self.add_type(resolved.elem, term.head)
            self.add_type(resolved, term.tail)
            return
        if isinstance(resolved, Shape) and isinstance(term, Compound):
            if term.functor != resolved.functor or len(term.args) != len(resolved.args):
                self.bottom = True
                return
            for arg, slot in zip(term.args, resolved.args):
                self.add_type(slot if isinstance(slot, TypeExpr) else Literal(slot), arg)
            return
        if self.solver.type_check(term, resolved, self) == DISPROVED:
            self.bottom = True

    def types_of(self, var: Var) -> List[TypeExpr]:
        return self.types.get(var, [])

    def is_a(self, var: Var, type_expr: TypeExpr) -> bool:
        return any(self.solver.types.subtype(t, type_expr) for t in self.types_of(var))

    def never(self, var: Var, type_expr: TypeExpr) -> bool:
        return any(self.solver.types.disjoint(t, type_expr) for t in self.types_of(var))

    def is_var(self, var: Var) -> bool:
        return self.is_a(var, VAR)

    def is_ground_typed(self, var: Var) -> bool:
        return any(_ground_type(self.solver.types, t) for t in self.types_of(var))

    def int_vars(self) -> Set[Var]:
        return {v for v in self.types if self.is_a(v, BaseType("int"))}

    def distinct(self, a: Var, b: Var) -> bool:
        """Both denote different variable names"""
        return any(a in c.vars and b in c.vars for c in self.fresh)

    # -- sequence inference ------------------------------------------------

    def _infer_sequence(self, goals: Sequence[Term]):
        local: Dict[Var, Term] = {}
        for goal in goals:
            goal = goal.substitute(local)
            name, arity = signature(goal)
            args = goal.args if isinstance(goal, Compound) else ()
            if name in COMPARISONS and arity == 2:
                for arg in args:
                    self._mark_numeric(arg)
                facts = comparison_constraints(name, args[0], args[1])
                if facts:
                    self.facts.extend(facts)
            elif name == "is" and arity == 2:
                lhs, rhs = args
                self._mark_numeric(rhs)
                if isinstance(lhs, Var) and self.is_var(lhs):
                    parts = linearize(rhs)
                    if parts is None:
                        return
                    local[lhs] = make_linear(*parts)
                    local = {v: t.substitute(local) for v, t in local.items()}
                else:
                    self._mark_numeric(lhs)
                    facts = comparison_constraints("=:=", lhs, rhs)
                    if facts:
                        self.facts.extend(facts)
            elif name == "=" and arity == 2:
                mgu = unify(args[0], args[1])
                if not mgu.is_proper:
                    self.bottom = self.bottom or not _flexible(args[0], args[1])
                    return
                local = {v: t.substitute(mgu.bindings) for v, t in local.items()}
                local.update(mgu.bindings)
            elif name in ("var", "nonvar") and arity == 1 and isinstance(args[0], Var):
                self.add_type(VAR if name == "var" else BaseType("nonvar"), args[0])
            elif name in ("==", "\\=", "\\==", "ground"):
                continue
            else:
                return

    def _infer_failure(self, goal: Term):
        name, arity = signature(goal)
        if name in COMPARISONS and arity == 2:
            for arg in goal.args:
                self._mark_numeric(arg)
            facts = comparison_constraints(NEGATED_COMPARISON[name], goal.args[0], goal.args[1])
            if facts:
                self.facts.extend(facts)

    def _mark_numeric(self, term: Term):
        for var in term.variables():
            self.add_type(BaseType("num"), var)


def _ground_type(table: TypeTable, t: TypeExpr) -> bool:
    t = table.resolve(t)
    if isinstance(t, BaseType):
        return t.name not in ("any", "var", "nonvar")
    if isinstance(t, Literal):
        return True
    if isinstance(t, ListOf):
        return _ground_type(table, t.elem)
    if isinstance(t, Shape):
        return all(_ground_type(table, a) if isinstance(a, TypeExpr) else a.is_ground for a in t.args)
    if isinstance(t, UnionOf):
        return all(_ground_type(table, a) for a in t.alternatives)
    return False


def _flexible(*terms: Term) -> bool:
    """Terms whose syntactic unification failure does not decide object unification"""
    for term in terms:
        stack = [term]
        while stack:
            current = stack.pop()
            if isinstance(current, (LinearTerm, VarName)):
                return True
            stack.extend(current.subterms())
    return False


class Solver:
    """Decidable-fragment reasoner over meta-constraints"""

    def __init__(
        self,
        types: Optional[TypeTable] = None,
        modal_table: Optional[ModalTable] = None,
        builtins: Optional[BuiltinTable] = None,
        invariant: InvariantSpec = ALL_STATES,
        equiv: EquivSpec = IDENTITY,
    ):
        self.types = types or TypeTable()
        self.modal_table = modal_table or load_modal_table()
        self.builtins = builtins or default_table()
        self.invariant = invariant
        self.equiv = equiv
        self._rename = itertools.count(1)

    def context(self, where: Sequence[MetaConstraint]) -> Context:
        return Context(self, where)

    # -- argument classes ----------------------------------------------------

    def arg_classes(self, term: Term, ctx: Context) -> Set[str]:
        classes = {"any"}
        if isinstance(term, VarName):
            classes |= {"var", "has_var"}
        elif isinstance(term, Var):
            if ctx.is_var(term):
                classes |= {"var", "has_var"}
            if ctx.is_a(term, BaseType("nonvar")):
                classes.add("nonvar")
            if ctx.is_a(term, BaseType("num")):
                classes |= {"num", "arith", "exact"}
            if ctx.is_a(term, BaseType("int")):
                classes.add("int")
            if ctx.is_a(term, BaseType("const")):
                classes.add("const")
            if ctx.is_ground_typed(term):
                classes.add("ground")
            if ctx.never(term, BaseType("num")) and ctx.never(term, VAR):
                classes.add("nonarith")
        elif isinstance(term, (Int, Float)):
            classes |= {"num", "arith", "exact", "nonvar", "ground"}
            if isinstance(term, Int):
                classes.add("int")
        elif isinstance(term, LinearTerm):
            classes.add("nonvar")
            variables = list(term.variables())
            if all(ctx.is_a(v, BaseType("num")) for v in variables):
                classes |= {"num", "arith", "ground"}
                if all(ctx.is_a(v, BaseType("int")) for v in variables):
                    classes |= {"int", "exact"}
            if any(ctx.is_var(v) for v in variables):
                classes.add("has_var")
        elif isinstance(term, Atom):
            classes |= {"nonvar", "ground"}
            classes.add("nonarith")
            if term != EMPTY_LIST:
                classes.add("const")
        elif isinstance(term, Compound) and term.functor in SIMPLE_ARITH | {"/", "//", "mod"}:
            children = [self.arg_classes(a, ctx) for a in term.args]
            classes.add("nonvar")
            if all("ground" in c for c in children):
                classes.add("ground")
            if any("has_var" in c for c in children):
                classes.add("has_var")
            if any("nonarith" in c for c in children):
                classes.add("nonarith")
            elif term.functor in SIMPLE_ARITH and all("arith" in c for c in children):
                classes.add("arith")
                # integer +, - and * cannot overflow; float operands can
                if all("int" in c for c in children):
                    classes |= {"int", "exact"}
        elif isinstance(term, (Compound, ListCell)):
            children = [self.arg_classes(a, ctx) for a in term.subterms()]
            classes |= {"nonvar", "nonarith"}
            if all("ground" in c for c in children):
                classes.add("ground")
            if any("has_var" in c for c in children):
                classes.add("has_var")
        return classes

    # -- modal evaluation ----------------------------------------------------

    def modal_eval(self, goal: Term, ctx: Context) -> Tuple[FrozenSet[str], Optional[Dict[Var, Term]]]:
        """
        Verdict of one built-in call over the type environment

        Returns:
            The set of possible outcomes and, for the success path, the meta-level
            bindings (None when they cannot be computed)
        """
        name, arity = signature(goal)
        if not self.builtins.is_builtin_name(name, arity):
            return ALL_OUTCOMES, None
        args = goal.args if isinstance(goal, Compound) else ()
        row = self.modal_table.lookup(name, [self.arg_classes(a, ctx) for a in args])
        outcomes = row.verdict if row else ALL_OUTCOMES
        bindings: Optional[Dict[Var, Term]] = {}

        if name == "is" and arity == 2:
            lhs, rhs = args
            if isinstance(lhs, Var) and ctx.is_var(lhs):
                parts = linearize(rhs)
                bindings = {lhs: make_linear(*parts)} if parts is not None else None
            elif outcomes == VERDICTS["succeeds_or_fails"] and "exact" in self.arg_classes(lhs, ctx):
                decided = entails_comparison(ctx.facts, "=:=", lhs, rhs, ctx.int_vars())
                if decided is not None:
                    outcomes = frozenset({SUCCEEDS}) if decided else frozenset({FAILS})
        elif name in COMPARISONS and arity == 2:
            if args[0] == args[1]:
                outcomes = outcomes - ({SUCCEEDS} if name in STRICT else {FAILS})
            elif outcomes == VERDICTS["succeeds_or_fails"]:
                decided = entails_comparison(ctx.facts, name, args[0], args[1], ctx.int_vars())
                if decided is not None:
                    outcomes = frozenset({SUCCEEDS}) if decided else frozenset({FAILS})
        elif name == "=" and arity == 2:
            outcomes, bindings = self._modal_unify(args[0], args[1], ctx)
        elif name == "\\=" and arity == 2:
            mgu = unify(args[0], args[1])
            if not mgu.is_proper and not _flexible(*args):
                outcomes = frozenset({SUCCEEDS})
            elif mgu.is_proper and not mgu.bindings:
                outcomes = frozenset({FAILS})
        elif name in ("==", "\\==") and arity == 2:
            if args[0] == args[1]:
                same = True
            elif not unify(args[0], args[1]).is_proper and not _has_linear(*args):
                same = False
            else:
                same = None
            if same is not None:
                outcomes = frozenset({SUCCEEDS} if same == (name == "==") else {FAILS})
        return outcomes, bindings

    def _modal_unify(self, left: Term, right: Term, ctx: Context):
        mgu = unify(left, right)
        if not mgu.is_proper:
            if _flexible(left, right):
                return VERDICTS["succeeds_or_fails"], None
            return VERDICTS["fails"], {}
        bindings = dict(mgu.bindings)
        if not bindings:
            return VERDICTS["succeeds"], bindings
        rigid_targets = []
        certain = True
        for var, target in bindings.items():
            if not ctx.is_var(var):
                certain = False
                break
            if isinstance(target, Var):
                continue
            if _has_vars_or_names(target, ctx):
                certain = False
                break
            rigid_targets.append(var)
        if certain and len(rigid_targets) > 1:
            certain = all(ctx.distinct(a, b) for a, b in itertools.combinations(rigid_targets, 2))
        return (VERDICTS["succeeds"] if certain else VERDICTS["succeeds_or_fails"]), bindings

    def modal_seq(self, goals: Sequence[Term], ctx: Context, protected: Sequence[Term] = ()) -> ModalResult:
        """
        Outcome set of executing a built-in sequence left to right

        Failure and error end the sequence; bindings of the success path are threaded
        into later goals. The first comparison whose outcome is undecided is reported as
        a split candidate.
        """
        outcomes: Set[str] = set()
        bindings: Dict[Var, Term] = {}
        undecided = None
        success_possible = True
        for goal in goals:
            current = goal.substitute(bindings)
            verdict, step = self.modal_eval(current, ctx)
            outcomes |= verdict - {SUCCEEDS}
            if undecided is None and len(verdict) > 1 and signature(current)[0] in COMPARISONS:
                undecided = current
            if SUCCEEDS not in verdict:
                success_possible = False
                break
            if step is None:
                return ModalResult(frozenset(outcomes | ALL_OUTCOMES), bindings, False, undecided)
            bindings = {v: t.substitute(step) for v, t in bindings.items()}
            bindings.update(step)
        if success_possible:
            outcomes.add(SUCCEEDS)
            for var in bindings:
                if not any(var in set(p.variables()) for p in protected):
                    continue
                if ctx.is_var(var):
                    outcomes.discard(SUCCEEDS)
                    outcomes.add(FAILS)
                elif not ctx.is_ground_typed(var):
                    outcomes.add(FAILS)
        return ModalResult(frozenset(outcomes), bindings, True, undecided)

    # -- types -------------------------------------------------------------

    def type_check(self, term: Term, type_expr: TypeExpr, ctx: Optional[Context] = None) -> str:
        """Three-valued membership of a meta-term in a type under the environment"""
        ctx = ctx if ctx is not None else self.context(())
        table = self.types
        resolved = table.resolve(type_expr)
        if resolved == ANY:
            return PROVED
        if isinstance(term, Var):
            if any(table.subtype(t, resolved) for t in ctx.types_of(term)):
                return PROVED
            if any(table.disjoint(t, resolved) for t in ctx.types_of(term)):
                return DISPROVED
            return UNKNOWN
        if isinstance(resolved, UnionOf):
            results = [self.type_check(term, alt, ctx) for alt in resolved.alternatives]
            if PROVED in results:
                return PROVED
            return DISPROVED if all(r == DISPROVED for r in results) else UNKNOWN
        if isinstance(term, Bag):
            if not isinstance(resolved, MultisetOf):
                return DISPROVED
            results = [self.type_check(item, resolved.item, ctx) for item in term.items]
            if term.rest is not None:
                results.append(self.type_check(term.rest, resolved, ctx))
            return _conjunction(results)
        if term.is_ground:
            member = table.member(term, resolved)
            return UNKNOWN if member is None else (PROVED if member else DISPROVED)
        if isinstance(term, LinearTerm):
            return self._linear_type(term, resolved, ctx)
        if isinstance(resolved, BaseType):
            if resolved.name in ("nonvar",):
                return PROVED
            return DISPROVED
        if isinstance(resolved, Literal):
            return DISPROVED if not unify(term, resolved.term).is_proper else UNKNOWN
        if isinstance(resolved, ListOf):
            items, tail = list_items(term)
            if not items:
                return DISPROVED
            results = [self.type_check(item, resolved.elem, ctx) for item in items]
            if tail != EMPTY_LIST:
                results.append(self.type_check(tail, resolved, ctx) if isinstance(tail, Var) else DISPROVED)
            return _conjunction(results)
        if isinstance(resolved, Shape):
            if not isinstance(term, Compound) or term.functor != resolved.functor or len(term.args) != len(resolved.args):
                return DISPROVED
            return _conjunction(
                [
                    self.type_check(arg, slot if isinstance(slot, TypeExpr) else Literal(slot), ctx)
                    for arg, slot in zip(term.args, resolved.args)
                ]
            )
        return DISPROVED

    def _linear_type(self, term: LinearTerm, resolved: TypeExpr, ctx: Context) -> str:
        variables = list(term.variables())
        numeric = all(ctx.is_a(v, BaseType("num")) for v in variables)
        integral = all(ctx.is_a(v, BaseType("int")) for v in variables)
        if not isinstance(resolved, BaseType):
            return DISPROVED if numeric else UNKNOWN
        name = resolved.name
        if name in ("var", "const"):
            return DISPROVED if numeric else UNKNOWN
        if name in ("nonvar", "num"):
            return PROVED if numeric else UNKNOWN
        if not integral:
            return UNKNOWN
        if name == "int":
            return PROVED
        bound = 1 if name == "positive_int" else 0
        goal = comparison_constraints(">=", term, Int(bound))
        if goal and linear_entails(ctx.facts, goal[0], ctx.int_vars()):
            return PROVED
        if goal and not feasible(ctx.facts + goal, ctx.int_vars()):
            return DISPROVED
        return UNKNOWN

    # -- satisfiability ------------------------------------------------------

    def msat(self, where: Sequence[MetaConstraint], universe: Optional[Universe] = None) -> str:
        """Sat when a witness grounding is found, Unsat when provably empty, else Unknown"""
        ctx = self.context(where)
        if self.refuted(ctx):
            return UNSAT
        if self.witness(where, universe or Universe()) is not None:
            return SAT
        return UNKNOWN

    def refuted(self, ctx: Context) -> bool:
        if ctx.bottom:
            return True
        ints = ctx.int_vars()
        if ctx.facts and not feasible(ctx.facts, ints):
            return True
        for c in ctx.where:
            if isinstance(c, TypeOf) and not isinstance(c.term, Var):
                if self.type_check(c.term, c.type, ctx) == DISPROVED:
                    return True
            elif isinstance(c, Succeeds):
                if SUCCEEDS not in self.modal_seq(c.goals, ctx, c.protected).outcomes:
                    return True
            elif isinstance(c, Fails):
                if FAILS not in self.modal_seq(c.goals, ctx).outcomes:
                    return True
            elif isinstance(c, Errors):
                if ERRORS not in self.modal_seq(c.goals, ctx).outcomes:
                    return True
            elif isinstance(c, Eq):
                if not unify(c.left, c.right).is_proper and not _flexible(c.left, c.right):
                    return True
            elif isinstance(c, FreshVars):
                if self._fresh_refuted(c):
                    return True
            elif isinstance(c, Perm):
                if self._perm(c.left, c.right, ctx) == DISPROVED:
                    return True
            elif isinstance(c, Inv):
                if not self.invariant.trivial and not self.inv_possible(c.store, ctx):
                    return True
        return False

    @staticmethod
    def _fresh_refuted(c: FreshVars) -> bool:
        if len(set(c.vars)) != len(c.vars):
            return True
        scope_vars = set(term_vars(c.scope))
        scope_names = {t for s in c.scope for t in _var_names(s)}
        for var in c.vars:
            if isinstance(var, Var):
                if var in scope_vars:
                    return True
            elif isinstance(var, VarName):
                if var in scope_names:
                    return True
            else:
                return True
        return False

    def witness(self, where: Sequence[MetaConstraint], universe: Universe) -> Optional[Dict[Var, Term]]:
        for grounding in self.groundings(where, universe, limit=MAX_WITNESS_CANDIDATES):
            return grounding
        return None

    # -- groundings ----------------------------------------------------------

    def groundings(
        self,
        where: Sequence[MetaConstraint],
        universe: Universe,
        metavars: Optional[Sequence[Var]] = None,
        bag_vars: Iterable[Var] = (),
        limit: int = 4000,
        element_types: Optional[Dict[Var, TypeExpr]] = None,
    ) -> Iterator[Dict[Var, Term]]:
        """
        Groundings of the metavariables that satisfy every constraint

        Metavariables listed in FreshVars receive distinct fresh variable names,
        residual multisets range over the empty multiset and small multisets of their
        element type, and other metavariables range over values of their types.
        """
        ctx = self.context(where)
        if ctx.bottom:
            return
        bag_set = set(bag_vars)
        names = list(metavars) if metavars is not None else constraint_vars(where)
        fresh_order = []
        for c in ctx.fresh:
            for var in c.vars:
                if isinstance(var, Var) and var not in fresh_order:
                    fresh_order.append(var)
        fixed = {var: VarName(f"_F{i}") for i, var in enumerate(fresh_order)}
        choices: List[Tuple[Var, List[Term]]] = []
        for var in names:
            if var in fixed:
                continue
            if var in bag_set:
                item_type = (element_types or {}).get(var) or self._bag_item_type(var, ctx)
                choices.append((var, self._bag_candidates(item_type, universe)))
            else:
                choices.append((var, self._candidates(ctx.types_of(var), universe)))
        examined = 0
        for combination in itertools.product(*(values for _, values in choices)):
            examined += 1
            if examined > limit:
                logger.debug("Grounding enumeration stopped after %d candidates", limit)
                return
            grounding = dict(fixed)
            grounding.update({var: value for (var, _), value in zip(choices, combination)})
            if all(self.holds(c, grounding) for c in where):
                yield grounding

    def _bag_item_type(self, var: Var, ctx: Context) -> Optional[TypeExpr]:
        for t in ctx.types_of(var):
            if isinstance(t, MultisetOf):
                return t.item
        return None

    def _bag_candidates(self, item_type: Optional[TypeExpr], universe: Universe) -> List[Term]:
        bags: List[Term] = [Bag(())]
        if item_type is None:
            return bags
        items = self.type_values(item_type, universe)
        for size in range(1, universe.max_bag + 1):
            for combo in itertools.combinations_with_replacement(items, size):
                bags.append(Bag(tuple(combo)))
        return bags

    def _candidates(self, types: List[TypeExpr], universe: Universe) -> List[Term]:
        if not types:
            return self.type_values(ANY, universe)
        ordered = sorted(types, key=lambda t: len(self.type_values(t, universe)))
        return self.type_values(ordered[0], universe)

    def type_values(self, type_expr: TypeExpr, universe: Universe, depth: int = 2) -> List[Term]:
        """Values of a type drawn from the universe"""
        t = self.types.resolve(type_expr)
        names = [VarName(n) for n in universe.var_names]
        consts = [Atom(c) for c in universe.consts]
        ints = [Int(i) for i in universe.ints]
        if isinstance(t, BaseType):
            if t.name == "var":
                return names
            if t.name == "const":
                return consts
            if t.name in ("num", "int"):
                return ints
            if t.name == "natural":
                return [i for i in ints if i.value >= 0]
            if t.name == "positive_int":
                return [i for i in ints if i.value >= 1]
            if t.name == "nonvar":
                return consts + ints
            return names + consts + ints
        if isinstance(t, Literal):
            return [t.term]
        if isinstance(t, UnionOf):
            values: List[Term] = []
            for alt in t.alternatives:
                values.extend(v for v in self.type_values(alt, universe, depth) if v not in values)
            return values
        if isinstance(t, ListOf):
            if depth <= 0:
                return [EMPTY_LIST]
            elems = self.type_values(t.elem, universe, depth - 1)
            lists: List[Term] = []
            for size in range(universe.max_list + 1):
                for combo in itertools.product(elems, repeat=size):
                    lists.append(make_list(combo))
            return lists
        if isinstance(t, Shape):
            slots = [
                self.type_values(a, universe, depth - 1) if isinstance(a, TypeExpr) else [a] for a in t.args
            ]
            return [Compound(t.functor, tuple(combo)) for combo in itertools.product(*slots)]
        if isinstance(t, MultisetOf):
            return self._bag_candidates(t.item, universe)
        return []

    # -- ground oracle -------------------------------------------------------

    def holds(self, c: MetaConstraint, grounding: Dict[Var, Term]) -> bool:
        """Truth of a constraint under a grounding of its metavariables"""
        ground = c.substitute(grounding)
        if isinstance(ground, TypeOf):
            return self.types.member(ground.term, ground.type) is True
        if isinstance(ground, Eq):
            return same_value(ground.left, ground.right)
        if isinstance(ground, (Succeeds, Fails, Errors)):
            result = self.builtins.exe_seq([denote_term(g) for g in ground.goals])
            if isinstance(ground, Succeeds):
                if not result.is_proper:
                    return False
                return all(
                    denote_term(p).substitute(result.bindings) == denote_term(p) for p in ground.protected
                )
            return isinstance(result, Failure if isinstance(ground, Fails) else Error)
        if isinstance(ground, FreshVars):
            if not all(isinstance(v, VarName) for v in ground.vars):
                return False
            if len(set(ground.vars)) != len(ground.vars):
                return False
            scope_names = {n for s in ground.scope for n in _var_names(s)}
            return not any(v in scope_names for v in ground.vars)
        if isinstance(ground, Perm):
            return ground_perm(ground.left, ground.right) is True
        if isinstance(ground, Inv):
            return self.inv_holds(ground.store)
        if isinstance(ground, Equiv):
            return self.equiv_holds(ground.left, ground.right)
        return False

    def inv_holds(self, store: Bag) -> bool:
        if self.invariant.trivial:
            return True
        for pattern in self.invariant.patterns:
            for bindings in match_pattern(pattern.items, pattern.rest, store):
                if all(self.holds(c, bindings) for c in pattern.conditions):
                    return True
        return False

    def equiv_holds(self, left: Bag, right: Bag) -> bool:
        if denoted_variants(left, right):
            return True
        for pair in self.equiv.oriented():
            for bindings in match_pattern(pair.left.items, pair.left.rest, left):
                for full in match_pattern(pair.right.items, pair.right.rest, right, bindings):
                    if all(self.holds(c, full) for c in pair.conditions):
                        return True
        return False

    # -- entailment ----------------------------------------------------------

    def entails(self, where: Sequence[MetaConstraint], c: MetaConstraint, fixed: Optional[Iterable[Var]] = None) -> str:
        """Proved, Disproved or Unknown for M -> c"""
        if c in where:
            return PROVED
        ctx = self.context(where)
        if isinstance(c, Succeeds):
            outcomes = self.modal_seq(c.goals, ctx, c.protected).outcomes
            return _outcome_answer(outcomes, SUCCEEDS)
        if isinstance(c, Fails):
            return _outcome_answer(self.modal_seq(c.goals, ctx).outcomes, FAILS)
        if isinstance(c, Errors):
            return _outcome_answer(self.modal_seq(c.goals, ctx).outcomes, ERRORS)
        if isinstance(c, TypeOf):
            return self.type_check(c.term, c.type, ctx)
        if isinstance(c, FreshVars):
            return self._fresh_entailed(c, ctx)
        if isinstance(c, Perm):
            return self._perm(c.left, c.right, ctx)
        if isinstance(c, Inv):
            return self._inv_entailed(c.store, ctx)
        if isinstance(c, Equiv):
            return self._equiv_entailed(c.left, c.right, ctx, fixed)
        if isinstance(c, Eq):
            if same_value(c.left, c.right):
                return PROVED
            if not unify(c.left, c.right).is_proper and not _flexible(c.left, c.right):
                return DISPROVED
        return UNKNOWN

    def _fresh_entailed(self, c: FreshVars, ctx: Context) -> str:
        if self._fresh_refuted(c):
            return DISPROVED
        if not c.vars:
            return PROVED
        for known in ctx.fresh:
            if not set(c.vars) <= set(known.vars):
                continue
            allowed = set(term_vars(known.scope)) | (set(known.vars) - set(c.vars))
            known_names = {n for s in known.scope for n in _var_names(s)}
            if set(term_vars(c.scope)) <= allowed and all(
                n in known_names for s in c.scope for n in _var_names(s)
            ):
                return PROVED
        return UNKNOWN

    def _perm(self, left: Term, right: Term, ctx: Context) -> str:
        if left.is_ground and right.is_ground:
            result = ground_perm(left, right)
            return UNKNOWN if result is None else (PROVED if result else DISPROVED)
        rest_left, rest_right = strip_common(left, right)
        left_items, left_tail = list_items(rest_left)
        right_items, right_tail = list_items(rest_right)
        if not left_items and not right_items and left_tail == right_tail:
            return PROVED
        for c in ctx.where:
            if isinstance(c, Perm):
                known = strip_common(c.left, c.right)
                if known in ((rest_left, rest_right), (rest_right, rest_left)):
                    return PROVED
        if left_tail == EMPTY_LIST and right_tail == EMPTY_LIST and len(left_items) != len(right_items):
            return DISPROVED
        return UNKNOWN

    def _inv_entailed(self, store: Bag, ctx: Context) -> str:
        if self.invariant.trivial:
            return PROVED
        if Inv(store) in ctx.where:
            return PROVED
        for pattern in self.invariant.patterns:
            renamed = self.rename_apart(pattern.pattern_vars())
            items = tuple(t.substitute(renamed) for t in pattern.items)
            rest = renamed.get(pattern.rest) if pattern.rest is not None else None
            for bindings in match_pattern(items, rest, store):
                conditions = [c.substitute(renamed).substitute(bindings) for c in pattern.conditions]
                if all(self.entails(ctx.where, cond) == PROVED for cond in conditions):
                    return PROVED
        if not self.inv_possible(store, ctx):
            return DISPROVED
        return UNKNOWN

    def _equiv_entailed(self, left: Bag, right: Bag, ctx: Context, fixed: Optional[Iterable[Var]]) -> str:
        keep = set(fixed) if fixed is not None else set(term_vars([left, right])) - _fresh_set(ctx)
        if left.rest == right.rest and canonical_store(left.items, keep) == canonical_store(right.items, keep):
            return PROVED
        for pair in self.equiv.oriented():
            renamed = self.rename_apart(pair.pattern_vars())
            lp = pair.left.substitute(renamed)
            rp = pair.right.substitute(renamed)
            for bindings in match_pattern(lp.items, lp.rest, left):
                for full in match_pattern(rp.items, rp.rest, right, bindings):
                    conditions = [c.substitute(renamed).substitute(full) for c in pair.conditions]
                    if all(self.entails(ctx.where, cond) == PROVED for cond in conditions):
                        return PROVED
        return UNKNOWN

    def rename_apart(self, variables: Iterable[Var]) -> Dict[Var, Term]:
        suffix = next(self._rename)
        return {v: Var(f"{v.name}%{suffix}") for v in variables}

    # -- invariant instantiation ---------------------------------------------

    def instantiate_pattern(self, store: Bag, pattern, ctx: Context) -> Iterator[Tuple[Dict[Var, Term], Tuple[MetaConstraint, ...]]]:
        """
        Ways a store may be an instance of an invariant pattern

        Each pattern item is unified with a distinct store item or drawn from the
        store's residual. Yields the unifier, which also binds the store residual and
        the pattern residual, and the pattern conditions instantiated by it.
        """
        renamed = self.rename_apart(pattern.pattern_vars())
        items = [t.substitute(renamed) for t in pattern.items]
        rest = renamed.get(pattern.rest) if pattern.rest is not None else None
        conditions = tuple(c.substitute(renamed) for c in pattern.conditions)
        for bindings, unused, drawn in self._assign(items, list(store.items), store.rest is not None, {}):
            result = dict(bindings)
            leftover = tuple(t.substitute(result) for t in unused)
            residual = None
            if store.rest is not None:
                residual = Var(f"{store.rest.name}'{next(self._rename)}") if rest is not None else None
                result[store.rest] = Bag(tuple(t.substitute(result) for t in drawn), residual)
            if rest is None:
                if leftover:
                    continue
            else:
                result[rest] = Bag(leftover, residual)
            resolved = _resolve_bag(result)
            yield resolved, tuple(c.substitute(resolved) for c in conditions)

    def _assign(self, pending, free, may_draw, bindings):
        if not pending:
            yield bindings, free, []
            return
        head, tail = pending[0], pending[1:]
        tried = []
        for index, candidate in enumerate(free):
            if candidate in tried:
                continue
            tried.append(candidate)
            mgu = unify(head.substitute(bindings), candidate.substitute(bindings))
            if not mgu.is_proper:
                continue
            extended = {v: t.substitute(mgu.bindings) for v, t in bindings.items()}
            extended.update(mgu.bindings)
            yield from self._assign(tail, free[:index] + free[index + 1 :], may_draw, extended)
        if may_draw:
            for result, unused, drawn in self._assign(tail, free, may_draw, bindings):
                yield result, unused, [head] + drawn

    def inv_possible(self, store: Bag, ctx: Context) -> bool:
        if self.invariant.trivial:
            return True
        for pattern in self.invariant.patterns:
            for bindings, conditions in self.instantiate_pattern(store, pattern, ctx):
                extended = self.context(tuple(c.substitute(bindings) for c in ctx.where) + conditions)
                if not extended.bottom:
                    return True
        return False

    # -- splits --------------------------------------------------------------

    def complement(self, goal: Term, ctx: Context) -> Optional[Split]:
        """Exhaustive pair of comparisons over arithmetic arguments"""
        name, arity = signature(goal)
        if name not in NEGATED_COMPARISON or arity != 2:
            return None
        if not all("exact" in self.arg_classes(a, ctx) for a in goal.args):
            return None
        negated = Compound(NEGATED_COMPARISON[name], goal.args)
        return Split(((Succeeds((goal,)),), (Succeeds((negated,)),)), provenance=str(goal))

    def validate_split(self, where: Sequence[MetaConstraint], split: Split) -> bool:
        """The disjunction of the alternatives is valid under where"""
        if any(not alt for alt in split.alternatives):
            return True
        if len(split.alternatives) != 2:
            return False
        first, second = split.alternatives
        if len(first) != 1 or len(second) != 1:
            return False
        a, b = first[0], second[0]
        if not (isinstance(a, Succeeds) and isinstance(b, Succeeds) and len(a.goals) == 1 and len(b.goals) == 1):
            return False
        ga, gb = a.goals[0], b.goals[0]
        name, arity = signature(ga)
        if name not in NEGATED_COMPARISON or arity != 2 or not isinstance(gb, Compound):
            return False
        if gb.functor != NEGATED_COMPARISON[name] or gb.args != ga.args:
            return False
        ctx = self.context(where)
        return all("exact" in self.arg_classes(arg, ctx) for arg in ga.args)

    def derived_equalities(self, ctx: Context) -> Dict[Var, Term]:
        """Integer metavariables forced equal to another metavariable or a constant"""
        ints = sorted(ctx.int_vars(), key=lambda v: v.name)
        if not ctx.facts:
            return {}
        result: Dict[Var, Term] = {}
        for x, y in itertools.combinations(ints, 2):
            if x in result or y in result:
                continue
            goal = comparison_constraints("=:=", x, y)
            if goal and linear_entails(ctx.facts, goal[0], set(ints)):
                result[y] = x
        constants = set()
        for fact in ctx.facts:
            if len(fact.coeffs) == 1:
                coeff = fact.coeffs[0][1]
                value = -fact.const / coeff
                if value.denominator == 1:
                    constants.update({int(value), int(value) - 1, int(value) + 1})
        for x in ints:
            if x in result:
                continue
            for value in sorted(constants):
                goal = comparison_constraints("=:=", x, Int(value))
                if goal and linear_entails(ctx.facts, goal[0], set(ints)):
                    result[x] = Int(value)
                    break
        return result


def _fresh_set(ctx: Context) -> Set[Var]:
    return {v for c in ctx.fresh for v in c.vars if isinstance(v, Var)}


def _outcome_answer(outcomes: FrozenSet[str], wanted: str) -> str:
    if outcomes == frozenset({wanted}):
        return PROVED
    if wanted not in outcomes:
        return DISPROVED
    return UNKNOWN


def _conjunction(results: Sequence[str]) -> str:
    if any(r == DISPROVED for r in results):
        return DISPROVED
    if all(r == PROVED for r in results):
        return PROVED
    return UNKNOWN


def _has_linear(*terms: Term) -> bool:
    for term in terms:
        stack = [term]
        while stack:
            current = stack.pop()
            if isinstance(current, LinearTerm):
                return True
            stack.extend(current.subterms())
    return False


def _has_vars_or_names(term: Term, ctx: Context) -> bool:
    """The target may contain object variables"""
    stack = [term]
    while stack:
        current = stack.pop()
        if isinstance(current, VarName):
            return True
        if isinstance(current, Var):
            if not ctx.is_ground_typed(current):
                return True
            continue
        if isinstance(current, LinearTerm):
            if not all(ctx.is_a(v, BaseType("num")) for v in current.variables()):
                return True
            continue
        stack.extend(current.subterms())
    return False


def _var_names(term: Term) -> Iterator[VarName]:
    stack = [term]
    while stack:
        current = stack.pop()
        if isinstance(current, VarName):
            yield current
        elif isinstance(current, Bag):
            stack.extend(current.items)
        else:
            stack.extend(current.subterms())


def _resolve_bag(bindings: Dict[Var, Term]) -> Dict[Var, Term]:
    """Apply bindings to themselves until no bound variable remains in a range"""
    result = dict(bindings)
    for _ in range(len(result) + 1):
        changed = False
        for var, term in list(result.items()):
            image = term.substitute(result)
            if image != term:
                result[var] = image
                changed = True
        if not changed:
            break
    return result


def strip_common(left: Term, right: Term) -> Tuple[Term, Term]:
    """Remove list elements occurring on both sides (multiset difference)"""
    left_items, left_tail = list_items(left)
    right_items, right_tail = list_items(right)
    remaining = list(right_items)
    kept_left = []
    for item in left_items:
        if item in remaining:
            remaining.remove(item)
        else:
            kept_left.append(item)
    return make_list(kept_left, left_tail), make_list(remaining, right_tail)


def ground_perm(left: Term, right: Term) -> Optional[bool]:
    left_items, left_tail = list_items(left)
    right_items, right_tail = list_items(right)
    if left_tail != EMPTY_LIST or right_tail != EMPTY_LIST:
        return False if (left.is_ground and right.is_ground) else None
    return sorted(str(t) for t in left_items) == sorted(str(t) for t in right_items)


def same_value(a: Term, b: Term) -> bool:
    if isinstance(a, Bag) or isinstance(b, Bag):
        return same_bag(a, b)
    return a == b


def denote_term(term: Term) -> Term:
    """Object term named by a ground meta-term: variable names become variables"""
    if isinstance(term, VarName):
        return Var(term.name)
    if isinstance(term, LinearTerm):
        return denote_term(to_expression(term))
    children = term.subterms()
    if not children:
        return term
    return term.rebuild([denote_term(c) for c in children])


def denoted_variants(left: Bag, right: Bag) -> bool:
    if left.rest is not None or right.rest is not None:
        return same_bag(left, right)
    return canonical_store([denote_term(t) for t in left.items]) == canonical_store(
        [denote_term(t) for t in right.items]
    )
