"""
Corner Engine
Generation of critical corners, observation under the invariant, split-joinability
search and the confluence check that ties them together
"""

import itertools
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from core.builtins import BuiltinTable
from core.errors import SpecError
from core.meta import (
    denote,
    meta_successors,
    reduce,
    undecided_guards,
    variant_key,
)
from core.metaterms import (
    Eq,
    Equiv,
    FreshVars,
    Inv,
    MetaConstraint,
    MetaState,
    Perm,
    Succeeds,
    TypeOf,
    constraint_vars,
)
from core.program import Program, Rule, fresh_variant, local_vars
from core.semantics import JOINABLE as OBJ_JOINABLE
from core.semantics import NOT_JOINABLE, inv_member, obj_joinable, successors
from core.solver import PROVED, ModalTable, Solver, Split, Universe, _resolve_bag
from core.specs import IDENTITY, AnalysisSpec, StatePattern, residual_type
from core.terms import (
    Atom,
    Bag,
    Compound,
    Int,
    State,
    Term,
    Var,
    canonical_store,
    format_term,
    signature,
    term_vars,
    unify,
    unify_all,
)

logger = logging.getLogger(__name__)

ALPHA1 = "alpha1"
ALPHA2 = "alpha2"
ALPHA3 = "alpha3"
BETA1 = "beta1"
BETA2 = "beta2"
KINDS = (ALPHA1, ALPHA2, ALPHA3, BETA1, BETA2)

# Verdicts
JOINABLE = "Joinable"
SPLIT_JOINABLE = "SplitJoinable"
INCONSISTENT = "Inconsistent"
NOT_JOINABLE_VERDICT = "NotJoinable"
UNKNOWN = "Unknown"
SETTLED = (JOINABLE, SPLIT_JOINABLE, INCONSISTENT)

CONFLUENT = "CONFLUENT"
NOT_CONFLUENT = "NOT-CONFLUENT"
UNKNOWN_SUMMARY = "UNKNOWN"

DEFAULT_META_FUEL = 12
DEFAULT_SPLIT_BUDGET = 4
MAX_SIDE_STATES = 300


@dataclass(frozen=True)
class Corner:
    """Two transitions (or an equivalence and a transition) from a common ancestor"""

    kind: str
    ancestor: MetaState
    left: MetaState
    right: MetaState
    where: Tuple[MetaConstraint, ...]
    provenance: str = ""

    def substitute(self, bindings) -> "Corner":
        return Corner(
            self.kind,
            self.ancestor.substitute(bindings),
            self.left.substitute(bindings),
            self.right.substitute(bindings),
            tuple(c.substitute(bindings) for c in self.where),
            self.provenance,
        )

    def constrain(self, *constraints: MetaConstraint) -> "Corner":
        where = self.where + tuple(c for c in constraints if c not in self.where)
        return self.with_where(where)

    def with_where(self, where: Tuple[MetaConstraint, ...]) -> "Corner":
        return Corner(
            self.kind,
            replace(self.ancestor, where=where),
            replace(self.left, where=where),
            replace(self.right, where=where),
            where,
            self.provenance,
        )

    def swapped(self) -> "Corner":
        return replace(self, left=self.right, right=self.left)

    @property
    def is_beta(self) -> bool:
        return self.kind in (BETA1, BETA2)

    def fixed_vars(self) -> List[Var]:
        return term_vars([self.ancestor.store])

    def metavars(self) -> List[Var]:
        found = term_vars([self.ancestor.store, self.left.store, self.right.store])
        found.extend(v for v in term_vars(list(self.left.pending + self.right.pending)) if v not in found)
        found.extend(v for v in constraint_vars(self.where) if v not in found)
        return found


@dataclass
class Verdict:
    kind: str
    proof: Optional[Dict[str, object]] = None
    split: Optional[Split] = None
    branches: List["Verdict"] = field(default_factory=list)
    witness: Optional[Dict[str, str]] = None
    reason: Optional[str] = None

    @property
    def settled(self) -> bool:
        return self.kind in SETTLED


@dataclass
class CheckOptions:
    fuel: int = DEFAULT_META_FUEL
    split_budget: int = DEFAULT_SPLIT_BUDGET
    object_fuel: int = 1000
    oracle_limit: int = 4000
    universe: Optional[Universe] = None
    templates: Optional[Sequence[str]] = None
    modulo_equivalence: bool = False
    invariant_only: bool = False
    assume_termination: bool = False
    observable: bool = False


# ---------------------------------------------------------------------------
# Templates and tidy naming
# ---------------------------------------------------------------------------


def builtin_templates(table: BuiltinTable, names: Optional[Sequence[str]] = None) -> List[Term]:
    """One template per built-in, all arguments distinct fresh metavariables"""
    selected = table.select(names) if names else table.core()
    templates = []
    for builtin in selected:
        if builtin.arity == 0:
            templates.append(Atom(builtin.name))
        else:
            args = tuple(Var(f"{'xyzuvw'[i % 6]}#t") for i in range(builtin.arity))
            templates.append(Compound(builtin.name, args))
    return templates


def _template_variant(template: Term, tag: str) -> Term:
    mapping = {v: Var(f"{v.name}{tag}") for v in term_vars(template)}
    return template.substitute(mapping)


def tidy(corner: Corner) -> Corner:
    """Rename metavariables to short readable names in first-occurrence order"""
    mapping: Dict[Var, Term] = {}
    taken: Set[str] = set()
    for var in corner.metavars():
        base = re.split(r"[#%^']", var.name, maxsplit=1)[0]
        if base == "S":
            stem = "S"
        else:
            stem = base.lower().strip("_") or "v"
        name = stem
        index = 1
        while name in taken:
            index += 1
            name = f"{stem}{index}"
        taken.add(name)
        mapping[var] = Var(name)
    return corner.substitute(mapping)


# ---------------------------------------------------------------------------
# Canonical corner keys
# ---------------------------------------------------------------------------


def _constraint_term(c: MetaConstraint) -> Term:
    def bag_term(bag: Bag) -> Term:
        parts = list(bag.items) + ([Compound("$rest", (bag.rest,))] if bag.rest is not None else [])
        return Compound("$bag", tuple(sorted(parts, key=format_term)) or (Atom("$empty"),))

    if isinstance(c, TypeOf):
        term = bag_term(c.term) if isinstance(c.term, Bag) else c.term
        return Compound("$type", (Atom(str(c.type)), term))
    if isinstance(c, (Eq, Perm)):
        pair = sorted([c.left, c.right], key=format_term)
        return Compound(f"${type(c).__name__.lower()}", tuple(pair))
    if isinstance(c, Succeeds):
        return Compound("$succeeds", (Compound("$h", c.protected or (Atom("$none"),)),) + c.goals)
    if isinstance(c, FreshVars):
        scope = tuple(bag_term(t) if isinstance(t, Bag) else t for t in c.scope)
        return Compound("$fresh", (Compound("$v", c.vars or (Atom("$none"),)), Compound("$s", scope or (Atom("$none"),))))
    if isinstance(c, Inv):
        return Compound("$inv", (bag_term(c.store),))
    if isinstance(c, Equiv):
        return Compound("$equiv", (bag_term(c.left), bag_term(c.right)))
    goals = getattr(c, "goals", ())
    return Compound(f"${type(c).__name__.lower()}", goals or (Atom("$none"),))


def _state_term(tag: str, ms: MetaState) -> Term:
    parts = list(ms.items)
    if ms.rest is not None:
        parts.append(Compound("$rest", (ms.rest,)))
    if ms.pending:
        parts.append(Compound("$pending", ms.pending))
    return Compound(tag, tuple(sorted(parts, key=format_term)) or (Atom("$empty"),))


def corner_key(corner: Corner) -> Tuple:
    """Key identifying corners modulo renaming and, for alpha corners, wing swap"""

    def key_of(c: Corner):
        items = [_state_term("$anc", c.ancestor), _state_term("$left", c.left), _state_term("$right", c.right)]
        items.extend(_constraint_term(x) for x in c.where)
        return tuple(format_term(t) for t in canonical_store(items))

    keys = [key_of(corner)]
    if not corner.is_beta:
        keys.append(key_of(corner.swapped()))
    return (corner.kind in (BETA1, BETA2), corner.kind if corner.is_beta else "alpha", min(keys))


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _rule_wing(
    variant: Rule, positions: Sequence[int], items: Sequence[Term], rest: Optional[Var], where, bindings
) -> MetaState:
    kept_count = len(variant.kept)
    kept = tuple(items[p] for p in positions[:kept_count])
    body = tuple(t.substitute(bindings) for t in variant.body)
    others = tuple(t for i, t in enumerate(items) if i not in positions)
    guard = tuple(g.substitute(bindings) for g in variant.guard)
    return MetaState(Bag(kept + body + others, rest), guard, tuple(where))


def _guard_constraints(variant: Rule, bindings) -> List[MetaConstraint]:
    if not variant.guard:
        return []
    heads = tuple(t.substitute(bindings) for t in variant.heads)
    return [Succeeds(tuple(g.substitute(bindings) for g in variant.guard), heads)]


def _identifications(n_left: int, n_right: int) -> Iterator[Tuple[Tuple[int, int], ...]]:
    """Non-empty injective partial maps between head positions"""
    for size in range(1, min(n_left, n_right) + 1):
        for right_positions in itertools.combinations(range(n_right), size):
            for left_positions in itertools.permutations(range(n_left), size):
                yield tuple(zip(left_positions, right_positions))


class CornerGenerator:
    """Enumerates critical corners of a program for a solver's invariant and equivalence"""

    def __init__(self, program: Program, solver: Solver, templates: Sequence[Term] = ()):
        self.program = program
        self.solver = solver
        self.templates = list(templates)
        self._keys: Set[Tuple] = set()
        self._count = itertools.count(1)

    def _residual(self) -> Var:
        return Var(f"S#{next(self._count)}")

    def _admit(self, corner: Corner) -> Optional[Corner]:
        ctx = self.solver.context(corner.where)
        if self.solver.refuted(ctx):
            return None
        key = corner_key(corner)
        if key in self._keys:
            return None
        self._keys.add(key)
        return tidy(corner)

    def _same_wings(self, corner: Corner) -> bool:
        fixed = corner.fixed_vars()
        left = reduce(corner.left, self.solver)
        right = reduce(corner.right, self.solver)
        return variant_key(left, fixed) == variant_key(right, fixed)

    def alpha1(self) -> List[Corner]:
        found = []
        for first, second in itertools.product(self.program.rules, repeat=2):
            v1 = fresh_variant(first, "a")
            v2 = fresh_variant(second, "b")
            h1, h2 = v1.heads, v2.heads
            for pairs in _identifications(len(h1), len(h2)):
                mgu = unify_all([(h1[a], h2[b]) for a, b in pairs])
                if not mgu.is_proper:
                    continue
                theta = dict(mgu.bindings)
                identified = {b: a for a, b in pairs}
                items = [t.substitute(theta) for t in h1]
                positions2 = []
                for b, head in enumerate(h2):
                    if b in identified:
                        positions2.append(identified[b])
                    else:
                        positions2.append(len(items))
                        items.append(head.substitute(theta))
                rest = self._residual()
                scope = items + [rest]
                where = _guard_constraints(v1, theta) + _guard_constraints(v2, theta)
                where.append(FreshVars(tuple(local_vars(v1) + local_vars(v2)), tuple(scope)))
                where = tuple(c for c in where if not (isinstance(c, FreshVars) and not c.vars))
                corner = Corner(
                    ALPHA1,
                    MetaState(Bag(tuple(items), rest), (), where),
                    _rule_wing(v1, list(range(len(h1))), items, rest, where, theta),
                    _rule_wing(v2, positions2, items, rest, where, theta),
                    where,
                    f"{first.label} x {second.label} overlap {','.join(f'{a}={b}' for a, b in pairs)}",
                )
                if self.solver.refuted(self.solver.context(where)) or self._same_wings(corner):
                    continue
                admitted = self._admit(corner)
                if admitted is not None:
                    found.append(admitted)
        logger.debug("Generated %d alpha1 corners", len(found))
        return found

    def alpha2(self) -> List[Corner]:
        found = []
        for rule in self.program.rules:
            for template in self.templates:
                variant = fresh_variant(rule, "a")
                call = _template_variant(template, f"{next(self._count)}")
                heads = list(variant.heads)
                items = heads + [call]
                rest = self._residual()
                where = _guard_constraints(variant, {})
                if local_vars(variant):
                    where.append(FreshVars(tuple(local_vars(variant)), tuple(items + [rest])))
                where = tuple(where)
                corner = Corner(
                    ALPHA2,
                    MetaState(Bag(tuple(items), rest), (), where),
                    _rule_wing(variant, list(range(len(heads))), items, rest, where, {}),
                    MetaState(Bag(tuple(heads), rest), (call,), where),
                    where,
                    f"{rule.label} x {signature(call)[0]}/{signature(call)[1]}",
                )
                admitted = self._admit(corner)
                if admitted is not None:
                    found.append(admitted)
        logger.debug("Generated %d alpha2 corners", len(found))
        return found

    def alpha3(self) -> List[Corner]:
        found = []
        for i, j in itertools.combinations_with_replacement(range(len(self.templates)), 2):
            first = _template_variant(self.templates[i], f"{next(self._count)}")
            second = _template_variant(self.templates[j], f"{next(self._count)}")
            rest = self._residual()
            corner = Corner(
                ALPHA3,
                MetaState(Bag((first, second), rest)),
                MetaState(Bag((second,), rest), (first,)),
                MetaState(Bag((first,), rest), (second,)),
                (),
                f"{'/'.join(map(str, signature(first)))} x {'/'.join(map(str, signature(second)))}",
            )
            admitted = self._admit(corner)
            if admitted is not None:
                found.append(admitted)
        logger.debug("Generated %d alpha3 corners", len(found))
        return found

    def _placements(self, heads: Sequence[Term], items: Sequence[Term], may_draw: bool):
        """Unify each head with a distinct pattern item or draw it from the residual"""

        def place(index, bindings, used, placement):
            if index == len(heads):
                yield bindings, placement
                return
            head = heads[index].substitute(bindings)
            for position, item in enumerate(items):
                if position in used:
                    continue
                mgu = unify(head, item.substitute(bindings))
                if not mgu.is_proper:
                    continue
                extended = {v: t.substitute(mgu.bindings) for v, t in bindings.items()}
                extended.update(mgu.bindings)
                yield from place(index + 1, extended, used | {position}, placement + [position])
            if may_draw:
                yield from place(index + 1, bindings, used, placement + [None])

        yield from place(0, {}, frozenset(), [])

    def _beta(self, kind: str, pair, heads: Sequence[Term], build: Callable) -> List[Corner]:
        found = []
        renamed = self.solver.rename_apart(pair.pattern_vars())
        left = pair.left.substitute(renamed)
        right = pair.right.substitute(renamed)
        conditions = tuple(
            c.substitute(renamed) for c in pair.conditions + pair.left.conditions + pair.right.conditions
        )
        for bindings, placement in self._placements(heads, right.items, right.rest is not None):
            if kind == BETA1 and all(p is None for p in placement):
                continue
            theta = dict(bindings)
            drawn = [heads[k] for k, p in enumerate(placement) if p is None]
            residual = None
            if right.rest is not None:
                residual = self._residual()
                theta[right.rest] = Bag(tuple(drawn), residual)
            theta = _resolve_bag(theta)
            items = [t.substitute(theta) for t in right.items] + [t.substitute(theta) for t in drawn]
            positions = []
            offset = len(right.items)
            for p in placement:
                if p is None:
                    positions.append(offset)
                    offset += 1
                else:
                    positions.append(p)
            related = left.bag.substitute(theta)
            ancestor_store = Bag(tuple(items), residual)
            corner = build(theta, items, positions, residual, related, ancestor_store, conditions)
            if corner is None:
                continue
            admitted = self._admit(corner)
            if admitted is not None:
                found.append(admitted)
        return found

    def beta1(self) -> List[Corner]:
        found = []
        for pair in self.solver.equiv.oriented():
            for rule in self.program.rules:
                variant = fresh_variant(rule, "a")

                def build(theta, items, positions, residual, related, ancestor_store, conditions, variant=variant):
                    where = list(c.substitute(theta) for c in conditions)
                    where.append(Equiv(related, ancestor_store))
                    where.extend(_guard_constraints(variant, theta))
                    if local_vars(variant):
                        scope = tuple(items) + ((residual,) if residual is not None else ())
                        where.append(FreshVars(tuple(local_vars(variant)), scope))
                    where = tuple(where)
                    return Corner(
                        BETA1,
                        MetaState(ancestor_store, (), where),
                        MetaState(related, (), where),
                        _rule_wing(variant, positions, items, residual, where, theta),
                        where,
                        f"{pair} x {rule.label}",
                    )

                found.extend(self._beta(BETA1, pair, list(variant.heads), build))
        logger.debug("Generated %d beta1 corners", len(found))
        return found

    def beta2(self) -> List[Corner]:
        found = []
        for pair in self.solver.equiv.oriented():
            for template in self.templates:
                call = _template_variant(template, f"{next(self._count)}")

                def build(theta, items, positions, residual, related, ancestor_store, conditions, call=call):
                    where = list(c.substitute(theta) for c in conditions)
                    where.append(Equiv(related, ancestor_store))
                    where = tuple(where)
                    others = tuple(t for i, t in enumerate(items) if i != positions[0])
                    step = call.substitute(theta)
                    return Corner(
                        BETA2,
                        MetaState(ancestor_store, (), where),
                        MetaState(related, (), where),
                        MetaState(Bag(others, residual), (step,), where),
                        where,
                        f"{pair} x {signature(call)[0]}/{signature(call)[1]}",
                    )

                found.extend(self._beta(BETA2, pair, [call], build))
        logger.debug("Generated %d beta2 corners", len(found))
        return found

    def all(self) -> List[Corner]:
        corners = self.alpha1() + self.alpha2() + self.alpha3()
        if not self.solver.equiv.is_identity:
            corners += self.beta1() + self.beta2()
        return corners


def alpha1_corners(program: Program, solver: Solver) -> List[Corner]:
    return CornerGenerator(program, solver).alpha1()


def alpha2_corners(program: Program, solver: Solver, templates: Sequence[Term]) -> List[Corner]:
    return CornerGenerator(program, solver, templates).alpha2()


def alpha3_corners(solver: Solver, templates: Sequence[Term]) -> List[Corner]:
    return CornerGenerator(Program(), solver, templates).alpha3()


def beta_corners(program: Program, solver: Solver, templates: Sequence[Term]) -> List[Corner]:
    if solver.equiv.is_identity:
        return []
    generator = CornerGenerator(program, solver, templates)
    return generator.beta1() + generator.beta2()


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------


def observe(corner: Corner, solver: Solver) -> List[Corner]:
    """
    Specializations of a corner whose ancestor satisfies the invariant

    One specialization per way the ancestor instantiates an invariant pattern; an
    empty list means the observable corner is inconsistent.
    """
    if solver.invariant.trivial:
        return [corner]
    result = []
    for pattern in solver.invariant.patterns:
        ctx = solver.context(corner.where)
        for bindings, conditions in solver.instantiate_pattern(corner.ancestor.store, pattern, ctx):
            specialized = corner.substitute(bindings)
            extra = list(conditions) + [Inv(specialized.ancestor.store)]
            if corner.is_beta:
                extra.append(Inv(specialized.left.store))
            specialized = specialized.constrain(*extra)
            if solver.refuted(solver.context(specialized.where)):
                continue
            result.append(tidy(specialized))
    logger.debug("Observed %s: %d specialization(s)", corner.provenance, len(result))
    return result


# ---------------------------------------------------------------------------
# Join search
# ---------------------------------------------------------------------------


@dataclass
class _Side:
    states: Dict[Tuple, Tuple[MetaState, List[str]]] = field(default_factory=dict)
    frontier: List[Tuple[MetaState, List[str]]] = field(default_factory=list)


class JoinSearch:
    """Bounded breadth-first search for a common reduct of both wings"""

    def __init__(
        self,
        program: Program,
        solver: Solver,
        fuel: int = DEFAULT_META_FUEL,
        split_budget: int = DEFAULT_SPLIT_BUDGET,
        universe: Optional[Universe] = None,
        object_fuel: int = 1000,
        oracle_limit: int = 4000,
    ):
        self.program = program
        self.solver = solver
        self.fuel = fuel
        self.split_budget = split_budget
        self.universe = universe
        self.object_fuel = object_fuel
        self.oracle_limit = oracle_limit

    def run(self, corner: Corner, budget: Optional[int] = None) -> Verdict:
        budget = self.split_budget if budget is None else budget
        ctx = self.solver.context(corner.where)
        if self.solver.refuted(ctx):
            return Verdict(INCONSISTENT, reason="constraints are unsatisfiable")
        equalities = self.solver.derived_equalities(ctx)
        if equalities:
            corner = corner.substitute(equalities)
        joined = self._search(corner)
        if joined is not None:
            return joined
        split_verdict = self._try_splits(corner, budget)
        if split_verdict is not None:
            return split_verdict
        witness = self.find_witness(corner)
        if witness is not None:
            return Verdict(NOT_JOINABLE_VERDICT, witness=witness)
        return Verdict(UNKNOWN, reason=f"no join found within {self.fuel} steps per wing")

    def _expand(self, side: _Side, fixed: List[Var]):
        frontier = []
        for state, path in side.frontier:
            for label, successor in meta_successors(state, self.program, self.solver):
                key = variant_key(successor, fixed)
                if key in side.states or len(side.states) >= MAX_SIDE_STATES:
                    continue
                entry = (successor, path + [label])
                side.states[key] = entry
                if successor.is_proper and successor.is_reduced:
                    frontier.append(entry)
        side.frontier = frontier

    def _meet(self, left: _Side, right: _Side, fixed: List[Var], where) -> Optional[Dict[str, object]]:
        common = [key for key in left.states if key in right.states]
        if common:
            _, left_path = left.states[common[0]]
            _, right_path = right.states[common[0]]
            return {"left": left_path, "right": right_path, "meet": "variant"}
        if self.solver.equiv.is_identity:
            return None
        for lstate, left_path in left.states.values():
            if not lstate.is_proper or not lstate.is_reduced:
                continue
            for rstate, right_path in right.states.values():
                if not rstate.is_proper or not rstate.is_reduced:
                    continue
                relation = Equiv(lstate.store, rstate.store)
                known = tuple(dict.fromkeys(tuple(where) + lstate.where + rstate.where))
                if self.solver.entails(known, relation, fixed) == PROVED:
                    return {
                        "left": left_path,
                        "right": right_path,
                        "meet": "equivalent",
                    }
        return None

    def _search(self, corner: Corner) -> Optional[Verdict]:
        fixed = corner.fixed_vars()
        left = reduce(corner.left, self.solver)
        right = reduce(corner.right, self.solver)
        sides = []
        for wing in (left, right):
            side = _Side()
            side.states[variant_key(wing, fixed)] = (wing, [])
            if wing.is_proper and wing.is_reduced:
                side.frontier.append((wing, []))
            sides.append(side)
        for _ in range(self.fuel + 1):
            proof = self._meet(sides[0], sides[1], fixed, corner.where)
            if proof is not None:
                return Verdict(JOINABLE, proof=proof)
            if not sides[0].frontier and not sides[1].frontier:
                break
            for side in sides:
                self._expand(side, fixed)
        self._stalled = [state for side in sides for state, _ in side.states.values()]
        return None

    def _try_splits(self, corner: Corner, budget: int) -> Optional[Verdict]:
        if budget <= 0:
            return None
        ctx = self.solver.context(corner.where)
        candidates: List[Term] = []
        for state in getattr(self, "_stalled", []):
            for goal in undecided_guards(state, self.program, self.solver):
                if goal not in candidates:
                    candidates.append(goal)
        candidates.sort(key=lambda g: not all(isinstance(a, (Var, Int)) for a in g.args))
        for goal in candidates:
            split = self.solver.complement(goal, ctx)
            if split is None or not self.solver.validate_split(corner.where, split):
                logger.debug("Rejected split on %s", goal)
                continue
            branches = [self.run(corner.constrain(*alternative), budget - 1) for alternative in split.alternatives]
            if all(branch.settled for branch in branches):
                return Verdict(SPLIT_JOINABLE, split=split, branches=branches)
        return None

    # -- witnesses -----------------------------------------------------------

    def instances(self, corner: Corner, limit: Optional[int] = None) -> Iterator[Tuple[State, State, State]]:
        """Ground corners covered by the meta-level corner"""
        if self.universe is None:
            return
        store = corner.ancestor.store
        metavars = [v for v in corner.metavars() if v != store.rest]
        bag_vars = [store.rest] if store.rest is not None else []
        groundings = self.solver.groundings(
            corner.where,
            self.universe,
            metavars + bag_vars,
            bag_vars,
            limit or self.oracle_limit,
        )
        for grounding in groundings:
            ground = corner.substitute(grounding)
            yield (
                denote(ground.ancestor, self.solver.builtins),
                denote(ground.left, self.solver.builtins),
                denote(ground.right, self.solver.builtins),
            )

    def find_witness(self, corner: Corner) -> Optional[Dict[str, str]]:
        for ancestor, left, right in self.instances(corner):
            verdict = obj_joinable(self.program, left, right, self.solver, self.object_fuel, self.solver.builtins)
            if verdict == NOT_JOINABLE:
                return {"ancestor": str(ancestor), "left": str(left), "right": str(right)}
        return None


def join_search(
    corner: Corner,
    program: Program,
    solver: Solver,
    fuel: int = DEFAULT_META_FUEL,
    split_budget: int = DEFAULT_SPLIT_BUDGET,
    universe: Optional[Universe] = None,
) -> Verdict:
    return JoinSearch(program, solver, fuel, split_budget, universe).run(corner)


# ---------------------------------------------------------------------------
# Oracle validation
# ---------------------------------------------------------------------------


@dataclass
class OracleResult:
    agreement: bool
    checked: int = 0
    undecided: int = 0
    details: Optional[str] = None


def oracle_validate(corner: Corner, verdict: Verdict, search: JoinSearch) -> OracleResult:
    """Compare a symbolic verdict with the object-level oracle on covered ground corners"""
    checked = 0
    undecided = 0
    if verdict.kind == NOT_JOINABLE_VERDICT:
        for ancestor, left, right in search.instances(corner):
            checked += 1
            outcome = obj_joinable(search.program, left, right, search.solver, search.object_fuel)
            if outcome == NOT_JOINABLE:
                return OracleResult(True, checked)
        return OracleResult(False, checked, details="no covered instance is non-joinable")
    for ancestor, left, right in search.instances(corner):
        checked += 1
        if verdict.kind == INCONSISTENT:
            return OracleResult(False, checked, details=f"inconsistent corner covers {ancestor}")
        if verdict.kind == UNKNOWN:
            continue
        outcome = obj_joinable(search.program, left, right, search.solver, search.object_fuel)
        if outcome == NOT_JOINABLE:
            return OracleResult(False, checked, details=f"instance {left} <- {ancestor} -> {right} is not joinable")
        if outcome != OBJ_JOINABLE:
            undecided += 1
    return OracleResult(True, checked, undecided)


def validate_result(result: "CornerResult", search: JoinSearch) -> OracleResult:
    """Oracle check of an analyzed corner through its observed specializations"""
    corner, verdict, observed = result.corner, result.verdict, result.observed
    if not observed:
        return oracle_validate(corner.constrain(Inv(corner.ancestor.store)), verdict, search)
    if len(observed) == 1:
        return oracle_validate(observed[0], verdict, search)
    if verdict.kind == NOT_JOINABLE_VERDICT and not verdict.branches:
        for specialization in observed:
            outcome = oracle_validate(specialization, verdict, search)
            if outcome.agreement:
                return outcome
        return OracleResult(False, details="no specialization shows the witness")
    branches = verdict.branches if len(verdict.branches) == len(observed) else [verdict] * len(observed)
    total = OracleResult(True)
    for specialization, branch in zip(observed, branches):
        outcome = oracle_validate(specialization, branch, search)
        total.checked += outcome.checked
        total.undecided += outcome.undecided
        if not outcome.agreement:
            return OracleResult(False, total.checked, total.undecided, outcome.details)
    return total


# ---------------------------------------------------------------------------
# Invariant closure
# ---------------------------------------------------------------------------


def pattern_states(pattern: StatePattern, solver: Solver, universe: Universe, limit: int = 500) -> Iterator[State]:
    """Concrete states described by an invariant pattern over the universe"""
    bag_vars = [pattern.rest] if pattern.rest is not None else []
    metavars = [v for v in pattern.pattern_vars() if v not in bag_vars]
    element_types = {}
    item_type = residual_type(pattern.conditions, pattern.rest, solver.types)
    if item_type is not None:
        element_types[pattern.rest] = item_type
    for grounding in solver.groundings(
        pattern.conditions, universe, metavars + bag_vars, bag_vars, limit, element_types
    ):
        bag = pattern.bag.substitute(grounding)
        if bag.rest is None:
            yield denote(MetaState(bag), solver.builtins)


def check_invariant_closure(program: Program, solver: Solver, universe: Universe, fuel: int = 1):
    """Raise SpecError when a sampled invariant state has a proper successor outside it"""
    if solver.invariant.trivial:
        return
    for pattern in solver.invariant.patterns:
        for state in pattern_states(pattern, solver, universe):
            if not inv_member(state, solver):
                continue
            for label, target in successors(program, state, solver.builtins):
                if target.is_proper and not inv_member(target, solver):
                    raise SpecError(
                        f"invariant is not closed under transitions: {state} --{label}--> {target}"
                    )


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass
class CornerResult:
    index: int
    corner: Corner
    verdict: Verdict
    observed: List[Corner] = field(default_factory=list)


@dataclass
class Analysis:
    """Outcome of a confluence check"""

    program: Program
    options: CheckOptions
    results: List[CornerResult]
    summary: str
    universe: Universe

    @property
    def mode(self) -> str:
        if self.options.modulo_equivalence and not self.options.invariant_only:
            return "confluence-modulo-equivalence"
        return "confluence"

    def count(self, verdict: str) -> int:
        return sum(1 for r in self.results if r.verdict.kind == verdict)


def build_solver(spec: AnalysisSpec, builtins: BuiltinTable, options: CheckOptions, modal_table: ModalTable) -> Solver:
    """Solver for the check; invariant-only analysis drops the equivalence"""
    equiv = IDENTITY if options.invariant_only or not options.modulo_equivalence else spec.equiv
    return Solver(spec.types, modal_table, builtins, spec.invariant, equiv)


def default_universe(program: Program) -> Universe:
    ints = set(range(-2, 3))
    for value in program.integers():
        ints.update(range(value - 2, value + 3))
    consts = tuple(program.atoms()) or ("a", "b")
    return Universe(ints=tuple(sorted(ints)), consts=consts)


def analyze_corner(corner: Corner, search: JoinSearch) -> Tuple[Verdict, List[Corner]]:
    """Observe a corner and search each specialization for a join"""
    observed = observe(corner, search.solver)
    if not observed:
        return Verdict(INCONSISTENT, reason="no state of the invariant is covered"), observed
    if len(observed) == 1:
        return search.run(observed[0]), observed
    branches = [search.run(specialization) for specialization in observed]
    if all(branch.settled for branch in branches):
        split = Split(tuple((Inv(s.ancestor.store),) for s in observed), provenance="invariant")
        return Verdict(SPLIT_JOINABLE, split=split, branches=branches), observed
    for branch in branches:
        if branch.kind == NOT_JOINABLE_VERDICT:
            return branch, observed
    return Verdict(UNKNOWN, reason="some invariant specialization did not join", branches=branches), observed


def summarize(results: Iterable[CornerResult], assume_termination: bool) -> str:
    verdicts = [r.verdict.kind for r in results]
    if any(v == NOT_JOINABLE_VERDICT for v in verdicts):
        return NOT_CONFLUENT
    if all(v in SETTLED for v in verdicts) and assume_termination:
        return CONFLUENT
    return UNKNOWN_SUMMARY


def generate(program: Program, solver: Solver, templates: Sequence[Term]) -> List[Corner]:
    return CornerGenerator(program, solver, templates).all()


def check(
    program: Program,
    solver: Solver,
    options: Optional[CheckOptions] = None,
    progress: Optional[Callable[[Iterable], Iterable]] = None,
    executor=None,
) -> Analysis:
    """
    Run the whole analysis

    The invariant closure check runs first and raises SpecError when it fails.
    Corners are analyzed independently; results keep generation order.
    """
    options = options or CheckOptions()
    universe = options.universe or default_universe(program)
    check_invariant_closure(program, solver, universe)
    templates = builtin_templates(solver.builtins, options.templates)
    corners = generate(program, solver, templates)
    logger.info("Analyzing %d corners", len(corners))
    search = JoinSearch(
        program,
        solver,
        options.fuel,
        options.split_budget,
        universe,
        options.object_fuel,
        options.oracle_limit,
    )
    if executor is not None:
        outcomes = executor.map(lambda c: analyze_corner(c, _fork(search)), corners)
    else:
        outcomes = (analyze_corner(c, search) for c in corners)
    if progress is not None:
        outcomes = progress(outcomes, total=len(corners))
    results = [
        CornerResult(index, corner, verdict, observed)
        for index, (corner, (verdict, observed)) in enumerate(zip(corners, outcomes), start=1)
    ]
    return Analysis(program, options, results, summarize(results, options.assume_termination), universe)


def _fork(search: JoinSearch) -> JoinSearch:
    """Search objects keep per-corner scratch state; threads get their own"""
    return JoinSearch(
        search.program,
        search.solver,
        search.fuel,
        search.split_budget,
        search.universe,
        search.object_fuel,
        search.oracle_limit,
    )


__all__ = [
    "ALPHA1",
    "ALPHA2",
    "ALPHA3",
    "Analysis",
    "BETA1",
    "BETA2",
    "CONFLUENT",
    "NOT_CONFLUENT",
    "CheckOptions",
    "Corner",
    "CornerGenerator",
    "CornerResult",
    "JoinSearch",
    "Verdict",
    "alpha1_corners",
    "alpha2_corners",
    "alpha3_corners",
    "analyze_corner",
    "beta_corners",
    "build_solver",
    "builtin_templates",
    "check",
    "check_invariant_closure",
    "corner_key",
    "join_search",
    "observe",
    "oracle_validate",
    "validate_result",
]
