"""
Linear Arithmetic Module
Linear meta-terms for arithmetic results and Fourier-Motzkin feasibility over the
rationals, with integer tightening of strict inequalities
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from core.terms import Compound, Int, Term, Var

logger = logging.getLogger(__name__)

MAX_CONSTRAINTS = 400

Coefficients = Dict[Var, Fraction]


@dataclass(frozen=True)
class LinearTerm(Term):
    """c1*v1 + ... + ck*vk + const over integer-valued metavariables"""

    coeffs: Tuple[Tuple[Var, int], ...]
    const: int = 0

    def variables(self):
        for var, _ in self.coeffs:
            yield var

    def substitute(self, bindings):
        total: Dict[Var, int] = {}
        const = self.const
        fallback = False
        for var, coeff in self.coeffs:
            image = var.substitute(bindings)
            parts = linearize(image)
            if parts is None:
                fallback = True
                break
            image_coeffs, image_const = parts
            const += coeff * image_const
            for v, c in image_coeffs.items():
                total[v] = total.get(v, 0) + coeff * c
        if fallback:
            return to_expression(self).substitute(bindings)
        return make_linear(total, const)

    def __str__(self):
        parts = []
        for var, coeff in self.coeffs:
            magnitude = abs(coeff)
            text = var.name if magnitude == 1 else f"{magnitude}*{var.name}"
            if not parts:
                parts.append(text if coeff > 0 else f"-{text}")
            else:
                parts.append(f"+{text}" if coeff > 0 else f"-{text}")
        if self.const or not parts:
            parts.append(f"+{self.const}" if parts and self.const > 0 else str(self.const))
        return "".join(parts)


def make_linear(coeffs: Dict[Var, int], const: int = 0) -> Term:
    """Normalized linear term: Int when constant, the variable itself when trivial"""
    cleaned = tuple(sorted(((v, int(c)) for v, c in coeffs.items() if c), key=lambda vc: vc[0].name))
    if not cleaned:
        return Int(int(const))
    if len(cleaned) == 1 and cleaned[0][1] == 1 and const == 0:
        return cleaned[0][0]
    return LinearTerm(cleaned, int(const))


def linearize(term: Term) -> Optional[Tuple[Dict[Var, int], int]]:
    """
    Read a term as an integer linear combination of variables

    Only +, - and multiplication by a constant are accepted; anything else
    (division, floats, atoms) returns None.
    """
    if isinstance(term, Int):
        return {}, term.value
    if isinstance(term, Var):
        return {term: 1}, 0
    if isinstance(term, LinearTerm):
        return dict(term.coeffs), term.const
    if not isinstance(term, Compound):
        return None
    if term.functor == "-" and len(term.args) == 1:
        inner = linearize(term.args[0])
        return None if inner is None else _scale(inner, -1)
    if term.functor == "+" and len(term.args) == 1:
        return linearize(term.args[0])
    if len(term.args) != 2 or term.functor not in ("+", "-", "*"):
        return None
    left = linearize(term.args[0])
    right = linearize(term.args[1])
    if left is None or right is None:
        return None
    if term.functor == "*":
        if not left[0]:
            return _scale(right, left[1])
        if not right[0]:
            return _scale(left, right[1])
        return None
    sign = 1 if term.functor == "+" else -1
    coeffs = dict(left[0])
    for var, coeff in right[0].items():
        coeffs[var] = coeffs.get(var, 0) + sign * coeff
    return coeffs, left[1] + sign * right[1]


def _scale(parts, factor: int):
    coeffs, const = parts
    return {v: c * factor for v, c in coeffs.items()}, const * factor


def to_expression(term: LinearTerm) -> Term:
    """Plain arithmetic expression with the same value"""
    result: Optional[Term] = None
    for var, coeff in term.coeffs:
        piece: Term = var if abs(coeff) == 1 else Compound("*", (Int(abs(coeff)), var))
        if result is None:
            result = piece if coeff > 0 else Compound("-", (Int(0), piece))
        else:
            result = Compound("+" if coeff > 0 else "-", (result, piece))
    if term.const or result is None:
        const = Int(abs(term.const))
        if result is None:
            return Int(term.const)
        result = Compound("+" if term.const > 0 else "-", (result, const))
    return result


def linear_value(term: LinearTerm, values: Dict[Var, int]) -> Optional[int]:
    total = term.const
    for var, coeff in term.coeffs:
        if var not in values:
            return None
        total += coeff * values[var]
    return total


# ---------------------------------------------------------------------------
# Fourier-Motzkin
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coeffs) + const  op  0 with op one of <, <=, ="""

    coeffs: Tuple[Tuple[Var, Fraction], ...]
    const: Fraction
    op: str

    @property
    def vars(self) -> Set[Var]:
        return {v for v, _ in self.coeffs}

    def coeff(self, var: Var) -> Fraction:
        for v, c in self.coeffs:
            if v == var:
                return c
        return Fraction(0)

    def negated(self) -> List["LinearConstraint"]:
        """Alternatives whose disjunction is the negation"""
        flipped = _constraint({v: -c for v, c in self.coeffs}, -self.const, "<")
        if self.op == "<":
            return [_constraint(dict(flipped.coeffs), flipped.const, "<=")]
        if self.op == "<=":
            return [flipped]
        return [_constraint(dict(self.coeffs), self.const, "<"), flipped]

    def __str__(self):
        terms = " + ".join(f"{c}*{v.name}" for v, c in self.coeffs) or "0"
        return f"{terms} + {self.const} {self.op} 0"


def _constraint(coeffs: Dict[Var, Fraction], const, op: str) -> LinearConstraint:
    cleaned = tuple(sorted(((v, Fraction(c)) for v, c in coeffs.items() if c), key=lambda vc: vc[0].name))
    return LinearConstraint(cleaned, Fraction(const), op)


def comparison_constraints(op: str, left: Term, right: Term) -> Optional[List[LinearConstraint]]:
    """
    Linear facts expressing `left op right` for a succeeding comparison

    Returns None when either side is not linear; =\\= has no conjunctive form.
    """
    lhs = linearize(left)
    rhs = linearize(right)
    if lhs is None or rhs is None:
        return None
    coeffs: Dict[Var, Fraction] = {v: Fraction(c) for v, c in lhs[0].items()}
    for var, coeff in rhs[0].items():
        coeffs[var] = coeffs.get(var, Fraction(0)) - coeff
    const = Fraction(lhs[1] - rhs[1])
    negated = {v: -c for v, c in coeffs.items()}
    if op == "<":
        return [_constraint(coeffs, const, "<")]
    if op == "=<":
        return [_constraint(coeffs, const, "<=")]
    if op == ">":
        return [_constraint(negated, -const, "<")]
    if op == ">=":
        return [_constraint(negated, -const, "<=")]
    if op in ("=:=", "is"):
        return [_constraint(coeffs, const, "=")]
    return None


NEGATED_COMPARISON = {"<": ">=", ">=": "<", ">": "=<", "=<": ">", "=:=": "=\\=", "=\\=": "=:="}


def _tighten(c: LinearConstraint, int_vars: Set[Var]) -> LinearConstraint:
    if c.op != "<" or not c.coeffs or not c.vars <= int_vars:
        return c
    scale = 1
    for _, coeff in c.coeffs:
        scale = scale * coeff.denominator // math.gcd(scale, coeff.denominator)
    scale = scale * c.const.denominator // math.gcd(scale, c.const.denominator)
    coeffs = {v: coeff * scale for v, coeff in c.coeffs}
    # integer sum < -k  <=>  sum <= -k - 1
    return _constraint(coeffs, c.const * scale + 1, "<=")


def _trivially_false(c: LinearConstraint) -> bool:
    if c.coeffs:
        return False
    if c.op == "<":
        return not c.const < 0
    if c.op == "<=":
        return not c.const <= 0
    return c.const != 0


def feasible(constraints: Iterable[LinearConstraint], int_vars: Iterable[Var] = ()) -> bool:
    """
    False only when the conjunction has no rational (or, for integer variables
    with strict bounds, no integer) solution; True when feasible or undecided
    """
    ints = set(int_vars)
    work: Set[LinearConstraint] = set()
    for c in constraints:
        if c.op == "=":
            work.add(_constraint(dict(c.coeffs), c.const, "<="))
            work.add(_constraint({v: -k for v, k in c.coeffs}, -c.const, "<="))
        else:
            work.add(_tighten(c, ints))
    while True:
        if any(_trivially_false(c) for c in work):
            return False
        work = {c for c in work if c.coeffs}
        if not work:
            return True
        if len(work) > MAX_CONSTRAINTS:
            logger.debug("Fourier-Motzkin gave up with %d constraints", len(work))
            return True
        variables = set().union(*(c.vars for c in work))
        var = min(variables, key=lambda v: (_elimination_cost(work, v), v.name))
        work = _eliminate(work, var, ints)


def _elimination_cost(work: Set[LinearConstraint], var: Var) -> int:
    pos = sum(1 for c in work if c.coeff(var) > 0)
    neg = sum(1 for c in work if c.coeff(var) < 0)
    return pos * neg - pos - neg


def _eliminate(work: Set[LinearConstraint], var: Var, ints: Set[Var]) -> Set[LinearConstraint]:
    upper = [c for c in work if c.coeff(var) > 0]
    lower = [c for c in work if c.coeff(var) < 0]
    result = {c for c in work if not c.coeff(var)}
    for p in upper:
        a = p.coeff(var)
        for n in lower:
            b = -n.coeff(var)
            coeffs: Dict[Var, Fraction] = {}
            for v, c in p.coeffs:
                if v != var:
                    coeffs[v] = coeffs.get(v, Fraction(0)) + b * c
            for v, c in n.coeffs:
                if v != var:
                    coeffs[v] = coeffs.get(v, Fraction(0)) + a * c
            op = "<" if "<" in (p.op, n.op) else "<="
            result.add(_tighten(_constraint(coeffs, b * p.const + a * n.const, op), ints))
    return result


def entails(facts: Sequence[LinearConstraint], goal: LinearConstraint, int_vars: Iterable[Var] = ()) -> bool:
    """True when every solution of facts satisfies goal"""
    ints = set(int_vars)
    return all(not feasible(list(facts) + [alternative], ints) for alternative in goal.negated())


def entails_comparison(
    facts: Sequence[LinearConstraint], op: str, left: Term, right: Term, int_vars: Iterable[Var] = ()
) -> Optional[bool]:
    """
    Decide `left op right` from linear facts

    Returns True when entailed, False when its negation is entailed and None otherwise.
    """
    ints = set(int_vars)
    if op == "=\\=":
        equal = entails_comparison(facts, "=:=", left, right, ints)
        return None if equal is None else not equal
    goal = comparison_constraints(op, left, right)
    if goal is None:
        return None
    if all(entails(facts, g, ints) for g in goal):
        return True
    if not feasible(list(facts) + goal, ints):
        return False
    return None
