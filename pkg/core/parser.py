"""
CHR Front End
pyparsing grammar for CHR programs in generalized simpagation form, queries and the
analysis-spec DSL (types, invariant patterns, equivalence patterns)
"""

import itertools
import logging
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import pyparsing as pp

from core.builtins import BuiltinTable, default_table
from core.errors import ArityClashError, ChrSyntaxError, SpecError
from core.metaterms import Errors, Fails, MetaConstraint, Perm, Succeeds, TypeOf
from core.program import Program, Rule
from core.specs import AnalysisSpec, EquivPair, EquivSpec, InvariantSpec, StatePattern, check_pattern_vars
from core.terms import TRUE, Atom, Compound, Float, Int, Term, Var, make_list, signature
from core.types import BASE_PARENTS, BaseType, ListOf, Literal, MultisetOf, Named, Shape, TypeExpr, TypeTable, UnionOf

logger = logging.getLogger(__name__)

pp.ParserElement.enable_packrat()

COMPARISON = r"=:=|=\\=|=<|==(?!>)|\\==|\\=|>=|=(?![=<>:\\])|<(?![=>])|>(?!=)|is\b"


@dataclass
class _Located:
    """Parsed clause plus its source offset"""

    kind: str
    loc: int
    parts: Dict


class ChrParser:
    """Grammar for CHR programs, queries and analysis specs"""

    def __init__(self, builtins: Optional[BuiltinTable] = None):
        self.builtins = builtins or default_table()
        self._anonymous = itertools.count()
        self._lock = threading.Lock()
        self._build_grammar()

    # -- grammar -----------------------------------------------------------

    def _build_grammar(self):
        LPAR, RPAR, LBRACK, RBRACK, LBRACE, RBRACE = map(pp.Suppress, "()[]{}")
        COMMA = pp.Suppress(",")
        BAR = pp.Suppress("|")
        self.end = pp.Suppress(pp.Regex(r"\.(?=\s|%|$)"))

        variable = pp.Regex(r"[A-Z_][A-Za-z0-9_]*").set_parse_action(self._variable)
        name = pp.Regex(r"[a-z][A-Za-z0-9_]*") | pp.Regex(r"'(?:[^'\\]|\\.)*'").set_parse_action(self._quoted)
        number = pp.Regex(r"\d+\.\d+(?:[eE][+-]?\d+)?").set_parse_action(lambda t: Float(float(t[0]))) | pp.Regex(
            r"\d+"
        ).set_parse_action(lambda t: Int(int(t[0])))

        expr = pp.Forward()
        arguments = expr + pp.ZeroOrMore(COMMA + expr)
        compound = (name + LPAR + pp.Group(arguments) + RPAR).set_parse_action(
            lambda t: Compound(t[0], tuple(t[1]))
        )
        list_term = (
            LBRACK
            + pp.Optional(pp.Group(arguments)("items") + pp.Optional(BAR + expr("tail")))
            + RBRACK
        ).set_parse_action(self._list)
        atom = name.copy().set_parse_action(lambda t: Atom(t[0]))
        primary = compound | number | variable | list_term | atom | (LPAR + expr + RPAR)

        expr <<= pp.infix_notation(
            primary,
            [
                (pp.Literal("-"), 1, pp.OpAssoc.RIGHT, self._unary),
                (pp.Regex(r"//|\*|/(?!/)|mod\b"), 2, pp.OpAssoc.LEFT, self._binary),
                (pp.Regex(r"\+(?!\+)|-"), 2, pp.OpAssoc.LEFT, self._binary),
                (pp.Regex(COMPARISON), 2, pp.OpAssoc.LEFT, self._binary),
            ],
        )
        self.expr = expr
        goals = pp.Group(expr + pp.ZeroOrMore(COMMA + expr))
        self.goals = goals

        signature_decl = pp.Group(name + pp.Suppress("/") + pp.Regex(r"\d+"))
        declaration = (
            pp.Suppress(":-")
            + pp.Suppress(pp.Keyword("chr_constraint"))
            + pp.Group(signature_decl + pp.ZeroOrMore(COMMA + signature_decl))("signatures")
            + self.end
        ).set_parse_action(lambda s, loc, t: _Located("decl", loc, {"signatures": list(t.signatures)}))

        rule = (
            pp.Optional(name("name") + pp.Suppress("@"))
            + goals("first")
            + pp.Optional(pp.Suppress("\\") + goals("second"))
            + (pp.Literal("<=>") | pp.Literal("==>"))("arrow")
            + goals("g1")
            + pp.Optional(BAR + goals("g2"))
            + self.end
        ).set_parse_action(self._rule)

        comment = pp.Regex(r"%.*")
        self.program = pp.ZeroOrMore(declaration | rule)
        self.program.ignore(comment)
        self.query = pp.Optional(goals) + pp.Optional(self.end)
        self.query.ignore(comment)

        bag = pp.Group(LBRACE + pp.Optional(goals)("items") + RBRACE + pp.Optional(pp.Suppress("++") + variable("rest")))
        where = pp.Optional(pp.Suppress(pp.Keyword("where")) + goals("conditions"))
        type_def = (
            pp.Suppress(pp.Keyword("type"))
            + name("name")
            + pp.Suppress("=")
            + pp.Group(expr + pp.ZeroOrMore(pp.Suppress(";") + expr))("alternatives")
            + self.end
        ).set_parse_action(lambda s, loc, t: _Located("type", loc, {"name": t.name, "alternatives": list(t.alternatives)}))
        invariant = (pp.Suppress(pp.Keyword("invariant")) + bag("bag") + where + self.end).set_parse_action(
            lambda s, loc, t: _Located("invariant", loc, {"bag": t.bag, "conditions": _items(t.conditions)})
        )
        equiv = (
            pp.Suppress(pp.Keyword("equiv")) + bag("left") + pp.Suppress("~") + bag("right") + where + self.end
        ).set_parse_action(
            lambda s, loc, t: _Located(
                "equiv", loc, {"left": t.left, "right": t.right, "conditions": _items(t.conditions)}
            )
        )
        self.spec = pp.ZeroOrMore(type_def | invariant | equiv)
        self.spec.ignore(comment)

    # -- parse actions -----------------------------------------------------

    def _variable(self, tokens):
        name = tokens[0]
        if name == "_":
            name = f"_G{next(self._anonymous)}"
        return Var(name)

    @staticmethod
    def _quoted(tokens):
        body = tokens[0][1:-1]
        return body.replace("\\'", "'").replace("\\\\", "\\")

    @staticmethod
    def _list(tokens):
        items = list(tokens["items"]) if "items" in tokens else []
        tail = tokens["tail"] if "tail" in tokens else Atom("[]")
        return make_list(items, tail)

    @staticmethod
    def _unary(tokens):
        group = list(tokens[0])
        result = group[-1]
        for op in reversed(group[:-1]):
            if isinstance(result, Int):
                result = Int(-result.value)
            elif isinstance(result, Float):
                result = Float(-result.value)
            else:
                result = Compound(op, (result,))
        return result

    @staticmethod
    def _binary(tokens):
        group = tokens[0]
        result = group[0]
        for i in range(1, len(group), 2):
            result = Compound(group[i], (result, group[i + 1]))
        return result

    @staticmethod
    def _rule(s, loc, tokens):
        return _Located(
            "rule",
            loc,
            {
                "name": tokens.get("name"),
                "first": list(tokens["first"]),
                "second": list(tokens["second"]) if "second" in tokens else None,
                "arrow": tokens["arrow"],
                "g1": list(tokens["g1"]),
                "g2": list(tokens["g2"]) if "g2" in tokens else None,
            },
        )

    # -- entry points ------------------------------------------------------

    def _run(self, grammar: pp.ParserElement, text: str):
        with self._lock:
            try:
                return grammar.parse_string(text, parse_all=True)
            except pp.ParseBaseException as exc:
                raise ChrSyntaxError(exc.msg, exc.lineno, exc.col) from exc

    def parse_program(self, text: str) -> Program:
        """Parse a CHR program; an empty text is the empty program"""
        clauses = self._run(self.program, text)
        declared: Dict[str, Set[int]] = {}
        rules: List[Rule] = []
        for clause in clauses:
            if clause.kind == "decl":
                for functor, arity in clause.parts["signatures"]:
                    declared.setdefault(functor, set()).add(int(arity))
            else:
                rules.append(self._build_rule(clause, text))
        program = Program(rules=rules, source=text)
        for functor, arities in declared.items():
            program.constraints.update((functor, a) for a in arities)
        for rule in rules:
            for term in rule.heads + tuple(t for t in rule.body if not self.builtins.is_builtin(t)):
                functor, arity = signature(term)
                if declared and functor in declared and arity not in declared[functor]:
                    raise ArityClashError(
                        f"{functor}/{arity} used in rule {rule.label} but declared as "
                        + ", ".join(f"{functor}/{a}" for a in sorted(declared[functor]))
                    )
                program.constraints.add((functor, arity))
        logger.debug("Parsed %d rules, %d constraint signatures", len(rules), len(program.constraints))
        return program

    def _build_rule(self, clause: _Located, text: str) -> Rule:
        parts = clause.parts
        line, column = pp.lineno(clause.loc, text), pp.col(clause.loc, text)
        if parts["second"] is not None:
            if parts["arrow"] != "<=>":
                raise ChrSyntaxError("a simpagation rule needs <=>", line, column)
            kept, removed = parts["first"], parts["second"]
        elif parts["arrow"] == "==>":
            kept, removed = parts["first"], []
        else:
            kept, removed = [], parts["first"]
        guard, body = (parts["g1"], parts["g2"]) if parts["g2"] is not None else ([], parts["g1"])
        kept, removed, guard, body = (_drop_true(x) for x in (kept, removed, guard, body))
        for head in kept + removed:
            if not isinstance(head, (Atom, Compound)) or self.builtins.is_builtin(head):
                raise ChrSyntaxError(f"rule head {head} is not a user constraint", line, column)
        for goal in guard:
            if not self.builtins.is_builtin(goal):
                raise ChrSyntaxError(f"guard goal {goal} is not a built-in", line, column)
        for goal in body:
            if not isinstance(goal, (Atom, Compound)):
                raise ChrSyntaxError(f"body goal {goal} is not callable", line, column)
        if not kept and not removed:
            raise ChrSyntaxError("a rule needs at least one head constraint", line, column)
        return Rule(tuple(kept), tuple(removed), tuple(guard), tuple(body), parts["name"])

    def parse_query(self, text: str) -> Tuple[Term, ...]:
        """Comma-separated constraints; an empty text is the empty multiset"""
        result = self._run(self.query, text)
        goals = list(result[0]) if len(result) else []
        for goal in goals:
            if not isinstance(goal, (Atom, Compound)):
                raise ChrSyntaxError(f"query goal {goal} is not callable")
        return tuple(_drop_true(goals))

    def parse_term(self, text: str) -> Term:
        return self._run(self.expr, text)[0]

    def parse_analysis_spec(self, text: str) -> AnalysisSpec:
        """
        Parse type definitions, invariant patterns and equivalence pairs

        An empty text yields the trivial invariant and the identity equivalence.
        """
        clauses = list(self._run(self.spec, text))
        table = TypeTable()
        type_names = {c.parts["name"] for c in clauses if c.kind == "type"}
        for clause in clauses:
            if clause.kind != "type":
                continue
            alternatives = [self._type_expr(t, type_names) for t in clause.parts["alternatives"]]
            table.define(clause.parts["name"], alternatives[0] if len(alternatives) == 1 else UnionOf(tuple(alternatives)))
        for expr in table.defs.values():
            table.validate(expr)

        patterns: List[StatePattern] = []
        pairs: List[EquivPair] = []
        for clause in clauses:
            if clause.kind == "invariant":
                items, rest = _bag(clause.parts["bag"])
                conditions = self._conditions(clause.parts["conditions"], table, type_names)
                pattern = StatePattern(items, rest, conditions)
                check_pattern_vars(pattern.pattern_vars(), conditions, "invariant")
                patterns.append(pattern)
            elif clause.kind == "equiv":
                left = StatePattern(*_bag(clause.parts["left"]))
                right = StatePattern(*_bag(clause.parts["right"]))
                conditions = self._conditions(clause.parts["conditions"], table, type_names)
                pair = EquivPair(left, right, conditions)
                check_pattern_vars(pair.pattern_vars(), conditions, "equivalence")
                pairs.append(pair)
        logger.debug("Parsed spec: %d types, %d invariant patterns, %d equivalence pairs", len(table.defs), len(patterns), len(pairs))
        return AnalysisSpec(table, InvariantSpec(tuple(patterns)), EquivSpec(tuple(pairs)), text)

    def _type_expr(self, term: Term, type_names: Set[str]) -> TypeExpr:
        if isinstance(term, Atom):
            if term.name in BASE_PARENTS:
                return BaseType(term.name)
            if term.name in type_names:
                return Named(term.name)
            return Literal(term)
        if isinstance(term, (Int, Float)):
            return Literal(term)
        if isinstance(term, Compound):
            if term.functor == "list" and len(term.args) == 1:
                return ListOf(self._type_expr(term.args[0], type_names))
            if term.functor == "multiset" and len(term.args) == 1:
                return MultisetOf(self._type_expr(term.args[0], type_names))
            return Shape(term.functor, tuple(self._type_expr(a, type_names) for a in term.args))
        raise SpecError(f"{term} is not a type expression")

    def _conditions(self, terms: Sequence[Term], table: TypeTable, type_names: Set[str]) -> Tuple[MetaConstraint, ...]:
        conditions: List[MetaConstraint] = []
        for term in terms:
            if term == TRUE:
                continue
            if not isinstance(term, Compound):
                raise SpecError(f"unknown condition {term}")
            if term.functor == "type" and len(term.args) == 2:
                type_expr = self._type_expr(term.args[0], type_names)
                if isinstance(type_expr, Literal):
                    raise SpecError(f"unknown type {term.args[0]}")
                table.validate(type_expr)
                conditions.append(TypeOf(type_expr, term.args[1]))
            elif term.functor == "perm" and len(term.args) == 2:
                conditions.append(Perm(term.args[0], term.args[1]))
            elif term.functor in ("succeeds", "fails", "errors"):
                for goal in term.args:
                    if not self.builtins.is_builtin(goal):
                        raise SpecError(f"{goal} in {term.functor} is not a built-in")
                kind = {"succeeds": Succeeds, "fails": Fails, "errors": Errors}[term.functor]
                conditions.append(kind(term.args))
            else:
                raise SpecError(f"unknown condition {term}")
        return tuple(conditions)


def _items(results) -> List[Term]:
    return list(results) if results else []


def _bag(group) -> Tuple[Tuple[Term, ...], Optional[Var]]:
    items = tuple(_drop_true(list(group["items"]) if "items" in group else []))
    rest = group["rest"] if "rest" in group else None
    return items, rest


def _drop_true(goals) -> List[Term]:
    return [g for g in goals if g != TRUE]


_DEFAULT_PARSER: Optional[ChrParser] = None


def default_parser() -> ChrParser:
    global _DEFAULT_PARSER
    if _DEFAULT_PARSER is None:
        _DEFAULT_PARSER = ChrParser()
    return _DEFAULT_PARSER


def parse_program(text: str) -> Program:
    return default_parser().parse_program(text)


def parse_query(text: str) -> Tuple[Term, ...]:
    return default_parser().parse_query(text)


def parse_term(text: str) -> Term:
    return default_parser().parse_term(text)


def parse_analysis_spec(text: str) -> AnalysisSpec:
    return default_parser().parse_analysis_spec(text)
