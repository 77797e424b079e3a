"""Declarative mapping rules: the SPARQL CONSTRUCT subset.

A rule file holds PREFIX declarations and one ``CONSTRUCT { ... } WHERE
{ ... }`` form.  The WHERE block is a basic graph pattern plus BIND
clauses over IRI / CONCAT / ENCODE_FOR_URI / STR; anything else SPARQL
offers (FILTER, OPTIONAL, UNION, property paths, ...) is rejected at
parse time by name rather than silently ignored.

Evaluation follows SPARQL semantics where they are observable: BIND
errors leave the variable unbound instead of failing the solution, and
template triples that end up with an unbound variable or an ill-typed
position are skipped.  The join order heuristic (most-bound pattern
first, bindings propagated left to right) only affects speed, never the
solution set.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache
from importlib import resources
from typing import Iterable, Iterator, Mapping

from ._scan import ScanError, Scanner
from .mint import encode_for_uri
from .rdf import (
    RDF_TYPE,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Term,
    Triple,
    lang_literal,
)
from .vocab import load_table

FUNCTIONS = ("IRI", "CONCAT", "ENCODE_FOR_URI", "STR")

_UNSUPPORTED_KEYWORDS = (
    "FILTER",
    "OPTIONAL",
    "UNION",
    "MINUS",
    "GRAPH",
    "SERVICE",
    "VALUES",
    "SELECT",
    "EXISTS",
)


class RuleParseError(ScanError):
    """Syntax error in a mapping rule, with position."""


class _RuleScanner(Scanner):
    error_class = RuleParseError


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __repr__(self):
        return f"?{self.name}"


PatternTerm = Term | Variable


@dataclass(frozen=True, slots=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def __post_init__(self) -> None:
        if isinstance(self.subject, Literal):
            raise ValueError("pattern subject cannot be a literal")
        if not isinstance(self.predicate, (Iri, Variable)):
            raise ValueError("pattern predicate must be an IRI or a variable")

    def terms(self) -> tuple[PatternTerm, PatternTerm, PatternTerm]:
        return (self.subject, self.predicate, self.object)

    def variables(self) -> set[str]:
        return {t.name for t in self.terms() if isinstance(t, Variable)}


@dataclass(frozen=True, slots=True)
class Constant:
    term: Term


@dataclass(frozen=True, slots=True)
class VariableRef:
    name: str


@dataclass(frozen=True, slots=True)
class FnCall:
    fn: str
    args: tuple["Expression", ...]

    def __post_init__(self) -> None:
        if self.fn not in FUNCTIONS:
            raise ValueError(f"unknown function name: {self.fn}")
        if self.fn == "CONCAT":
            if not self.args:
                raise ValueError("CONCAT needs at least one argument")
        elif len(self.args) != 1:
            raise ValueError(f"{self.fn} takes exactly one argument")


Expression = Constant | VariableRef | FnCall


@dataclass(frozen=True, slots=True)
class BindClause:
    variable: str
    expression: Expression


@dataclass(frozen=True, slots=True)
class MappingRule:
    name: str
    prefixes: Mapping[str, str]
    template: tuple[TriplePattern, ...]
    where: tuple[TriplePattern, ...]
    binds: tuple[BindClause, ...]

    def __post_init__(self) -> None:
        where_vars = set()
        for p in self.where:
            where_vars |= p.variables()
        produced = set(where_vars)
        for bind in self.binds:
            if bind.variable in produced:
                raise ValueError(
                    f"rule {self.name!r}: BIND reassigns ?{bind.variable}"
                )
            for ref in _expression_vars(bind.expression):
                if ref not in produced:
                    raise ValueError(
                        f"rule {self.name!r}: BIND expression uses ?{ref} "
                        "before it is bound"
                    )
            produced.add(bind.variable)
        for p in self.template:
            for var in p.variables():
                if var not in produced:
                    raise ValueError(
                        f"rule {self.name!r}: template variable ?{var} has no source"
                    )

    def iris(self) -> set[Iri]:
        """Every IRI constant in the template and WHERE patterns."""
        found = set()
        for p in self.template + self.where:
            found.update(t for t in p.terms() if isinstance(t, Iri))
        return found


def _expression_vars(e: Expression) -> Iterator[str]:
    if isinstance(e, VariableRef):
        yield e.name
    elif isinstance(e, FnCall):
        for arg in e.args:
            yield from _expression_vars(arg)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_rule(text: str, name: str = "rule") -> MappingRule:
    sc = _RuleScanner(text)
    prefixes: dict[str, str] = {}
    sc.skip_ws()
    while sc.match_keyword("PREFIX"):
        sc.skip_ws()
        prefix, local = sc.read_pname()
        if local:
            raise sc.error("prefix declaration must end with ':'")
        sc.skip_ws()
        prefixes[prefix] = sc.read_iriref()
        sc.skip_ws()

    if not sc.match_keyword("CONSTRUCT"):
        raise sc.error("expected CONSTRUCT")
    sc.skip_ws()
    sc.expect("{")
    template, _ = _parse_triples_block(sc, prefixes, allow_binds=False)
    sc.skip_ws()
    if not sc.match_keyword("WHERE"):
        raise sc.error("expected WHERE")
    sc.skip_ws()
    sc.expect("{")
    where, binds = _parse_triples_block(sc, prefixes, allow_binds=True)
    sc.skip_ws()
    if not sc.at_end():
        raise sc.error("unexpected content after WHERE block")

    try:
        return MappingRule(
            name=name,
            prefixes=prefixes,
            template=tuple(template),
            where=tuple(where),
            binds=tuple(binds),
        )
    except ValueError as exc:
        raise RuleParseError(str(exc), sc.line, sc.column) from None


def _parse_triples_block(
    sc: Scanner, prefixes: Mapping[str, str], allow_binds: bool
) -> tuple[list[TriplePattern], list[BindClause]]:
    patterns: list[TriplePattern] = []
    binds: list[BindClause] = []
    while True:
        sc.skip_ws()
        if sc.try_consume("}"):
            return patterns, binds
        if sc.at_end():
            raise sc.error("unterminated block: expected '}'")
        # A prefixed name may start with the same letters as a keyword
        # (e.g. a prefix named "filter"), so only check keywords when the
        # upcoming token cannot be a prefixed name.
        if not sc.looks_like_pname():
            for keyword in _UNSUPPORTED_KEYWORDS:
                if sc.match_keyword(keyword):
                    raise sc.error(f"unsupported feature: {keyword}")
            if sc.peek() == "{":
                raise sc.error("unsupported feature: nested group")
            if sc.match_keyword("BIND"):
                if not allow_binds:
                    raise sc.error("BIND is only allowed in the WHERE block")
                binds.append(_parse_bind(sc, prefixes))
                sc.skip_ws()
                sc.try_consume(".")
                continue
        _parse_subject_block(sc, prefixes, patterns)


def _parse_subject_block(
    sc: Scanner, prefixes: Mapping[str, str], patterns: list[TriplePattern]
) -> None:
    subject = _read_pattern_term(sc, prefixes, position="subject")
    while True:
        sc.skip_ws()
        predicate = _read_pattern_term(sc, prefixes, position="predicate")
        _check_no_property_path(sc)
        while True:
            sc.skip_ws()
            obj = _read_pattern_term(sc, prefixes, position="object")
            try:
                patterns.append(TriplePattern(subject, predicate, obj))
            except ValueError as exc:
                raise sc.error(str(exc)) from None
            sc.skip_ws()
            if not sc.try_consume(","):
                break
        if sc.try_consume(";"):
            sc.skip_ws()
            if sc.peek() in ".}":
                break  # tolerate a trailing ';'
            continue
        break
    sc.skip_ws()
    sc.try_consume(".")


def _check_no_property_path(sc: Scanner) -> None:
    if sc.peek() in "/|^*+":
        raise sc.error("unsupported feature: property path")


def _parse_bind(sc: Scanner, prefixes: Mapping[str, str]) -> BindClause:
    sc.skip_ws()
    sc.expect("(")
    expression = _parse_expression(sc, prefixes)
    sc.skip_ws()
    if not sc.match_keyword("AS"):
        raise sc.error("expected AS in BIND")
    sc.skip_ws()
    variable = sc.read_var_name()
    sc.skip_ws()
    sc.expect(")")
    return BindClause(variable=variable, expression=expression)


def _parse_expression(sc: Scanner, prefixes: Mapping[str, str]) -> Expression:
    sc.skip_ws()
    c = sc.peek()
    if c == "?":
        return VariableRef(sc.read_var_name())
    if c == '"':
        return Constant(Literal(sc.read_string()))
    if c == "<":
        return Constant(Iri(sc.read_iriref()))
    name_start = sc.pos
    while sc.peek().isalpha() or sc.peek() == "_":
        sc.advance()
    name = sc.text[name_start : sc.pos].upper()
    if not name:
        raise sc.error("expected expression")
    if name not in FUNCTIONS:
        raise sc.error(f"unknown function name: {sc.text[name_start:sc.pos]}")
    sc.skip_ws()
    sc.expect("(")
    sc.skip_ws()
    args: list[Expression] = []
    if not sc.try_consume(")"):
        args.append(_parse_expression(sc, prefixes))
        sc.skip_ws()
        while sc.try_consume(","):
            args.append(_parse_expression(sc, prefixes))
            sc.skip_ws()
        sc.expect(")")
    try:
        return FnCall(name, tuple(args))
    except ValueError as exc:
        raise sc.error(str(exc)) from None


def _read_pattern_term(
    sc: Scanner, prefixes: Mapping[str, str], position: str
) -> PatternTerm:
    sc.skip_ws()
    c = sc.peek()
    if c == "?":
        return Variable(sc.read_var_name())
    if c == "<":
        try:
            return Iri(sc.read_iriref())
        except ValueError as exc:
            raise sc.error(str(exc)) from None
    if c == "[":
        raise sc.error("unsupported feature: blank node property list")
    if c == "(":
        raise sc.error("unsupported feature: collection")
    if c == "_" and sc.peek(1) == ":":
        return BlankNode(sc.read_bnode_label())
    if c == '"':
        if position != "object":
            raise sc.error(f"literal not allowed in {position} position")
        lexical = sc.read_string()
        if sc.peek() == "@":
            return lang_literal(lexical, sc.read_langtag())
        if sc.try_consume("^^"):
            dt = _read_iri_or_pname(sc, prefixes)
            return Literal(lexical, dt)
        return Literal(lexical)
    if position == "predicate" and c == "a":
        nxt = sc.peek(1)
        if not (nxt.isalnum() or nxt in "_-:"):
            sc.advance()
            return Iri(RDF_TYPE)
    if sc.looks_like_pname():
        return _read_iri_or_pname(sc, prefixes)
    found = c or "end of input"
    raise sc.error(f"expected a term in {position} position, found {found!r}")


def _read_iri_or_pname(sc: Scanner, prefixes: Mapping[str, str]) -> Iri:
    if sc.peek() == "<":
        return Iri(sc.read_iriref())
    prefix, local = sc.read_pname()
    if prefix not in prefixes:
        raise sc.error(f"unknown prefix: {prefix!r}")
    try:
        return Iri(prefixes[prefix] + local)
    except ValueError as exc:
        raise sc.error(str(exc)) from None


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

#: Marker for "this expression did not produce a value" (SPARQL's error /
#: unbound outcome).  Distinct from None so literals are never conflated.
UNBOUND = object()

BindingSet = Mapping[str, Term]


def eval_bgp(graph: Graph, patterns: Iterable[TriplePattern]) -> list[dict[str, Term]]:
    """All solutions of the basic graph pattern over *graph*.

    Natural-join semantics: the empty pattern list has exactly one empty
    solution.  The result is duplicate-free.
    """
    solutions: list[dict[str, Term]] = [{}]
    for pattern in _plan(list(patterns)):
        next_solutions: list[dict[str, Term]] = []
        for binding in solutions:
            s = _resolve(pattern.subject, binding)
            p = _resolve(pattern.predicate, binding)
            o = _resolve(pattern.object, binding)
            for triple in graph.match(
                s if not isinstance(s, Variable) else None,
                p if not isinstance(p, Variable) else None,
                o if not isinstance(o, Variable) else None,
            ):
                extended = _unify(pattern, triple, binding)
                if extended is not None:
                    next_solutions.append(extended)
        solutions = next_solutions
        if not solutions:
            return []
    unique = {frozenset(sol.items()): sol for sol in solutions}
    return list(unique.values())


def _plan(patterns: list[TriplePattern]) -> list[TriplePattern]:
    """Order patterns most-bound-first, counting propagated bindings."""
    remaining = list(patterns)
    ordered: list[TriplePattern] = []
    bound_vars: set[str] = set()
    while remaining:
        def boundness(p: TriplePattern) -> int:
            return sum(
                1
                for t in p.terms()
                if not isinstance(t, Variable) or t.name in bound_vars
            )

        best = max(remaining, key=boundness)
        remaining.remove(best)
        ordered.append(best)
        bound_vars |= best.variables()
    return ordered


def _resolve(term: PatternTerm, binding: BindingSet) -> PatternTerm:
    if isinstance(term, Variable):
        return binding.get(term.name, term)
    return term


def _unify(
    pattern: TriplePattern, triple: Triple, binding: BindingSet
) -> dict[str, Term] | None:
    extended = dict(binding)
    for pattern_term, value in zip(pattern.terms(), (triple.subject, triple.predicate, triple.object)):
        if isinstance(pattern_term, Variable):
            seen = extended.get(pattern_term.name)
            if seen is None:
                extended[pattern_term.name] = value
            elif seen != value:
                return None
        elif pattern_term != value:
            return None
    return extended


def eval_expression(e: Expression, binding: BindingSet):
    """Evaluate to a Term, or UNBOUND on any error (SPARQL BIND semantics)."""
    if isinstance(e, Constant):
        return e.term
    if isinstance(e, VariableRef):
        return binding.get(e.name, UNBOUND)
    values = [eval_expression(arg, binding) for arg in e.args]
    if any(v is UNBOUND for v in values):
        return UNBOUND
    if e.fn == "STR":
        v = values[0]
        if isinstance(v, Iri):
            return Literal(v.value)
        if isinstance(v, Literal):
            return Literal(v.lexical)
        return UNBOUND
    if e.fn == "CONCAT":
        if not all(isinstance(v, Literal) for v in values):
            return UNBOUND
        return Literal("".join(v.lexical for v in values))
    if e.fn == "ENCODE_FOR_URI":
        v = values[0]
        if not isinstance(v, Literal):
            return UNBOUND
        return Literal(encode_for_uri(v.lexical))
    # IRI
    v = values[0]
    if isinstance(v, Iri):
        return v
    if isinstance(v, Literal):
        try:
            return Iri(v.lexical)
        except ValueError:
            return UNBOUND
    return UNBOUND


def apply_rule(graph: Graph, rule: MappingRule) -> Graph:
    """Instantiate the rule's template over every WHERE solution."""
    out: set[Triple] = set()
    for solution in eval_bgp(graph, rule.where):
        extended = dict(solution)
        for bind in rule.binds:
            value = eval_expression(bind.expression, extended)
            if value is not UNBOUND:
                extended[bind.variable] = value
        for pattern in rule.template:
            triple = _instantiate(pattern, extended)
            if triple is not None:
                out.add(triple)
    return Graph(out)


def _instantiate(pattern: TriplePattern, binding: BindingSet) -> Triple | None:
    parts = []
    for term in pattern.terms():
        if isinstance(term, Variable):
            value = binding.get(term.name)
            if value is None:
                return None
            parts.append(value)
        else:
            parts.append(term)
    s, p, o = parts
    if isinstance(s, Literal) or not isinstance(p, Iri):
        return None
    return Triple(s, p, o)


def apply_rule_pack(graph: Graph, rules: Iterable[MappingRule]) -> Graph:
    """Union of every rule's output; rules see only the source graph."""
    out = Graph()
    for rule in rules:
        out = out.union(apply_rule(graph, rule))
    return out


# ---------------------------------------------------------------------------
# The shipped rule pack
# ---------------------------------------------------------------------------

RULE_FILES = ("dataset.rq", "creator.rq", "study.rq", "substance.rq")


@cache
def load_rule_pack() -> tuple[MappingRule, ...]:
    """Parse the packaged rules and check them against the vocabulary."""
    table = load_table()
    rules = []
    for filename in RULE_FILES:
        text = (
            resources.files(__package__)
            .joinpath(f"rules/{filename}")
            .read_text(encoding="utf-8")
        )
        rule = parse_rule(text, name=filename)
        table.require_known(rule.iris(), f"rule {filename}")
        rules.append(rule)
    return tuple(rules)
