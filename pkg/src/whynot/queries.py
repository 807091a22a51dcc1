"""Conjunctive queries with constant comparisons, and the machinery on top:
evaluation, view unfolding, containment, and the inclusion-dependency chase.

Text syntax::

    q(x,y) :- Train-Connections(x,z), Train-Connections(z,y), y >= 5.

Disjuncts of a union share one head and are separated by ``;``.  Unquoted
identifiers in argument positions are variables (``_`` is anonymous);
constants are written as numbers or double-quoted strings.  Comparisons
relate a variable to a constant with one of ``= < > <= >=``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .constants import Constant, constant_sort_key, labeled_null
from .errors import ChaseBoundExceededError, QueryParseError, SchemaError

COMPARISON_OPS = ("<=", ">=", "=", "<", ">")


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Var | Constant


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.relation}({', '.join(_term_text(a) for a in self.args)})"


@dataclass(frozen=True)
class Comparison:
    var: Var
    op: str
    constant: Constant

    def __str__(self) -> str:
        return f"{self.var} {self.op} {_term_text(self.constant)}"


@dataclass(frozen=True)
class ConjunctiveQuery:
    head: tuple[Var, ...]
    atoms: tuple[Atom, ...]
    comparisons: tuple[Comparison, ...] = ()

    def variables(self) -> set[Var]:
        seen: set[Var] = set(self.head)
        for atom in self.atoms:
            seen.update(a for a in atom.args if isinstance(a, Var))
        seen.update(c.var for c in self.comparisons)
        return seen

    def constants(self) -> set[Constant]:
        found = {c.constant for c in self.comparisons}
        for atom in self.atoms:
            found.update(a for a in atom.args if isinstance(a, Constant))
        return found

    def validate(self) -> None:
        """Well-formedness: comparison and head variables must be anchored.

        Every variable in the head or in a comparison has to occur in some
        atom, except in atomless queries where comparisons may only mention
        head variables (the nominal case).
        """
        atom_vars = {a for atom in self.atoms for a in atom.args if isinstance(a, Var)}
        if self.atoms:
            for v in self.head:
                if v not in atom_vars:
                    raise QueryParseError(f"head variable {v} does not occur in the body")
            for comp in self.comparisons:
                if comp.var not in atom_vars and comp.var not in self.head:
                    raise QueryParseError(f"comparison variable {comp.var} does not occur in any atom")
        else:
            head = set(self.head)
            for comp in self.comparisons:
                if comp.var not in head:
                    raise QueryParseError(
                        f"atomless query constrains {comp.var}, which is not a head variable"
                    )

    def __str__(self) -> str:
        body = [str(a) for a in self.atoms] + [str(c) for c in self.comparisons]
        head = f"q({', '.join(str(v) for v in self.head)})"
        return f"{head} :- {', '.join(body)}"


@dataclass(frozen=True)
class UCQ:
    disjuncts: tuple[ConjunctiveQuery, ...]

    def __post_init__(self):
        if not self.disjuncts:
            raise QueryParseError("a union of conjunctive queries needs at least one disjunct")
        arities = {len(d.head) for d in self.disjuncts}
        if len(arities) != 1:
            raise QueryParseError(f"disjuncts disagree on head arity: {sorted(arities)}")

    @property
    def arity(self) -> int:
        return len(self.disjuncts[0].head)

    def __str__(self) -> str:
        return " ; ".join(str(d) for d in self.disjuncts)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<number>-?\d+(?:\.\d+)?)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*)
      | (?P<op><=|>=|:-|[=<>(),;.])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match:
            if text[pos:].strip() == "":
                break
            raise QueryParseError(f"cannot tokenize query text near {text[pos:pos + 20]!r}")
        tokens.append(match.group().strip())
        pos = match.end()
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise QueryParseError("unexpected end of query text")
        self.pos += 1
        return tok

    def expect(self, token: str) -> None:
        tok = self.next()
        if tok != token:
            raise QueryParseError(f"expected {token!r}, found {tok!r}")

    def exhausted(self) -> bool:
        return self.pos >= len(self.tokens)


def _unescape(literal: str) -> str:
    return literal[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def parse_query(text: str) -> UCQ:
    """Parse UCQ text into its AST and validate well-formedness."""
    stream = _TokenStream(_tokenize(text))
    stream.next()  # head predicate name, ignored
    stream.expect("(")
    head: list[Var] = []
    if stream.peek() != ")":
        while True:
            name = stream.next()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", name):
                raise QueryParseError(f"bad head variable {name!r}")
            head.append(Var(name))
            if stream.peek() == ",":
                stream.next()
                continue
            break
    stream.expect(")")
    stream.expect(":-")

    fresh = itertools.count()
    disjuncts = [_parse_disjunct(stream, tuple(head), fresh)]
    while stream.peek() == ";":
        stream.next()
        disjuncts.append(_parse_disjunct(stream, tuple(head), fresh))
    if stream.peek() == ".":
        stream.next()
    if not stream.exhausted():
        raise QueryParseError(f"trailing tokens after query: {stream.peek()!r}")
    query = UCQ(tuple(disjuncts))
    for disjunct in query.disjuncts:
        disjunct.validate()
    return query


def _parse_disjunct(stream: _TokenStream, head: tuple[Var, ...], fresh) -> ConjunctiveQuery:
    atoms: list[Atom] = []
    comparisons: list[Comparison] = []
    while True:
        name = stream.next()
        nxt = stream.peek()
        if nxt == "(":
            stream.next()
            args: list[Term] = []
            if stream.peek() != ")":
                while True:
                    args.append(_parse_term(stream, fresh))
                    if stream.peek() == ",":
                        stream.next()
                        continue
                    break
            stream.expect(")")
            atoms.append(Atom(name, tuple(args)))
        elif nxt in COMPARISON_OPS:
            op = stream.next()
            literal = stream.next()
            comparisons.append(Comparison(Var(name), op, _parse_literal(literal)))
        else:
            raise QueryParseError(f"expected '(' or a comparison after {name!r}")
        if stream.peek() == ",":
            stream.next()
            continue
        break
    return ConjunctiveQuery(head, tuple(atoms), tuple(comparisons))


def _parse_term(stream: _TokenStream, fresh) -> Term:
    token = stream.next()
    if token.startswith('"'):
        return Constant.of(_unescape(token))
    if re.fullmatch(r"-?\d+(?:\.\d+)?", token):
        return Constant.of(token)
    if token == "_":
        return Var(f"_anon{next(fresh)}")
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", token):
        return Var(token)
    raise QueryParseError(f"bad term {token!r}")


def _parse_literal(token: str) -> Constant:
    if token.startswith('"'):
        return Constant.of(_unescape(token))
    if re.fullmatch(r"-?\d+(?:\.\d+)?", token):
        return Constant.of(token)
    raise QueryParseError(f"comparison literal must be a number or quoted string, got {token!r}")


def _term_text(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    if term.is_number:
        return term.text
    escaped = term.text.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


# ---------------------------------------------------------------------------
# Evaluation (active-domain, set semantics)
# ---------------------------------------------------------------------------

Tables = Mapping[str, Iterable[tuple[Constant, ...]]]


def _tables_of(source) -> Tables:
    return getattr(source, "tables", source)


def tables_domain(tables: Tables) -> set[Constant]:
    domain: set[Constant] = set()
    for rows in tables.values():
        for row in rows:
            domain.update(row)
    return domain


def eval_cq(query: ConjunctiveQuery, tables, extra_constants: Iterable[Constant] = ()) -> set[tuple[Constant, ...]]:
    """Answers of one conjunctive query over the given relation contents.

    Head variables that no atom binds (atomless nominal-style queries)
    range over the active domain plus the query's own constants plus
    ``extra_constants``.
    """
    tabs = _tables_of(tables)
    comps_by_var: dict[Var, list[Comparison]] = {}
    for comp in query.comparisons:
        comps_by_var.setdefault(comp.var, []).append(comp)

    def passes(var: Var, value: Constant) -> bool:
        return all(value.satisfies(c.op, c.constant) for c in comps_by_var.get(var, ()))

    ordered = sorted(query.atoms, key=lambda a: len(_rows(tabs, a.relation)))
    bindings: list[dict[Var, Constant]] = [{}]
    for atom in ordered:
        rows = _rows(tabs, atom.relation)
        extended: list[dict[Var, Constant]] = []
        for binding in bindings:
            for row in rows:
                if len(row) != len(atom.args):
                    raise SchemaError(
                        f"arity mismatch: {atom.relation} holds {len(row)}-tuples, atom has {len(atom.args)} arguments"
                    )
                candidate = _unify(atom.args, row, binding, passes)
                if candidate is not None:
                    extended.append(candidate)
        bindings = extended
        if not bindings:
            return set()

    unbound = [v for v in query.head if v not in bindings[0]] if bindings else []
    if unbound:
        pool = tables_domain(tabs) | query.constants() | set(extra_constants)
        ranged: list[dict[Var, Constant]] = []
        for binding in bindings:
            missing = [v for v in query.head if v not in binding]
            for combo in itertools.product(sorted(pool, key=Constant.sort_key), repeat=len(missing)):
                extended = dict(binding)
                ok = True
                for var, value in zip(missing, combo):
                    if not passes(var, value):
                        ok = False
                        break
                    extended[var] = value
                if ok:
                    ranged.append(extended)
        bindings = ranged

    return {tuple(b[v] for v in query.head) for b in bindings}


def _rows(tabs: Tables, relation: str):
    if relation not in tabs:
        raise SchemaError(f"unknown relation {relation!r}")
    return tabs[relation]


def _unify(args, row, binding, passes):
    out = binding
    copied = False
    for term, value in zip(args, row):
        if isinstance(term, Constant):
            if term != value:
                return None
        else:
            bound = out.get(term)
            if bound is None:
                if not passes(term, value):
                    return None
                if not copied:
                    out = dict(out)
                    copied = True
                out[term] = value
            elif bound != value:
                return None
    return out


def eval_ucq(query: UCQ, tables, extra_constants: Iterable[Constant] = ()) -> set[tuple[Constant, ...]]:
    answers: set[tuple[Constant, ...]] = set()
    for disjunct in query.disjuncts:
        answers |= eval_cq(disjunct, tables, extra_constants)
    return answers


# ---------------------------------------------------------------------------
# View unfolding
# ---------------------------------------------------------------------------

def unfold_views(query: UCQ, schema) -> UCQ:
    """Rewrite the query so it only mentions base relations.

    Each view atom is replaced by the disjuncts of its definition with
    quantified variables renamed apart; the replacement distributes over
    conjunction.  Ground comparisons produced by constant arguments are
    evaluated on the spot.
    """
    views = schema.view_definitions()
    counter = itertools.count()
    result: list[ConjunctiveQuery] = []
    seen: set[ConjunctiveQuery] = set()
    for disjunct in query.disjuncts:
        for unfolded in _unfold_cq(disjunct, views, counter):
            if unfolded not in seen:
                seen.add(unfolded)
                result.append(unfolded)
    if not result:
        # Every expansion died on a false ground comparison; keep an
        # unsatisfiable disjunct so the result stays a well-formed union.
        head = query.disjuncts[0].head
        false_c = Constant.of("0")
        anchor = head[0] if head else Var("x")
        result = [ConjunctiveQuery(head, (), (Comparison(anchor, "<", false_c), Comparison(anchor, ">", false_c)))]
    return UCQ(tuple(result))


def _unfold_cq(cq: ConjunctiveQuery, views, counter) -> list[ConjunctiveQuery]:
    for index, atom in enumerate(cq.atoms):
        if atom.relation in views:
            break
    else:
        return [cq]

    view_body = views[atom.relation]
    results: list[ConjunctiveQuery] = []
    for branch in view_body.disjuncts:
        renamed = _rename_apart(branch, counter)
        # Schema loading guarantees distinct head variables per definition.
        substitution: dict[Var, Term] = dict(zip(renamed.head, atom.args))

        new_atoms = list(cq.atoms[:index])
        for batom in renamed.atoms:
            new_atoms.append(Atom(batom.relation, tuple(substitution.get(a, a) if isinstance(a, Var) else a for a in batom.args)))
        new_atoms.extend(cq.atoms[index + 1:])

        new_comparisons = list(cq.comparisons)
        alive = True
        for comp in renamed.comparisons:
            target = substitution.get(comp.var, comp.var)
            if isinstance(target, Constant):
                if not target.satisfies(comp.op, comp.constant):
                    alive = False
                    break
            else:
                new_comparisons.append(Comparison(target, comp.op, comp.constant))
        if not alive:
            continue

        candidate = ConjunctiveQuery(cq.head, tuple(new_atoms), tuple(new_comparisons))
        results.extend(_unfold_cq(candidate, views, counter))
    return results


def _rename_apart(cq: ConjunctiveQuery, counter) -> ConjunctiveQuery:
    mapping = {v: Var(f"u{next(counter)}") for v in sorted(cq.variables(), key=lambda v: v.name)}

    def sub(term: Term) -> Term:
        return mapping[term] if isinstance(term, Var) else term

    return ConjunctiveQuery(
        tuple(mapping[v] for v in cq.head),
        tuple(Atom(a.relation, tuple(sub(t) for t in a.args)) for a in cq.atoms),
        tuple(Comparison(mapping[c.var], c.op, c.constant) for c in cq.comparisons),
    )


# ---------------------------------------------------------------------------
# Containment
# ---------------------------------------------------------------------------
#
# Disjunct-wise canonical-database homomorphism test, extended with interval
# reasoning for variable-vs-constant comparisons over the dense order.  Sound
# in general; complete for comparison-free unions and for the single-relation
# conjunct shapes produced by concept queries.


@dataclass
class _Interval:
    lower: Constant | None = None
    lower_strict: bool = False
    upper: Constant | None = None
    upper_strict: bool = False

    def tighten(self, op: str, bound: Constant) -> None:
        if op in (">", ">="):
            strict = op == ">"
            if self.lower is None or bound.compare(self.lower) > 0 or (
                bound.compare(self.lower) == 0 and strict and not self.lower_strict
            ):
                self.lower, self.lower_strict = bound, strict
        elif op in ("<", "<="):
            strict = op == "<"
            if self.upper is None or bound.compare(self.upper) < 0 or (
                bound.compare(self.upper) == 0 and strict and not self.upper_strict
            ):
                self.upper, self.upper_strict = bound, strict
        else:  # pragma: no cover - equality handled before intervals
            raise ValueError(op)

    def empty(self) -> bool:
        # The order is dense, so an open interval with distinct bounds is
        # always inhabited.
        if self.lower is None or self.upper is None:
            return False
        cmp = self.lower.compare(self.upper)
        if cmp > 0:
            return True
        return cmp == 0 and (self.lower_strict or self.upper_strict)

    def implies(self, op: str, bound: Constant) -> bool:
        if op == "=":
            return (
                self.lower is not None
                and self.upper is not None
                and not self.lower_strict
                and not self.upper_strict
                and self.lower.compare(bound) == 0
                and self.upper.compare(bound) == 0
            )
        if op in ("<", "<="):
            if self.upper is None:
                return False
            cmp = self.upper.compare(bound)
            if op == "<=":
                return cmp <= 0
            return cmp < 0 or (cmp == 0 and self.upper_strict)
        if op in (">", ">="):
            if self.lower is None:
                return False
            cmp = self.lower.compare(bound)
            if op == ">=":
                return cmp >= 0
            return cmp > 0 or (cmp == 0 and self.lower_strict)
        raise ValueError(f"unknown comparison operator {op!r}")


@dataclass(frozen=True)
class _FrozenVar:
    index: int


class _FrozenDisjunct:
    """Canonical database of one disjunct: equalities collapsed, every
    remaining variable carrying its comparison interval."""

    def __init__(self, cq: ConjunctiveQuery):
        self.unsatisfiable = False
        equalities: dict[Var, Constant] = {}
        others: dict[Var, list[Comparison]] = {}
        for comp in cq.comparisons:
            if comp.op == "=":
                pinned = equalities.get(comp.var)
                if pinned is not None and pinned.compare(comp.constant) != 0:
                    self.unsatisfiable = True
                    return
                equalities[comp.var] = comp.constant
            else:
                others.setdefault(comp.var, []).append(comp)

        self.intervals: dict[_FrozenVar, _Interval] = {}
        mapping: dict[Var, Constant | _FrozenVar] = {}
        counter = itertools.count()
        for var in sorted(cq.variables(), key=lambda v: v.name):
            if var in equalities:
                value = equalities[var]
                for comp in others.get(var, ()):
                    if not value.satisfies(comp.op, comp.constant):
                        self.unsatisfiable = True
                        return
                mapping[var] = value
            else:
                frozen = _FrozenVar(next(counter))
                interval = _Interval()
                for comp in others.get(var, ()):
                    interval.tighten(comp.op, comp.constant)
                if interval.empty():
                    self.unsatisfiable = True
                    return
                mapping[var] = frozen
                self.intervals[frozen] = interval

        self.facts: list[tuple[str, tuple]] = [
            (atom.relation, tuple(mapping[a] if isinstance(a, Var) else a for a in atom.args))
            for atom in cq.atoms
        ]
        self.head = tuple(mapping[v] for v in cq.head)

    def element_implies(self, element, op: str, bound: Constant) -> bool:
        if isinstance(element, Constant):
            return element.satisfies(op, bound)
        return self.intervals[element].implies(op, bound)


def contains_cq(sub: ConjunctiveQuery, sup: ConjunctiveQuery) -> bool:
    """Is every answer of ``sub`` an answer of ``sup`` on every instance?"""
    if len(sub.head) != len(sup.head):
        raise ValueError("containment needs equal head arities")
    frozen = _FrozenDisjunct(sub)
    if frozen.unsatisfiable:
        return True
    return _homomorphism(sup, frozen)


def _homomorphism(sup: ConjunctiveQuery, frozen: _FrozenDisjunct) -> bool:
    assignment: dict[Var, object] = {}
    for var, element in zip(sup.head, frozen.head):
        existing = assignment.get(var)
        if existing is not None and existing != element:
            return False
        assignment[var] = element

    comps_by_var: dict[Var, list[Comparison]] = {}
    for comp in sup.comparisons:
        comps_by_var.setdefault(comp.var, []).append(comp)

    def comparisons_ok(var: Var, element) -> bool:
        return all(frozen.element_implies(element, c.op, c.constant) for c in comps_by_var.get(var, ()))

    for var, element in assignment.items():
        if not comparisons_ok(var, element):
            return False

    atoms = list(sup.atoms)

    def search(index: int, assign: dict) -> bool:
        if index == len(atoms):
            # Any supremum variable outside atoms and head would be
            # unanchored; query validation rules those out.
            return True
        atom = atoms[index]
        for rel, elements in frozen.facts:
            if rel != atom.relation or len(elements) != len(atom.args):
                continue
            local = dict(assign)
            ok = True
            for term, element in zip(atom.args, elements):
                if isinstance(term, Constant):
                    if not (isinstance(element, Constant) and term == element):
                        ok = False
                        break
                else:
                    bound = local.get(term)
                    if bound is None:
                        if not comparisons_ok(term, element):
                            ok = False
                            break
                        local[term] = element
                    elif bound != element:
                        ok = False
                        break
            if ok and search(index + 1, local):
                return True
        return False

    return search(0, assignment)


def contains_ucq(sub: UCQ, sup: UCQ) -> bool:
    """Disjunct-wise containment: each branch of ``sub`` must map into some
    branch of ``sup``."""
    if sub.arity != sup.arity:
        raise ValueError("containment needs equal head arities")
    for disjunct in sub.disjuncts:
        frozen = _FrozenDisjunct(disjunct)
        if frozen.unsatisfiable:
            continue
        if not any(_homomorphism(candidate, frozen) for candidate in sup.disjuncts):
            return False
    return True


# ---------------------------------------------------------------------------
# Chase with inclusion dependencies
# ---------------------------------------------------------------------------

def default_chase_bound(schema) -> int:
    max_arity = max((len(r.attributes) for r in schema.relations), default=1)
    return max(1, len(schema.relations) * max_arity)


def chase_with_ids(facts: Tables, ids: Sequence, schema, max_rounds: int | None = None) -> dict[str, set[tuple[Constant, ...]]]:
    """Close a fact set under inclusion dependencies with fresh labeled nulls.

    Runs round-robin over the dependencies until a fixpoint or the round
    bound; on a missed fixpoint the partial result rides along on the
    raised error (every added fact is implied by the input).
    """
    tables: dict[str, set[tuple[Constant, ...]]] = {r.name: set() for r in schema.relations}
    for name, rows in _tables_of(facts).items():
        tables.setdefault(name, set()).update(tuple(row) for row in rows)

    bound = max_rounds if max_rounds is not None else default_chase_bound(schema)
    fresh = itertools.count(1)
    for _ in range(bound):
        changed = False
        for dep in ids:
            source_positions = [schema.relation(dep.from_rel).position(a) for a in dep.from_attrs]
            target_rel = schema.relation(dep.to_rel)
            target_positions = [target_rel.position(a) for a in dep.to_attrs]
            present = {
                tuple(row[p] for p in target_positions)
                for row in tables[dep.to_rel]
            }
            for row in sorted(tables[dep.from_rel], key=constant_sort_key):
                projected = tuple(row[p] for p in source_positions)
                if projected in present:
                    continue
                fresh_row: list[Constant] = [None] * len(target_rel.attributes)  # type: ignore[list-item]
                for position, value in zip(target_positions, projected):
                    fresh_row[position] = value
                for position in range(len(fresh_row)):
                    if fresh_row[position] is None:
                        fresh_row[position] = labeled_null(next(fresh))
                tables[dep.to_rel].add(tuple(fresh_row))
                present.add(projected)
                changed = True
        if not changed:
            return tables
    raise ChaseBoundExceededError(
        f"chase did not converge within {bound} rounds", facts=tables
    )
