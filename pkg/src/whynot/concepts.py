"""Concept language over a relational schema.

A concept is an intersection of atomic pieces: the universal concept ``T``,
nominals ``{c}``, and unary projections of (optionally selected) relations.
Text grammar::

    Concept := Term ('&' Term)*
    Term    := 'T' | '{' constant '}' | rel ['[' cond (',' cond)* ']'] '.' attr
    cond    := attr ('='|'<'|'>'|'<='|'>=') literal

Extensions are evaluated against an instance; the universal concept keeps
the symbolic ``ALL_CONSTANTS`` marker since the constant domain is infinite.
Subsumption comes in two flavors: against one instance (extension
inclusion) and against a schema (containment over all valid instances,
decided for the constraint classes listed at ``subsumed_by_schema``).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union
from weakref import WeakKeyDictionary

from .constants import Constant, labeled_null
from .errors import (
    BudgetExceededError,
    ChaseBoundExceededError,
    QueryParseError,
    SchemaError,
    UnsupportedConstraintClassError,
)
from .queries import (
    UCQ,
    Atom,
    Comparison,
    ConjunctiveQuery,
    Var,
    chase_with_ids,
    contains_ucq,
    eval_cq,
    unfold_views,
)
from .relational import Instance, Schema


class Fragment(str, Enum):
    MINIMAL = "minimal"
    SELECTION_FREE = "selection-free"
    INTERSECTION_FREE = "intersection-free"
    FULL = "full"

    @property
    def allows_selections(self) -> bool:
        return self in (Fragment.INTERSECTION_FREE, Fragment.FULL)

    @property
    def allows_intersections(self) -> bool:
        return self in (Fragment.SELECTION_FREE, Fragment.FULL)


# ---------------------------------------------------------------------------
# Syntax
# ---------------------------------------------------------------------------

class _AllConstants:
    """Symbolic extension of the universal concept."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "AllConstants"


ALL_CONSTANTS = _AllConstants()
Extension = Union[_AllConstants, frozenset]


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "T"


@dataclass(frozen=True)
class Nominal:
    constant: Constant

    def __str__(self) -> str:
        return "{%s}" % self.constant.text


@dataclass(frozen=True)
class SelectionCondition:
    attribute: str
    op: str
    constant: Constant

    def __str__(self) -> str:
        return f"{self.attribute}{self.op}{_literal_text(self.constant)}"


@dataclass(frozen=True)
class Projection:
    relation: str
    attribute: str
    selections: tuple[SelectionCondition, ...] = ()

    def __str__(self) -> str:
        if self.selections:
            conds = ",".join(str(c) for c in self.selections)
            return f"{self.relation}[{conds}].{self.attribute}"
        return f"{self.relation}.{self.attribute}"


AtomicConcept = Union[Top, Nominal, Projection]

_OP_RANK = {"=": 0, "<=": 1, ">=": 2, "<": 3, ">": 4}


def _condition_key(cond: SelectionCondition):
    return (cond.attribute, _OP_RANK[cond.op], cond.constant.sort_key())


def atomic_key(atomic: AtomicConcept):
    if isinstance(atomic, Top):
        return (0,)
    if isinstance(atomic, Nominal):
        return (1, atomic.constant.sort_key())
    return (2, atomic.relation, atomic.attribute, tuple(_condition_key(c) for c in atomic.selections))


@dataclass(frozen=True)
class Concept:
    """Canonical intersection: conjuncts sorted, duplicates removed, the
    universal concept dropped unless it stands alone."""

    conjuncts: tuple[AtomicConcept, ...]

    @staticmethod
    def of(*atomics: AtomicConcept) -> "Concept":
        normalized = []
        for atomic in atomics:
            if isinstance(atomic, Projection) and atomic.selections:
                conds = tuple(sorted(set(atomic.selections), key=_condition_key))
                atomic = Projection(atomic.relation, atomic.attribute, conds)
            normalized.append(atomic)
        kept = sorted(
            {a for a in normalized if not isinstance(a, Top)}, key=atomic_key
        )
        if not kept:
            return Concept((Top(),))
        return Concept(tuple(kept))

    @property
    def is_top(self) -> bool:
        return self.conjuncts == (Top(),)

    @property
    def is_selection_free(self) -> bool:
        return all(
            not (isinstance(a, Projection) and a.selections) for a in self.conjuncts
        )

    @property
    def is_intersection_free(self) -> bool:
        return len(self.conjuncts) == 1

    def in_fragment(self, fragment: Fragment) -> bool:
        if not fragment.allows_selections and not self.is_selection_free:
            return False
        if not fragment.allows_intersections and not self.is_intersection_free:
            return False
        return True

    def nominals(self) -> tuple[Nominal, ...]:
        return tuple(a for a in self.conjuncts if isinstance(a, Nominal))

    def projections(self) -> tuple[Projection, ...]:
        return tuple(a for a in self.conjuncts if isinstance(a, Projection))

    def __str__(self) -> str:
        return " & ".join(str(a) for a in self.conjuncts)


TOP = Concept.of(Top())


def concept_key(concept: Concept):
    return tuple(atomic_key(a) for a in concept.conjuncts)


def concept_length(concept) -> int:
    """Symbol count used by the shortest-explanation variants."""
    if not isinstance(concept, Concept):
        return 1
    total = 0
    for atomic in concept.conjuncts:
        if isinstance(atomic, (Top, Nominal)):
            total += 1
        else:
            total += 2 + 3 * len(atomic.selections)
    return total


def _literal_text(constant: Constant) -> str:
    if constant.is_number:
        return constant.text
    escaped = constant.text.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_CONCEPT_TOKEN = re.compile(
    r"""\s*(?:
        (?P<nominal>\{[^}]*\})
      | (?P<number>-?\d+(?:\.\d+)?)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*)
      | (?P<op><=|>=|[=<>\[\],.&])
    )""",
    re.VERBOSE,
)


def parse_concept(text: str, schema: Schema) -> Concept:
    """Parse concept text, validating relation and attribute references."""
    tokens = []
    pos = 0
    while pos < len(text):
        match = _CONCEPT_TOKEN.match(text, pos)
        if not match:
            if text[pos:].strip() == "":
                break
            raise QueryParseError(f"cannot tokenize concept text near {text[pos:pos + 20]!r}")
        tokens.append(match.group().strip())
        pos = match.end()

    atomics: list[AtomicConcept] = []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token == "T":
            atomics.append(Top())
            i += 1
        elif token.startswith("{"):
            atomics.append(Nominal(Constant.of(token[1:-1].strip())))
            i += 1
        else:
            atomic, i = _parse_projection(tokens, i, schema)
            atomics.append(atomic)
        if i < len(tokens):
            if tokens[i] != "&":
                raise QueryParseError(f"expected '&' between concept terms, found {tokens[i]!r}")
            i += 1
            if i == len(tokens):
                raise QueryParseError("dangling '&' in concept text")
    if not atomics:
        raise QueryParseError("empty concept text")
    return Concept.of(*atomics)


def _parse_projection(tokens, i, schema: Schema):
    name = tokens[i]
    relation = schema.relation(name)
    i += 1
    selections: list[SelectionCondition] = []
    if i < len(tokens) and tokens[i] == "[":
        i += 1
        while True:
            if i + 2 >= len(tokens):
                raise QueryParseError(f"unterminated selection in concept over {name!r}")
            attr, op, literal = tokens[i], tokens[i + 1], tokens[i + 2]
            relation.position(attr)
            if op not in _OP_RANK:
                raise QueryParseError(f"bad selection operator {op!r}")
            if literal.startswith('"'):
                value = Constant.of(literal[1:-1].replace('\\"', '"').replace("\\\\", "\\"))
            elif re.fullmatch(r"-?\d+(?:\.\d+)?", literal):
                value = Constant.of(literal)
            else:
                raise QueryParseError(f"selection literal must be a number or quoted string, got {literal!r}")
            selections.append(SelectionCondition(attr, op, value))
            i += 3
            if tokens[i] == ",":
                i += 1
                continue
            if tokens[i] == "]":
                i += 1
                break
            raise QueryParseError(f"expected ',' or ']' in selection, found {tokens[i]!r}")
    if i >= len(tokens) or tokens[i] != ".":
        raise QueryParseError(f"projection over {name!r} needs '.attribute'")
    i += 1
    if i >= len(tokens):
        raise QueryParseError(f"projection over {name!r} is missing the attribute name")
    attr = tokens[i]
    relation.position(attr)
    return Projection(name, attr, tuple(selections)), i + 1


# ---------------------------------------------------------------------------
# Extension semantics
# ---------------------------------------------------------------------------

_extension_cache: "WeakKeyDictionary[Instance, dict[Concept, Extension]]" = WeakKeyDictionary()


def is_all(ext: Extension) -> bool:
    return ext is ALL_CONSTANTS


def ext_contains(ext: Extension, value: Constant) -> bool:
    return True if is_all(ext) else value in ext


def ext_subset(left: Extension, right: Extension) -> bool:
    if is_all(right):
        return True
    if is_all(left):
        return False
    return left <= right


def ext_intersection(left: Extension, right: Extension) -> Extension:
    if is_all(left):
        return right
    if is_all(right):
        return left
    return left & right


def ext_size(ext: Extension) -> float:
    return float("inf") if is_all(ext) else float(len(ext))


def atomic_extension(atomic: AtomicConcept, instance: Instance) -> Extension:
    if isinstance(atomic, Top):
        return ALL_CONSTANTS
    if isinstance(atomic, Nominal):
        return frozenset({atomic.constant})
    relation = instance.schema.relation(atomic.relation)
    out_pos = relation.position(atomic.attribute)
    conditions = [(relation.position(c.attribute), c.op, c.constant) for c in atomic.selections]
    members = set()
    for row in instance.rows(atomic.relation):
        if all(row[pos].satisfies(op, bound) for pos, op, bound in conditions):
            members.add(row[out_pos])
    return frozenset(members)


def extension(concept: Concept, instance: Instance) -> Extension:
    """Extension of a concept in an instance (memoized per instance)."""
    cache = _extension_cache.setdefault(instance, {})
    cached = cache.get(concept)
    if cached is not None:
        return cached
    result: Extension = ALL_CONSTANTS
    for atomic in concept.conjuncts:
        result = ext_intersection(result, atomic_extension(atomic, instance))
        if not is_all(result) and not result:
            break
    cache[concept] = result
    return result


def subsumed_by_instance(sub: Concept, sup: Concept, instance: Instance) -> bool:
    """Extension inclusion on one instance."""
    return ext_subset(extension(sub, instance), extension(sup, instance))


# ---------------------------------------------------------------------------
# Concepts as queries, and schema-level subsumption
# ---------------------------------------------------------------------------

def concept_to_query(concept: Concept, schema: Schema) -> UCQ:
    """Unary query equivalent to the concept on every instance.

    The universal concept has no query form; callers handle it first.
    Nominal conjuncts become head equalities, so a pure nominal yields an
    atomless query.
    """
    if concept.is_top:
        raise ValueError("the universal concept has no query form")
    head = Var("x")
    atoms: list[Atom] = []
    comparisons: list[Comparison] = []
    for index, atomic in enumerate(concept.conjuncts):
        if isinstance(atomic, Top):
            continue
        if isinstance(atomic, Nominal):
            comparisons.append(Comparison(head, "=", atomic.constant))
            continue
        relation = schema.relation(atomic.relation)
        out_pos = relation.position(atomic.attribute)
        args: list = []
        var_by_pos: dict[int, Var] = {}
        for pos in range(relation.arity):
            if pos == out_pos:
                args.append(head)
            else:
                var = Var(f"v{index}_{pos}")
                var_by_pos[pos] = var
                args.append(var)
        atoms.append(Atom(atomic.relation, tuple(args)))
        for cond in atomic.selections:
            pos = relation.position(cond.attribute)
            var = head if pos == out_pos else var_by_pos[pos]
            comparisons.append(Comparison(var, cond.op, cond.constant))
    return UCQ((ConjunctiveQuery((head,), tuple(atoms), tuple(comparisons)),))


def _classify_constraints(schema: Schema) -> str:
    has_fd = bool(schema.fds)
    has_id = bool(schema.ids)
    has_view = bool(schema.views)
    if has_fd or (has_id and has_view):
        raise UnsupportedConstraintClassError(
            "schema-level subsumption supports empty, views-only, or inclusion-dependencies-only constraint sets",
            constraints=tuple(str(c) for c in schema.constraints),
        )
    if has_id:
        return "ids"
    return "views"


def subsumed_by_schema(sub: Concept, sup: Concept, schema: Schema) -> bool:
    """Containment over all valid instances of the schema.

    Supported constraint classes: no constraints, view definitions only
    (nested, acyclic), and inclusion dependencies only, the latter for
    selection-free concepts.  Anything else raises
    ``UnsupportedConstraintClassError``.
    """
    if sup.is_top:
        return True
    if sub.is_top:
        return False
    kind = _classify_constraints(schema)
    if kind == "views":
        sub_query = unfold_views(concept_to_query(sub, schema), schema)
        sup_query = unfold_views(concept_to_query(sup, schema), schema)
        return contains_ucq(sub_query, sup_query)

    if not (sub.is_selection_free and sup.is_selection_free):
        raise UnsupportedConstraintClassError(
            "with inclusion dependencies only selection-free concepts are decided",
            constraints=tuple(str(c) for c in schema.ids),
        )
    return _subsumed_under_ids(sub, sup, schema)


def _subsumed_under_ids(sub: Concept, sup: Concept, schema: Schema) -> bool:
    # Freeze a single-element canonical database for `sub`, chase it, then
    # ask whether `sup`'s query returns the frozen element (nulls behave as
    # plain constants during evaluation).
    nominals = sub.nominals()
    values = {n.constant for n in nominals}
    if len(values) > 1:
        return True  # two distinct nominals force the empty extension everywhere
    element = next(iter(values)) if values else Constant(text="_:probe", is_null=True)
    fresh = itertools.count(10_000)
    facts: dict[str, set[tuple[Constant, ...]]] = {}
    for proj in sub.projections():
        relation = schema.relation(proj.relation)
        out_pos = relation.position(proj.attribute)
        row = tuple(
            element if pos == out_pos else labeled_null(next(fresh))
            for pos in range(relation.arity)
        )
        facts.setdefault(proj.relation, set()).add(row)

    try:
        chased = chase_with_ids(facts, schema.ids, schema)
    except ChaseBoundExceededError as exc:
        # Positional propagation of the frozen element stabilizes within the
        # round bound, so the partial result decides these queries.
        chased = exc.facts

    query = concept_to_query(sup, schema)
    answers = eval_cq(query.disjuncts[0], chased, extra_constants=(element,))
    return (element,) in answers


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

def column_values(instance: Instance, relation: str, attribute: str) -> list[Constant]:
    position = instance.schema.relation(relation).position(attribute)
    return sorted({row[position] for row in instance.rows(relation)}, key=Constant.sort_key)


def _selection_options(instance: Instance, relation: str, attribute: str, pool: Sequence[Constant]):
    """Per-attribute selection choices: nothing, equalities over the pool,
    thresholds and intervals over pool values present in the column, plus one
    infeasible interval so the empty extension stays expressible."""
    options: list[tuple[SelectionCondition, ...]] = [()]
    in_column = [c for c in column_values(instance, relation, attribute) if c in set(pool)]
    for c in sorted(set(pool), key=Constant.sort_key):
        options.append((SelectionCondition(attribute, "=", c),))
    for c in in_column:
        options.append((SelectionCondition(attribute, ">=", c),))
        options.append((SelectionCondition(attribute, "<=", c),))
    for lo, hi in itertools.combinations(in_column, 2):
        options.append(
            (SelectionCondition(attribute, ">=", lo), SelectionCondition(attribute, "<=", hi))
        )
    if len(in_column) >= 2:
        options.append(
            (SelectionCondition(attribute, ">=", in_column[-1]), SelectionCondition(attribute, "<=", in_column[0]))
        )
    return options


def enumerate_concepts(
    fragment: Fragment,
    schema: Schema,
    pool: Iterable[Constant],
    instance: Instance,
    dedup: str = "extension",
    budget: int | None = None,
) -> list[Concept]:
    """Atomic concepts of the fragment over the constant pool.

    With ``dedup="extension"`` one canonical representative per extension
    survives; ``dedup="syntactic"`` keeps every distinct expression.  The
    companion :func:`iter_conjunctions` yields the intersection closure.
    """
    pool = sorted(set(pool), key=Constant.sort_key)
    atomics: list[Concept] = [TOP]
    atomics.extend(Concept.of(Nominal(c)) for c in pool)
    for relation in schema.relations:
        for attribute in relation.attributes:
            atomics.append(Concept.of(Projection(relation.name, attribute)))
            if fragment.allows_selections:
                per_attr = [
                    _selection_options(instance, relation.name, attr, pool)
                    for attr in relation.attributes
                ]
                for combo in itertools.product(*per_attr):
                    conditions = tuple(itertools.chain.from_iterable(combo))
                    if not conditions:
                        continue
                    atomics.append(
                        Concept.of(Projection(relation.name, attribute, conditions))
                    )
                    if budget is not None and len(atomics) > budget:
                        raise BudgetExceededError(
                            f"concept enumeration exceeded the budget of {budget}"
                        )
    if budget is not None and len(atomics) > budget:
        raise BudgetExceededError(f"concept enumeration exceeded the budget of {budget}")

    if dedup == "syntactic":
        seen: set[Concept] = set()
        unique = []
        for concept in atomics:
            if concept not in seen:
                seen.add(concept)
                unique.append(concept)
        return unique

    by_extension: dict[object, Concept] = {}
    for concept in atomics:
        ext = extension(concept, instance)
        key = "ALL" if is_all(ext) else ext
        incumbent = by_extension.get(key)
        if incumbent is None or concept_key(concept) < concept_key(incumbent):
            by_extension[key] = concept
    return sorted(by_extension.values(), key=concept_key)


def iter_conjunctions(atomics: Sequence[Concept], max_size: int, budget: int | None = None):
    """Intersection closure of the given atomics, sizes 1..max_size, in
    canonical order; yields each canonical concept once."""
    seen: set[Concept] = set()
    emitted = 0
    parts = list(atomics)
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(parts, size):
            conjuncts = [a for concept in combo for a in concept.conjuncts]
            concept = Concept.of(*conjuncts)
            if concept in seen:
                continue
            seen.add(concept)
            emitted += 1
            if budget is not None and emitted > budget:
                raise BudgetExceededError(f"conjunction closure exceeded the budget of {budget}")
            yield concept


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------

def minimize_irredundant(concept: Concept, instance: Instance) -> Concept:
    """Greedy drop of conjuncts whose removal keeps the extension equal.

    The result is equivalent on the instance and irredundant: removing any
    strict subset of the remaining conjuncts changes the extension.
    """
    target = extension(concept, instance)
    kept = list(concept.conjuncts)
    for atomic in sorted(concept.conjuncts, key=atomic_key):
        if len(kept) == 1:
            break
        trial = [a for a in kept if a != atomic]
        if extension(Concept.of(*trial), instance) == target:
            kept = trial
    return Concept.of(*kept)
