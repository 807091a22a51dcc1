"""Why-not questions and the algorithms that answer them.

A why-not question packages a schema, an instance, a query, its computed
answer set, and the missing tuple.  An explanation is a tuple of concepts
that covers the missing tuple componentwise while its extension product
avoids every answer tuple.  Between explanations, componentwise concept
subsumption induces the generality order, and the interesting outputs are
the most general ones.

Three algorithm families live here: exhaustive search over finite concept
universes, incremental search over the concept language of an instance
(driven by least upper bounds of constant sets), and the brute-force
preference variants (shortest, minimized, cardinality-maximal).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .concepts import (
    ALL_CONSTANTS,
    Concept,
    Fragment,
    Nominal,
    Projection,
    SelectionCondition,
    TOP,
    column_values,
    concept_key,
    concept_length,
    enumerate_concepts,
    ext_contains,
    ext_size,
    ext_subset,
    extension,
    is_all,
    iter_conjunctions,
    minimize_irredundant,
    subsumed_by_schema,
)
from .constants import Constant
from .errors import BudgetExceededError, NoExplanationError, TuplePresentError
from .ontology import InstanceOntology, SOntology
from .queries import UCQ, eval_ucq
from .relational import Instance, Schema


@dataclass(frozen=True, eq=False)
class WhyNotInstance:
    """The question: why is `missing` not among the answers of `query`?"""

    schema: Schema
    instance: Instance
    query: UCQ
    answers: frozenset[tuple[Constant, ...]]
    missing: tuple[Constant, ...]

    @classmethod
    def build(
        cls,
        schema: Schema,
        instance: Instance,
        query: UCQ,
        missing: Sequence[Constant],
        answers: frozenset[tuple[Constant, ...]] | None = None,
        verify: bool = True,
    ) -> "WhyNotInstance":
        missing = tuple(Constant.of(v) for v in missing)
        if query.arity != len(missing):
            raise ValueError(
                f"query arity {query.arity} does not match the missing tuple of length {len(missing)}"
            )
        if query.arity == 0:
            raise ValueError("the missing tuple must have at least one position")
        if answers is None:
            answers = frozenset(eval_ucq(query, instance.tables))
        elif verify:
            recomputed = frozenset(eval_ucq(query, instance.tables))
            if recomputed != answers:
                raise ValueError("supplied answer set does not match the evaluated query")
        if missing in answers:
            raise TuplePresentError(
                f"({', '.join(str(v) for v in missing)}) is present in the answer set"
            )
        return cls(schema, instance, query, frozenset(answers), missing)

    @property
    def arity(self) -> int:
        return len(self.missing)

    def constant_pool(self) -> frozenset[Constant]:
        return self.instance.active_domain | set(self.missing)


@dataclass(frozen=True)
class Explanation:
    concepts: tuple

    def __post_init__(self):
        if not self.concepts:
            raise ValueError("an explanation needs at least one concept")

    def __len__(self) -> int:
        return len(self.concepts)

    def __iter__(self):
        return iter(self.concepts)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.concepts) + ")"

    def replaced(self, position: int, concept) -> "Explanation":
        parts = list(self.concepts)
        parts[position] = concept
        return Explanation(tuple(parts))


class Generality(Enum):
    LESS = "less"
    GREATER = "greater"
    EQUIVALENT = "equivalent"
    INCOMPARABLE = "incomparable"


def _check_arity(wn: WhyNotInstance, explanation: Explanation) -> None:
    if len(explanation) != wn.arity:
        raise ValueError(
            f"explanation has {len(explanation)} concepts, question has arity {wn.arity}"
        )


def _extensions(explanation: Explanation, ontology: SOntology, instance: Instance):
    return [ontology.ext(concept, instance) for concept in explanation]


def _covers_missing(exts, missing) -> bool:
    return all(ext_contains(ext, value) for ext, value in zip(exts, missing))


def _product_hits_answers(exts, answers) -> bool:
    # The extension product is never materialized; each answer tuple is
    # tested componentwise instead.
    return any(
        all(ext_contains(ext, value) for ext, value in zip(exts, row)) for row in answers
    )


def is_explanation(explanation: Explanation, wn: WhyNotInstance, ontology: SOntology) -> bool:
    """Covers the missing tuple and avoids every answer tuple.

    Assumes the instance is consistent with the ontology, which is the
    framework's standing assumption.
    """
    _check_arity(wn, explanation)
    exts = _extensions(explanation, ontology, wn.instance)
    return _covers_missing(exts, wn.missing) and not _product_hits_answers(exts, wn.answers)


def compare_generality(left: Explanation, right: Explanation, ontology: SOntology) -> Generality:
    if len(left) != len(right):
        raise ValueError("explanations of different arity are not comparable")
    left_le = all(ontology.subsumes(a, b) for a, b in zip(left, right))
    right_le = all(ontology.subsumes(b, a) for a, b in zip(left, right))
    if left_le and right_le:
        return Generality.EQUIVALENT
    if left_le:
        return Generality.LESS
    if right_le:
        return Generality.GREATER
    return Generality.INCOMPARABLE


# ---------------------------------------------------------------------------
# Finite universes: exhaustive search
# ---------------------------------------------------------------------------

def _universe(ontology: SOntology) -> list:
    if ontology.concepts is None:
        raise ValueError("this algorithm needs an ontology with a finite concept universe")
    return list(ontology.concepts)


def candidate_concepts(wn: WhyNotInstance, ontology: SOntology) -> list[list]:
    """Per position, the concepts whose extension covers that component."""
    universe = _universe(ontology)
    exts = {concept: ontology.ext(concept, wn.instance) for concept in universe}
    return [
        [concept for concept in universe if ext_contains(exts[concept], value)]
        for value in wn.missing
    ]


def enumerate_explanations(wn: WhyNotInstance, ontology: SOntology) -> list[Explanation]:
    """Every explanation over the finite universe, in canonical order."""
    per_position = candidate_concepts(wn, ontology)
    exts = {
        concept: ontology.ext(concept, wn.instance)
        for concepts in per_position
        for concept in concepts
    }
    found = []
    for combo in itertools.product(*per_position):
        if not _product_hits_answers([exts[c] for c in combo], wn.answers):
            found.append(Explanation(combo))
    found.sort(key=lambda e: tuple(ontology.key(c) for c in e))
    return found


def exhaustive_mges(wn: WhyNotInstance, ontology: SOntology) -> list[Explanation]:
    """All most-general explanations, one canonical representative per
    equivalence class."""
    explanations = enumerate_explanations(wn, ontology)
    return _prune_to_maximal(explanations, ontology)


def _prune_to_maximal(explanations: Sequence[Explanation], ontology: SOntology) -> list[Explanation]:
    maximal = []
    for candidate in explanations:
        dominated = False
        for other in explanations:
            if other is candidate:
                continue
            relation = compare_generality(candidate, other, ontology)
            if relation is Generality.LESS:
                dominated = True
                break
        if not dominated:
            maximal.append(candidate)
    # Collapse equivalence classes onto their canonical representative.
    kept: list[Explanation] = []
    for candidate in maximal:
        if any(
            compare_generality(candidate, chosen, ontology) is Generality.EQUIVALENT
            for chosen in kept
        ):
            continue
        kept.append(candidate)
    return kept


def exists_explanation(wn: WhyNotInstance, ontology: SOntology) -> bool:
    """Existence over a finite universe, with short-circuiting on the set of
    answer tuples still inside the partial product."""
    if wn.arity == 0:
        return False
    per_position = candidate_concepts(wn, ontology)
    if any(not concepts for concepts in per_position):
        return False
    exts = {
        concept: ontology.ext(concept, wn.instance)
        for concepts in per_position
        for concept in concepts
    }
    answers = list(wn.answers)

    def search(position: int, alive: frozenset[int]) -> bool:
        if not alive:
            return True
        if position == wn.arity:
            return not alive
        for concept in per_position[position]:
            ext = exts[concept]
            narrowed = frozenset(
                i for i in alive if ext_contains(ext, answers[i][position])
            )
            if search(position + 1, narrowed):
                return True
        return False

    return search(0, frozenset(range(len(answers))))


def check_mge(wn: WhyNotInstance, ontology: SOntology, explanation: Explanation) -> bool:
    """Is the tuple an explanation with no strictly more general explanation?

    Replacing one concept by any of its strict generalizations must break
    the explanation; that is sufficient because extensions grow along the
    subsumption order on a consistent instance.
    """
    _check_arity(wn, explanation)
    if not is_explanation(explanation, wn, ontology):
        return False
    universe = _universe(ontology)
    for position, concept in enumerate(explanation.concepts):
        for candidate in universe:
            if not ontology.subsumes(concept, candidate) or ontology.subsumes(candidate, concept):
                continue
            if is_explanation(explanation.replaced(position, candidate), wn, ontology):
                return False
    return True


# ---------------------------------------------------------------------------
# Least upper bounds in the concept language
# ---------------------------------------------------------------------------

def lub_selection_free(instance: Instance, constants: Iterable[Constant]) -> Concept:
    """Smallest selection-free concept whose extension contains the set:
    the intersection of every qualifying atomic projection, the nominal for
    singletons, and the universal concept when nothing qualifies."""
    values = frozenset(constants)
    if not values:
        raise ValueError("least upper bounds need a non-empty constant set")
    conjuncts: list = []
    for relation in instance.schema.relations:
        for attribute in relation.attributes:
            if values <= set(column_values(instance, relation.name, attribute)):
                conjuncts.append(Projection(relation.name, attribute))
    if len(values) == 1:
        conjuncts.append(Nominal(next(iter(values))))
    if not conjuncts:
        return TOP
    return Concept.of(*conjuncts)


def _minimal_boxes(witness_rows: list[list[tuple[Constant, ...]]], budget: int | None):
    """Region-minimal bounding boxes over witness choices.

    Each box is a tuple of per-attribute (lo, hi) pairs.  A box covering one
    witness row per target value is grown value by value; boxes whose region
    contains another surviving box are dropped.
    """

    def merge(box, row):
        return tuple(
            (lo if lo.compare(v) <= 0 else v, hi if hi.compare(v) >= 0 else v)
            for (lo, hi), v in zip(box, row)
        )

    def region_le(inner, outer) -> bool:
        return all(
            o_lo.compare(i_lo) <= 0 and o_hi.compare(i_hi) >= 0
            for (i_lo, i_hi), (o_lo, o_hi) in zip(inner, outer)
        )

    boxes = [tuple((v, v) for v in row) for row in witness_rows[0]]
    for group in witness_rows[1:]:
        grown = {merge(box, row) for box in boxes for row in group}
        if budget is not None and len(grown) > budget:
            raise BudgetExceededError("least-upper-bound box search exceeded its budget")
        boxes = [
            box
            for box in grown
            if not any(other != box and region_le(other, box) for other in grown)
        ]
    return boxes


def lub_with_selections(
    instance: Instance,
    constants: Iterable[Constant],
    pool: Iterable[Constant] | None = None,
    budget: int | None = 100_000,
) -> Concept:
    """Smallest concept with selections whose extension contains the set.

    For each relation and projection attribute, the witness rows of the
    target values span candidate bounding boxes; the extension-minimal ones
    become selection conjuncts.  Every qualifying selection concept contains
    one of these boxes, so the conjunction is the least upper bound.
    """
    values = frozenset(constants)
    if not values:
        raise ValueError("least upper bounds need a non-empty constant set")
    if pool is not None:
        pool_set = frozenset(pool)
        if not (values | instance.active_domain) <= pool_set:
            raise ValueError("the constant pool must cover the target set and the active domain")

    conjuncts: list = []
    ordered_values = sorted(values, key=Constant.sort_key)
    for relation in instance.schema.relations:
        rows = sorted(instance.rows(relation.name), key=lambda r: tuple(v.sort_key() for v in r))
        for attribute in relation.attributes:
            position = relation.position(attribute)
            witness_rows = []
            complete = True
            for value in ordered_values:
                group = [row for row in rows if row[position] == value]
                if not group:
                    complete = False
                    break
                witness_rows.append(group)
            if not complete:
                continue
            boxes = _minimal_boxes(witness_rows, budget)
            projections = [
                _box_projection(instance, relation.name, attribute, box) for box in boxes
            ]
            exts = [extension(Concept.of(p), instance) for p in projections]
            for index, projection in enumerate(projections):
                if any(
                    other != index and exts[other] < exts[index]
                    for other in range(len(projections))
                ):
                    continue  # a strictly tighter box already contributes
                conjuncts.append(projection)
    if len(values) == 1:
        conjuncts.append(Nominal(next(iter(values))))
    if not conjuncts:
        return TOP
    return Concept.of(*conjuncts)


def _box_projection(instance: Instance, relation: str, attribute: str, box) -> Projection:
    rel = instance.schema.relation(relation)
    conditions = []
    for pos, (lo, hi) in enumerate(box):
        attr = rel.attributes[pos]
        column = column_values(instance, relation, attr)
        col_min, col_max = column[0], column[-1]
        if lo.compare(hi) == 0:
            if not (lo.compare(col_min) <= 0 and hi.compare(col_max) >= 0):
                conditions.append(SelectionCondition(attr, "=", lo))
            continue
        if lo.compare(col_min) > 0:
            conditions.append(SelectionCondition(attr, ">=", lo))
        if hi.compare(col_max) < 0:
            conditions.append(SelectionCondition(attr, "<=", hi))
    return Projection(relation, attribute, tuple(conditions))


def _lub_for(fragment: Fragment, instance: Instance, constants, pool, budget=100_000) -> Concept:
    if fragment is Fragment.SELECTION_FREE:
        return lub_selection_free(instance, constants)
    if fragment is Fragment.FULL:
        return lub_with_selections(instance, constants, pool=pool, budget=budget)
    raise ValueError(f"least upper bounds are defined for the selection-free and full fragments, not {fragment.value}")


# ---------------------------------------------------------------------------
# Incremental search over the instance-derived ontology
# ---------------------------------------------------------------------------

def incremental_mge(wn: WhyNotInstance, fragment: Fragment = Fragment.SELECTION_FREE) -> Explanation:
    """Grow a most-general explanation position by position.

    Each position starts from the least upper bound of its missing
    component and absorbs further active-domain constants (in sorted order)
    whenever the widened tuple still avoids the answers.  The visit order is
    fixed, so the output is deterministic; different orders may yield other,
    equally valid most-general explanations.
    """
    instance = wn.instance
    pool = wn.constant_pool()
    supports = [{value} for value in wn.missing]
    concepts = [_lub_for(fragment, instance, support, pool) for support in supports]
    exts = [extension(concept, instance) for concept in concepts]

    domain = sorted(instance.active_domain, key=Constant.sort_key)
    for position in range(wn.arity):
        # The universal concept is the one generalization no widening of a
        # finite support set can reach; probe it first.
        if not is_all(exts[position]):
            trial = exts[:position] + [ALL_CONSTANTS] + exts[position + 1:]
            if not _product_hits_answers(trial, wn.answers):
                concepts[position] = TOP
                exts = trial
                continue
        for constant in domain:
            if ext_contains(exts[position], constant):
                continue
            widened = supports[position] | {constant}
            candidate = _lub_for(fragment, instance, widened, pool)
            trial = exts[:position] + [extension(candidate, instance)] + exts[position + 1:]
            if not _product_hits_answers(trial, wn.answers):
                supports[position] = widened
                concepts[position] = candidate
                exts = trial
    return Explanation(tuple(concepts))


def check_mge_instance(
    wn: WhyNotInstance, explanation: Explanation, fragment: Fragment = Fragment.FULL
) -> bool:
    """Most-general check against the instance-derived ontology.

    Sound and complete for the fragment: a strictly more general
    explanation would contain some constant outside a component's
    extension, and the least upper bound of the widened extension sits
    below that component's generalization, so widening would also have to
    succeed.
    """
    _check_arity(wn, explanation)
    for concept in explanation.concepts:
        if not isinstance(concept, Concept):
            raise ValueError("this check applies to concept-language explanations")
        if not concept.in_fragment(fragment):
            raise ValueError(f"concept {concept} is outside the {fragment.value} fragment")
    ontology = InstanceOntology(wn.schema, wn.instance, fragment)
    if not is_explanation(explanation, wn, ontology):
        return False
    instance = wn.instance
    pool = wn.constant_pool()
    exts = [extension(concept, instance) for concept in explanation.concepts]
    for position, ext in enumerate(exts):
        if is_all(ext):
            continue
        # Widening to the universal concept first: it is the only
        # generalization whose extension exceeds the active domain.
        trial = exts[:position] + [ALL_CONSTANTS] + exts[position + 1:]
        if not _product_hits_answers(trial, wn.answers):
            return False
        base = set(ext)
        for constant in sorted(instance.active_domain - base, key=Constant.sort_key):
            widened = base | {constant}
            candidate = _lub_for(fragment, instance, widened, pool)
            trial = exts[:position] + [extension(candidate, instance)] + exts[position + 1:]
            if _covers_missing(trial, wn.missing) and not _product_hits_answers(trial, wn.answers):
                return False
    return True


# ---------------------------------------------------------------------------
# Schema-derived ontology: materialize and search
# ---------------------------------------------------------------------------

def compute_schema_mges(
    wn: WhyNotInstance,
    fragment: Fragment = Fragment.SELECTION_FREE,
    max_conjuncts: int | None = None,
    budget: int | None = 50_000,
) -> list[Explanation]:
    """Most-general explanations against the schema-derived ontology.

    The fragment universe over the active domain plus the missing
    constants is materialized (syntactic deduplication), then exhaustive
    search runs with schema-level subsumption as the order.  Conjunctions
    carrying nominals or the universal concept are skipped: their
    extensions coincide with the plain nominal's on the instance, so they
    are never most general.
    """
    if fragment not in (Fragment.MINIMAL, Fragment.SELECTION_FREE):
        raise ValueError(
            "schema-level search is limited to the minimal and selection-free fragments"
        )
    schema = wn.schema
    pool = wn.constant_pool()
    atomics = enumerate_concepts(fragment, schema, pool, wn.instance, dedup="syntactic", budget=budget)
    universe = list(atomics)
    if fragment.allows_intersections:
        projections = [c for c in atomics if c.projections() and not c.nominals()]
        width = len(projections) if max_conjuncts is None else max_conjuncts
        for concept in iter_conjunctions(projections, width, budget=budget):
            if not concept.is_intersection_free:
                universe.append(concept)

    exts = {concept: extension(concept, wn.instance) for concept in universe}
    per_position = [
        [concept for concept in universe if ext_contains(exts[concept], value)]
        for value in wn.missing
    ]
    explanations = []
    for combo in itertools.product(*per_position):
        if not _product_hits_answers([exts[c] for c in combo], wn.answers):
            explanations.append(Explanation(combo))
    if budget is not None and len(explanations) > budget:
        raise BudgetExceededError("schema-level search exceeded its budget of explanations")

    # A dominating explanation must dominate at one position with the rest
    # unchanged (extensions grow along the order on a valid instance), so
    # the single-position test decides maximality.
    order = _SchemaOrderCache(schema)
    strict_ups: list[dict[Concept, list[Concept]]] = []
    for position, candidates in enumerate(per_position):
        ups: dict[Concept, list[Concept]] = {}
        for concept in candidates:
            ups[concept] = [
                other
                for other in candidates
                if other != concept
                and order.leq(concept, other)
                and not order.leq(other, concept)
            ]
        strict_ups.append(ups)

    def is_candidate_explanation(combo) -> bool:
        return not _product_hits_answers([exts[c] for c in combo], wn.answers)

    maximal = []
    for candidate in explanations:
        dominated = False
        for position, concept in enumerate(candidate.concepts):
            for upper in strict_ups[position][concept]:
                trial = list(candidate.concepts)
                trial[position] = upper
                if is_candidate_explanation(trial):
                    dominated = True
                    break
            if dominated:
                break
        if not dominated:
            maximal.append(candidate)

    kept: list[Explanation] = []
    for candidate in sorted(maximal, key=lambda e: tuple(concept_key(c) for c in e)):
        if not any(order.equivalent(candidate, chosen) for chosen in kept):
            kept.append(candidate)
    return kept


class _SchemaOrderCache:
    def __init__(self, schema: Schema):
        self.schema = schema
        self._memo: dict[tuple[Concept, Concept], bool] = {}

    def leq(self, sub: Concept, sup: Concept) -> bool:
        key = (sub, sup)
        cached = self._memo.get(key)
        if cached is None:
            cached = subsumed_by_schema(sub, sup, self.schema)
            self._memo[key] = cached
        return cached

    def tuple_leq(self, left: Explanation, right: Explanation) -> bool:
        return all(self.leq(a, b) for a, b in zip(left, right))

    def strictly_less(self, left: Explanation, right: Explanation) -> bool:
        return self.tuple_leq(left, right) and not self.tuple_leq(right, left)

    def equivalent(self, left: Explanation, right: Explanation) -> bool:
        return self.tuple_leq(left, right) and self.tuple_leq(right, left)


# ---------------------------------------------------------------------------
# Preference variants (brute force)
# ---------------------------------------------------------------------------

def explanation_length(explanation: Explanation) -> int:
    return sum(concept_length(concept) for concept in explanation)


def shortest_mge(wn: WhyNotInstance, ontology: SOntology) -> Explanation:
    """A most-general explanation of minimal total symbol length."""
    mges = exhaustive_mges(wn, ontology)
    if not mges:
        raise NoExplanationError("no explanation exists for this question")
    return min(
        mges,
        key=lambda e: (explanation_length(e), tuple(ontology.key(c) for c in e)),
    )


def degree_of_generality(explanation: Explanation, ontology: SOntology, instance: Instance) -> float:
    """Sum of extension cardinalities; the universal concept dominates."""
    return sum(ext_size(ext) for ext in _extensions(explanation, ontology, instance))


def card_maximal_explanation(wn: WhyNotInstance, ontology: SOntology) -> Explanation:
    """An explanation no other explanation beats on degree of generality."""
    best: Explanation | None = None
    best_degree = float("-inf")
    for candidate in enumerate_explanations(wn, ontology):
        degree = degree_of_generality(candidate, ontology, wn.instance)
        if degree > best_degree:
            best, best_degree = candidate, degree
    if best is None:
        raise NoExplanationError("no explanation exists for this question")
    return best


def minimize_equivalent_length(
    explanation: Explanation, instance: Instance, budget: int = 2_000
) -> Explanation:
    """Best-effort shortening that preserves extensions on the instance.

    Each component first drops redundant conjuncts, then a budgeted sweep
    over enumerated concepts looks for a shorter expression with the very
    same extension.
    """
    pool = instance.active_domain
    try:
        candidates = enumerate_concepts(
            Fragment.FULL, instance.schema, pool, instance, dedup="extension", budget=budget
        )
    except BudgetExceededError:
        candidates = enumerate_concepts(
            Fragment.SELECTION_FREE, instance.schema, pool, instance, dedup="extension"
        )
    by_extension: dict[object, Concept] = {}
    for concept in candidates:
        ext = extension(concept, instance)
        key = "ALL" if is_all(ext) else ext
        incumbent = by_extension.get(key)
        if incumbent is None or (
            concept_length(concept),
            concept_key(concept),
        ) < (concept_length(incumbent), concept_key(incumbent)):
            by_extension[key] = concept

    shortened = []
    for concept in explanation.concepts:
        if not isinstance(concept, Concept):
            shortened.append(concept)
            continue
        best = minimize_irredundant(concept, instance)
        ext = extension(concept, instance)
        key = "ALL" if is_all(ext) else ext
        candidate = by_extension.get(key)
        if candidate is not None and concept_length(candidate) < concept_length(best):
            best = candidate
        shortened.append(best)
    return Explanation(tuple(shortened))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def explanation_to_dict(explanation: Explanation, ontology: SOntology, instance: Instance) -> dict:
    concepts = [str(c) for c in explanation.concepts]
    extensions = []
    for concept in explanation.concepts:
        ext = ontology.ext(concept, instance)
        if is_all(ext):
            extensions.append("all-constants")
        else:
            extensions.append(sorted(str(v) for v in ext))
    return {"concepts": concepts, "extensions": extensions}


def mges_to_dict(
    explanations: Sequence[Explanation], ontology: SOntology, instance: Instance
) -> dict:
    generality = []
    for i, left in enumerate(explanations):
        for j, right in enumerate(explanations):
            if i < j:
                generality.append([i, compare_generality(left, right, ontology).value, j])
    return {
        "explanations": [explanation_to_dict(e, ontology, instance) for e in explanations],
        "generality": generality,
    }
