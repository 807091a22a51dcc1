import random

import pytest

from whynot import (
    ALL_CONSTANTS,
    Concept,
    Constant,
    Fragment,
    Nominal,
    Projection,
    QueryParseError,
    SelectionCondition,
    TOP,
    Top,
    UnsupportedConstraintClassError,
    enumerate_concepts,
    eval_ucq,
    extension,
    minimize_irredundant,
    parse_concept,
    subsumed_by_instance,
    subsumed_by_schema,
)
from whynot.concepts import concept_to_query, iter_conjunctions


def c(value):
    return Constant.of(value)


def cs(*values):
    return frozenset(Constant.of(v) for v in values)


def sel(attr, op, value):
    return SelectionCondition(attr, op, Constant.of(value))


# -- parsing and canonical form ------------------------------------------------

def test_parse_projection_with_selection(travel_schema):
    concept = parse_concept('Cities[continent="Europe"].name', travel_schema)
    assert concept == Concept.of(Projection("Cities", "name", (sel("continent", "=", "Europe"),)))


def test_parse_top_and_nominal(travel_schema):
    assert parse_concept("T", travel_schema) == TOP
    assert parse_concept("{Santa Cruz}", travel_schema) == Concept.of(Nominal(c("Santa Cruz")))


def test_parse_conjunction_and_render_round_trip(travel_schema):
    text = 'BigCity.name & Cities[population>=1000000].name'
    concept = parse_concept(text, travel_schema)
    assert parse_concept(str(concept), travel_schema) == concept


def test_parse_unknown_attribute_rejected(travel_schema):
    with pytest.raises(Exception):
        parse_concept("Cities.mayor", travel_schema)
    with pytest.raises(QueryParseError):
        parse_concept("Cities.name &", travel_schema)


def test_canonical_form_dedups_and_drops_top(travel_schema):
    a = parse_concept("T & BigCity.name & BigCity.name", travel_schema)
    assert a == Concept.of(Projection("BigCity", "name"))
    assert Concept.of(Top(), Top()) == TOP


# -- extensions ------------------------------------------------------------------

def test_extension_selection(travel_instance):
    concept = Concept.of(Projection("Cities", "name", (sel("continent", "=", "Europe"),)))
    assert extension(concept, travel_instance) == cs("Amsterdam", "Berlin", "Rome")


def test_extension_top_is_symbolic(travel_instance):
    assert extension(TOP, travel_instance) is ALL_CONSTANTS


def test_extension_three_way_conjunction(travel_instance):
    concept = Concept.of(
        Projection("Cities", "name"),
        Projection("Train-Connections", "city_from"),
        Projection("Reachable", "city_from"),
    )
    assert extension(concept, travel_instance) == cs(
        "Amsterdam", "Berlin", "New York", "San Francisco", "Tokyo"
    )


def test_extension_agrees_with_query(travel_schema, travel_instance):
    concepts = [
        parse_concept('Cities[population>7000000].name', travel_schema),
        parse_concept('Reachable[city_from="Berlin"].city_to', travel_schema),
        parse_concept('{Amsterdam} & Cities.name', travel_schema),
        parse_concept('BigCity.name & Cities[continent="Asia"].name', travel_schema),
    ]
    for concept in concepts:
        query = concept_to_query(concept, travel_schema)
        via_query = {row[0] for row in eval_ucq(query, travel_instance.tables)}
        assert via_query == extension(concept, travel_instance)


# -- subsumption w.r.t. the instance ---------------------------------------------

def test_instance_subsumption_between_selections(travel_schema, travel_instance):
    sub = parse_concept('Reachable[city_from="Amsterdam"].city_to', travel_schema)
    sup = parse_concept('Reachable[city_from="Berlin"].city_to', travel_schema)
    assert subsumed_by_instance(sub, sup, travel_instance)


def test_instance_subsumption_reflexive(travel_schema, travel_instance):
    concept = parse_concept("Cities.name", travel_schema)
    assert subsumed_by_instance(concept, concept, travel_instance)


def test_instance_subsumption_cardinality(travel_schema, travel_instance):
    big = parse_concept("Cities.name", travel_schema)
    small = parse_concept("{Amsterdam}", travel_schema)
    assert not subsumed_by_instance(big, small, travel_instance)
    assert subsumed_by_instance(small, big, travel_instance)
    assert subsumed_by_instance(big, TOP, travel_instance)
    assert not subsumed_by_instance(TOP, big, travel_instance)


# -- subsumption w.r.t. the schema ------------------------------------------------

def test_schema_subsumption_via_views(views_only_schema):
    sub = parse_concept("Cities[population>7000000].name", views_only_schema)
    sup = parse_concept("BigCity.name", views_only_schema)
    assert subsumed_by_schema(sub, sup, views_only_schema)
    assert not subsumed_by_schema(sup, sub, views_only_schema)


def test_schema_subsumption_via_ids(ids_only_schema):
    sub = parse_concept("Train-Connections.city_from", ids_only_schema)
    sup = parse_concept("Cities.name", ids_only_schema)
    assert subsumed_by_schema(sub, sup, ids_only_schema)
    assert not subsumed_by_schema(sup, sub, ids_only_schema)


def test_schema_subsumption_negative_case(views_only_schema):
    sub = parse_concept("Cities.name", views_only_schema)
    sup = parse_concept('Cities[continent="Europe"].name', views_only_schema)
    assert not subsumed_by_schema(sub, sup, views_only_schema)
    assert subsumed_by_schema(sup, sub, views_only_schema)


def test_schema_subsumption_rejects_fds(travel_schema):
    a = parse_concept("Cities.name", travel_schema)
    with pytest.raises(UnsupportedConstraintClassError):
        subsumed_by_schema(a, a, travel_schema)


def test_schema_subsumption_ids_rejects_selections(ids_only_schema):
    a = parse_concept('Cities[continent="Europe"].name', ids_only_schema)
    with pytest.raises(UnsupportedConstraintClassError):
        subsumed_by_schema(a, a, ids_only_schema)


def test_schema_subsumption_nominals(views_only_schema, ids_only_schema):
    nom = parse_concept("{Amsterdam}", views_only_schema)
    other = parse_concept("{Berlin}", views_only_schema)
    cities = parse_concept("Cities.name", views_only_schema)
    for schema in (views_only_schema, ids_only_schema):
        assert subsumed_by_schema(nom, TOP, schema)
        assert subsumed_by_schema(nom, nom, schema)
        assert not subsumed_by_schema(nom, other, schema)
        assert not subsumed_by_schema(nom, cities, schema)
        assert not subsumed_by_schema(cities, nom, schema)


def test_schema_subsumption_implies_instance_subsumption(views_only_schema, travel_instance):
    pairs = [
        ("Cities[population>7000000].name", "BigCity.name"),
        ('Cities[continent="Europe"].name', "Cities.name"),
        ("BigCity.name", "Cities.name"),
    ]
    for sub_text, sup_text in pairs:
        sub = parse_concept(sub_text, views_only_schema)
        sup = parse_concept(sup_text, views_only_schema)
        if subsumed_by_schema(sub, sup, views_only_schema):
            assert subsumed_by_instance(sub, sup, travel_instance)


def test_nested_view_subsumption():
    from whynot import load_schema

    schema = load_schema(
        {
            "relations": {"R": ["a", "b"], "V": ["a"], "W": ["a"]},
            "views": [
                {"rel": "V", "body": "q(x) :- R(x, y)."},
                {"rel": "W", "body": "q(x) :- V(x)."},
            ],
        }
    )
    v = parse_concept("W.a", schema)
    r = parse_concept("R.a", schema)
    assert subsumed_by_schema(v, r, schema)
    assert subsumed_by_schema(r, v, schema)


# -- enumeration -------------------------------------------------------------------

def test_minimal_fragment_atomic_count(travel_schema, travel_instance):
    pool = travel_instance.active_domain
    atomics = enumerate_concepts(
        Fragment.MINIMAL, travel_schema, pool, travel_instance, dedup="syntactic"
    )
    # one universal concept, one nominal per pool constant, one projection per attribute
    assert len(atomics) == 1 + len(pool) + 10


def test_selection_free_atomics_containing_berlin(travel_schema, travel_instance):
    pool = travel_instance.active_domain
    atomics = enumerate_concepts(
        Fragment.MINIMAL, travel_schema, pool, travel_instance, dedup="syntactic"
    )
    berlin = c("Berlin")
    containing = {
        str(concept)
        for concept in atomics
        if extension(concept, travel_instance) is ALL_CONSTANTS
        or berlin in extension(concept, travel_instance)
    }
    assert containing == {
        "Cities.name",
        "Train-Connections.city_from",
        "Train-Connections.city_to",
        "Reachable.city_from",
        "Reachable.city_to",
        "{Berlin}",
        "T",
    }


def test_enumerate_unary_relation_empty_pool():
    from whynot import Instance, Schema
    from whynot.relational import Relation

    schema = Schema((Relation("R", ("a",)),))
    instance = Instance.build(schema, {"R": set()})
    atomics = enumerate_concepts(Fragment.MINIMAL, schema, (), instance, dedup="syntactic")
    assert {str(a) for a in atomics} == {"T", "R.a"}


def test_extension_dedup_keeps_canonical_representative(travel_schema, travel_instance):
    pool = travel_instance.active_domain
    deduped = enumerate_concepts(Fragment.MINIMAL, travel_schema, pool, travel_instance)
    extents = [
        frozenset(extension(concept, travel_instance))
        if extension(concept, travel_instance) is not ALL_CONSTANTS
        else "ALL"
        for concept in deduped
    ]
    assert len(extents) == len(set(extents))
    # city_from of Train-Connections and of Reachable coincide on this data
    assert len(deduped) < 1 + len(pool) + 10


def test_full_fragment_realizes_empty_extension():
    from whynot import Instance, Schema
    from whynot.relational import Relation

    schema = Schema((Relation("R", ("a", "b")),))
    instance = Instance.build(
        schema, {"R": {(c("x"), c(1)), (c("y"), c(2)), (c("z"), c(3))}}
    )
    atomics = enumerate_concepts(
        Fragment.FULL, schema, instance.active_domain, instance, dedup="extension"
    )
    assert any(
        extension(concept, instance) is not ALL_CONSTANTS and not extension(concept, instance)
        for concept in atomics
    )
    # every pool constant keeps its nominal, and each projection survives
    texts = {str(concept) for concept in atomics}
    assert "{x}" in texts and "T" in texts


def test_conjunction_iterator_yields_canonical_unique():
    from whynot import Instance, Schema
    from whynot.relational import Relation

    schema = Schema((Relation("R", ("a", "b")),))
    instance = Instance.build(schema, {"R": {(c(1), c(2))}})
    atomics = enumerate_concepts(Fragment.SELECTION_FREE, schema, (), instance, dedup="syntactic")
    projections = [a for a in atomics if a.projections()]
    seen = list(iter_conjunctions(projections, 2))
    assert len(seen) == len(set(seen))
    assert Concept.of(Projection("R", "a"), Projection("R", "b")) in seen


# -- irredundant minimization --------------------------------------------------------

def test_minimize_drops_redundant_conjunct(travel_schema, travel_instance):
    concept = parse_concept('Cities.name & Cities[continent="Europe"].name', travel_schema)
    reduced = minimize_irredundant(concept, travel_instance)
    assert reduced == parse_concept('Cities[continent="Europe"].name', travel_schema)


def test_minimize_single_conjunct_unchanged(travel_schema, travel_instance):
    concept = parse_concept("BigCity.name", travel_schema)
    assert minimize_irredundant(concept, travel_instance) == concept


def test_minimize_keeps_needed_conjuncts(travel_schema, travel_instance):
    concept = parse_concept(
        "Train-Connections.city_from & Train-Connections.city_to", travel_schema
    )
    assert minimize_irredundant(concept, travel_instance) == concept


def test_minimize_is_irredundant_on_random_concepts(travel_schema, travel_instance):
    pool = sorted(travel_instance.active_domain, key=Constant.sort_key)
    atomics = enumerate_concepts(
        Fragment.MINIMAL, travel_schema, pool, travel_instance, dedup="syntactic"
    )
    rng = random.Random(3)
    for _ in range(60):
        parts = rng.sample(atomics, rng.randint(1, 4))
        concept = Concept.of(*(a for part in parts for a in part.conjuncts))
        reduced = minimize_irredundant(concept, travel_instance)
        assert extension(reduced, travel_instance) == extension(concept, travel_instance)
        if len(reduced.conjuncts) > 1:
            for atomic in reduced.conjuncts:
                trimmed = Concept.of(*(a for a in reduced.conjuncts if a != atomic))
                assert extension(trimmed, travel_instance) != extension(reduced, travel_instance)
