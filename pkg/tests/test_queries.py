import random

import pytest

from whynot import (
    Constant,
    QueryParseError,
    Schema,
    chase_with_ids,
    contains_cq,
    contains_ucq,
    eval_cq,
    eval_ucq,
    parse_query,
    unfold_views,
)
from whynot.constants import labeled_null
from whynot.queries import Atom, Comparison, ConjunctiveQuery, UCQ, Var
from whynot.relational import InclusionDependency, Relation, materialize_views


def row(*values):
    return tuple(Constant.of(v) for v in values)


# -- parsing ------------------------------------------------------------------

def test_parse_round_trip_structure():
    q = parse_query('q(x, y) :- TC(x, z), TC(z, y), y >= 5.')
    assert q.arity == 2
    (d,) = q.disjuncts
    assert [a.relation for a in d.atoms] == ["TC", "TC"]
    assert d.comparisons[0].op == ">="


def test_parse_disjuncts_and_strings():
    q = parse_query('q(x) :- R(x, "Europe") ; S(x), x = "Santa Cruz".')
    assert len(q.disjuncts) == 2
    assert q.disjuncts[1].comparisons[0].constant == Constant.of("Santa Cruz")


def test_parse_anonymous_variables_are_fresh():
    q = parse_query("q(x) :- R(x, _, _).")
    (d,) = q.disjuncts
    anon = [a for a in d.atoms[0].args[1:]]
    assert anon[0] != anon[1]


def test_parse_rejects_unanchored_head():
    with pytest.raises(QueryParseError):
        parse_query("q(x) :- R(y, y).")


def test_parse_rejects_unanchored_comparison():
    with pytest.raises(QueryParseError):
        parse_query("q(x) :- R(x, y), z > 5.")


def test_mixed_arity_union_rejected():
    one = parse_query("q(x) :- R(x, y).").disjuncts[0]
    two = parse_query("q(x, y) :- R(x, y).").disjuncts[0]
    with pytest.raises(QueryParseError):
        UCQ((one, two))


# -- evaluation ---------------------------------------------------------------

def test_two_hop_answers(travel_instance, two_hop_query):
    answers = eval_ucq(two_hop_query, travel_instance.tables)
    assert answers == {
        row("Amsterdam", "Rome"),
        row("Amsterdam", "Amsterdam"),
        row("Berlin", "Berlin"),
        row("New York", "Santa Cruz"),
    }


def test_population_filter(travel_instance):
    q = parse_query("q(x) :- Cities(x, y, z, w), y >= 5000000.")
    assert eval_ucq(q, travel_instance.tables) == {row("New York"), row("Tokyo")}


def test_eval_over_empty_instance(travel_schema, two_hop_query):
    empty = {r.name: frozenset() for r in travel_schema.relations}
    assert eval_ucq(two_hop_query, empty) == set()


def test_constants_in_atoms(travel_instance):
    q = parse_query('q(x) :- Cities(x, y, "USA", w).')
    assert eval_ucq(q, travel_instance.tables) == {
        row("New York"), row("San Francisco"), row("Santa Cruz")
    }


def test_atomless_equality_query(travel_instance):
    q = parse_query('q(x) :- x = "Oslo".')
    assert eval_ucq(q, travel_instance.tables) == {row("Oslo")}


def test_union_is_set_semantics(travel_instance):
    q = parse_query("q(x) :- BigCity(x) ; BigCity(x).")
    assert len(eval_ucq(q, travel_instance.tables)) == 2


# -- view unfolding -------------------------------------------------------------

def test_unfold_single_view(travel_schema, travel_instance):
    q = parse_query("q(x) :- BigCity(x).")
    unfolded = unfold_views(q, travel_schema)
    (d,) = unfolded.disjuncts
    assert [a.relation for a in d.atoms] == ["Cities"]
    assert d.comparisons[0].op == ">="
    assert eval_ucq(unfolded, travel_instance.tables) == eval_ucq(q, travel_instance.tables)


def test_unfold_view_free_query_unchanged(travel_schema):
    q = parse_query("q(x, y) :- Train-Connections(x, y).")
    assert unfold_views(q, travel_schema) == q


def test_unfold_disjunctive_view(travel_schema, travel_instance):
    q = parse_query("q(x, y) :- Reachable(x, y).")
    unfolded = unfold_views(q, travel_schema)
    assert len(unfolded.disjuncts) == 2
    assert all(
        a.relation == "Train-Connections" for d in unfolded.disjuncts for a in d.atoms
    )
    assert eval_ucq(unfolded, travel_instance.tables) == travel_instance.tables["Reachable"]


def _random_base(rng):
    cities = ["a", "b", "c", "d", "e"]
    tc = {
        (rng.choice(cities), rng.choice(cities))
        for _ in range(rng.randint(0, 6))
    }
    rows_cities = {
        (name, rng.randint(1, 10) * 1000000, "x", "y") for name in rng.sample(cities, rng.randint(1, 5))
    }
    return {
        "Cities": {row(*r) for r in rows_cities},
        "Train-Connections": {row(*r) for r in tc},
    }


def test_unfolding_preserves_answers_on_random_instances(travel_schema):
    queries = [
        parse_query("q(x) :- BigCity(x)."),
        parse_query("q(x, y) :- Reachable(x, y)."),
        parse_query("q(x) :- Reachable(x, y), BigCity(y)."),
        parse_query("q(z) :- EuropeanCountry(z) ; Cities(x, y, z, w), y <= 2000000."),
    ]
    rng = random.Random(7)
    for _ in range(40):
        base = _random_base(rng)
        tables = materialize_views(travel_schema, base)
        for q in queries:
            unfolded = unfold_views(q, travel_schema)
            assert not any(
                atom.relation in travel_schema.view_names
                for d in unfolded.disjuncts
                for atom in d.atoms
            )
            assert eval_ucq(unfolded, base | {}) == eval_ucq(q, tables) or eval_ucq(
                unfolded, tables
            ) == eval_ucq(q, tables)


# -- containment ----------------------------------------------------------------

def test_containment_with_comparisons():
    q1 = parse_query("q(x) :- Cities(x, y, z, w), y > 7000000.")
    q2 = parse_query("q(x) :- Cities(x, y, z, w), y >= 5000000.")
    assert contains_ucq(q1, q2)
    assert not contains_ucq(q2, q1)


def test_containment_reflexive(two_hop_query):
    assert contains_ucq(two_hop_query, two_hop_query)


def test_constant_mismatch_breaks_containment():
    q1 = parse_query("q(x) :- Cities(x, y, z, w).")
    q2 = parse_query('q(x) :- Cities(x, y, z, "Europe").')
    assert not contains_ucq(q1, q2)
    assert contains_ucq(q2, q1)


def test_unsatisfiable_disjunct_contained_in_anything():
    q1 = parse_query("q(x) :- R(x, y), y > 5, y < 5.")
    q2 = parse_query("q(x) :- S(x).")
    assert contains_ucq(q1, q2)


def test_equality_collapse_in_containment():
    q1 = parse_query('q(x) :- R(x, y), y = 3.')
    q2 = parse_query('q(x) :- R(x, 3).')
    assert contains_ucq(q1, q2)
    assert contains_ucq(q2, q1)


def _random_cq(rng, max_atoms=2, comparison=False):
    variables = ["x", "y", "z"]
    atoms = []
    for _ in range(rng.randint(1, max_atoms)):
        atoms.append(Atom("R", (Var(rng.choice(variables)), Var(rng.choice(variables)))))
    head_var = rng.choice([v for a in atoms for v in a.args])
    comparisons = ()
    if comparison and rng.random() < 0.5:
        comparisons = (Comparison(rng.choice([v for a in atoms for v in a.args]), rng.choice(["<", ">", "=", "<=", ">="]), Constant.of(rng.randint(1, 3))),)
    return ConjunctiveQuery((head_var,), tuple(atoms), comparisons)


def test_containment_soundness_on_random_instances():
    rng = random.Random(11)
    domain = [Constant.of(i) for i in range(1, 4)]
    pairs_checked = 0
    while pairs_checked < 60:
        q1, q2 = _random_cq(rng, comparison=True), _random_cq(rng, comparison=True)
        if not contains_ucq(UCQ((q1,)), UCQ((q2,))):
            continue
        pairs_checked += 1
        for _ in range(40):
            facts = {
                "R": {
                    (rng.choice(domain), rng.choice(domain))
                    for _ in range(rng.randint(0, 5))
                }
            }
            assert eval_cq(q1, facts) <= eval_cq(q2, facts)


def test_containment_complete_on_comparison_free_queries():
    """Agreement with a brute-force oracle over all small instances."""
    rng = random.Random(13)
    domain = [Constant.of(i) for i in range(1, 4)]
    all_pairs = [(a, b) for a in domain for b in domain]
    import itertools as it

    small_instances = []
    for bits in range(2 ** len(all_pairs)):
        facts = {all_pairs[i] for i in range(len(all_pairs)) if bits & (1 << i)}
        small_instances.append({"R": facts})

    for _ in range(25):
        q1, q2 = _random_cq(rng), _random_cq(rng)
        expected = all(
            eval_cq(q1, inst) <= eval_cq(q2, inst) for inst in small_instances
        )
        assert contains_ucq(UCQ((q1,)), UCQ((q2,))) == expected


# -- chase ------------------------------------------------------------------------

def test_chase_adds_required_tuple(travel_schema):
    facts = {"Train-Connections": {row("a", "b")}}
    result = chase_with_ids(facts, travel_schema.ids, travel_schema)
    cities = result["Cities"]
    names = {r[0] for r in cities}
    assert Constant.of("a") in names and Constant.of("b") in names
    added = next(r for r in cities if r[0] == Constant.of("a"))
    assert all(v.is_null for v in added[1:])


def test_chase_fixpoint_unchanged(travel_schema, travel_instance):
    result = chase_with_ids(travel_instance.tables, travel_schema.ids, travel_schema)
    assert result["Cities"] == set(travel_instance.tables["Cities"])
    assert result["Train-Connections"] == set(travel_instance.tables["Train-Connections"])


def test_chase_through_chain(travel_schema):
    facts = {"BigCity": {row("a")}}
    result = chase_with_ids(facts, travel_schema.ids, travel_schema)
    tc_from = {r[0] for r in result["Train-Connections"]}
    assert Constant.of("a") in tc_from
    assert Constant.of("a") in {r[0] for r in result["Cities"]}


def test_chase_result_satisfies_ids(travel_schema):
    facts = {"Train-Connections": {row("a", "b"), row("b", "c")}, "BigCity": {row("a")}}
    result = chase_with_ids(facts, travel_schema.ids, travel_schema)
    for dep in travel_schema.ids:
        src = travel_schema.relation(dep.from_rel)
        dst = travel_schema.relation(dep.to_rel)
        src_pos = [src.position(a) for a in dep.from_attrs]
        dst_pos = [dst.position(a) for a in dep.to_attrs]
        projected = {tuple(r[p] for p in src_pos) for r in result[dep.from_rel]}
        targets = {tuple(r[p] for p in dst_pos) for r in result[dep.to_rel]}
        assert projected <= targets
