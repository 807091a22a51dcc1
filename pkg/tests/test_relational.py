import pytest

from whynot import (
    Constant,
    ConstraintViolationError,
    Instance,
    Schema,
    SchemaError,
    load_schema,
    materialize_views,
    validate_constraints,
)
from whynot.relational import Relation, parse_csv


def c(value):
    return Constant.of(value)


def row(*values):
    return tuple(Constant.of(v) for v in values)


# -- schema loading ---------------------------------------------------------

def test_travel_schema_shape(travel_schema):
    assert len(travel_schema.relations) == 5
    assert len(travel_schema.constraints) == 7
    assert travel_schema.relation("Cities").arity == 4
    assert travel_schema.view_names == {"BigCity", "EuropeanCountry", "Reachable"}
    assert set(travel_schema.base_names) == {"Cities", "Train-Connections"}


def test_schema_without_constraints():
    schema = load_schema({"relations": {"R": ["a", "b"]}})
    assert schema.constraints == ()


def test_cyclic_views_rejected():
    doc = {
        "relations": {"R": ["a"], "A": ["a"], "B": ["a"]},
        "views": [
            {"rel": "A", "body": "q(x) :- B(x)."},
            {"rel": "B", "body": "q(x) :- A(x)."},
        ],
    }
    with pytest.raises(SchemaError, match="cyclic view dependency"):
        load_schema(doc)


def test_constraint_referencing_unknown_attribute():
    doc = {
        "relations": {"R": ["a"]},
        "fds": [{"rel": "R", "lhs": ["a"], "rhs": ["b"]}],
    }
    with pytest.raises(SchemaError):
        load_schema(doc)


# -- CSV ingestion ----------------------------------------------------------

def test_parse_csv_strips_thousands_separators():
    relation = Relation("Cities", ("name", "population", "country", "continent"))
    rows = parse_csv('name,population,country,continent\nTokyo,"13,185,000",Japan,Asia\n', relation)
    assert row("Tokyo", 13185000, "Japan", "Asia") in rows


def test_parse_csv_reorders_permuted_header():
    relation = Relation("R", ("a", "b"))
    rows = parse_csv("b,a\n2,1\n", relation)
    assert rows == frozenset({row(1, 2)})


def test_parse_csv_rejects_wrong_header():
    relation = Relation("R", ("a", "b"))
    with pytest.raises(SchemaError):
        parse_csv("a,c\n1,2\n", relation)


# -- instance loading and validation ---------------------------------------

def test_travel_instance_sizes(travel_instance):
    assert travel_instance.size("Cities") == 8
    assert travel_instance.size("Train-Connections") == 6
    assert travel_instance.size("Reachable") == 10
    assert travel_instance.size("BigCity") == 2


def test_empty_instance_satisfies_everything(travel_schema):
    instance = Instance.build(travel_schema, {})
    assert all(instance.size(r.name) == 0 for r in travel_schema.relations)


def test_fd_violation_reported():
    schema = load_schema(
        {
            "relations": {"Cities": ["name", "population", "country", "continent"]},
            "fds": [{"rel": "Cities", "lhs": ["country"], "rhs": ["continent"]}],
        }
    )
    tables = {"Cities": {row("c", 1, "USA", "Europe"), row("d", 2, "USA", "Asia")}}
    with pytest.raises(ConstraintViolationError) as excinfo:
        Instance.build(schema, tables)
    failures = excinfo.value.report.failures
    assert len(failures) == 1
    assert "country" in str(failures[0].constraint)


def test_validate_constraints_all_pass(travel_schema, travel_instance):
    report = validate_constraints(travel_schema, travel_instance.tables)
    assert report.ok
    assert len(report.checks) == 7


def test_view_violation_witness_is_the_removed_tuple(travel_schema, travel_instance):
    tables = dict(travel_instance.tables)
    tables["BigCity"] = tables["BigCity"] - {row("Tokyo")}
    report = validate_constraints(travel_schema, tables)
    failing = [check for check in report.failures]
    assert len(failing) == 1
    assert failing[0].constraint.view == "BigCity"
    assert row("Tokyo") in failing[0].witnesses


def test_id_violation_witness(travel_schema, travel_instance):
    tables = dict(travel_instance.tables)
    tables["Train-Connections"] = tables["Train-Connections"] | {row("Paris", "Rome")}
    report = validate_constraints(travel_schema, tables)
    bad = [
        check
        for check in report.failures
        if getattr(check.constraint, "from_rel", None) == "Train-Connections"
        and check.constraint.from_attrs == ("city_from",)
    ]
    assert len(bad) == 1
    assert row("Paris", "Rome") in bad[0].witnesses


# -- view materialization ---------------------------------------------------

def test_materialize_views_from_base(travel_schema, travel_instance):
    base = {name: travel_instance.tables[name] for name in travel_schema.base_names}
    tables = materialize_views(travel_schema, base)
    assert tables["BigCity"] == frozenset({row("New York"), row("Tokyo")})
    assert len(tables["Reachable"]) == 10
    assert row("Amsterdam", "Rome") in tables["Reachable"]


def test_materialize_views_is_idempotent(travel_schema, travel_instance):
    once = materialize_views(travel_schema, travel_instance.tables)
    twice = materialize_views(travel_schema, once)
    assert once == twice


def test_materialize_views_empty_base(travel_schema):
    tables = materialize_views(travel_schema, {"Cities": set(), "Train-Connections": set()})
    assert tables["Reachable"] == frozenset()


def test_absent_views_are_materialized(travel_schema, travel_instance):
    base = {name: travel_instance.tables[name] for name in travel_schema.base_names}
    instance = Instance.build(travel_schema, base)
    assert instance.tables["Reachable"] == travel_instance.tables["Reachable"]


def test_active_domain(travel_instance):
    domain = travel_instance.active_domain
    assert c("Amsterdam") in domain
    assert c(779808) in domain
    assert len(domain) == 24
