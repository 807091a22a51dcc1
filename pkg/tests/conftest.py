"""Shared fixtures: the travel dataset (cities, train connections, three
views), its hand-written city ontology, and the mapped terminology."""

from pathlib import Path

import pytest

from whynot import (
    Schema,
    WhyNotInstance,
    induce_ontology,
    load_instance_dir,
    load_obda_spec,
    load_ontology,
    load_schema,
    parse_query,
)

DATA_DIR = Path(__file__).parent / "data" / "travel"


@pytest.fixture(scope="session")
def travel_schema():
    return load_schema(DATA_DIR / "schema.json")


@pytest.fixture(scope="session")
def travel_instance(travel_schema):
    return load_instance_dir(travel_schema, DATA_DIR / "data")


@pytest.fixture(scope="session")
def views_only_schema(travel_schema):
    return Schema(travel_schema.relations, travel_schema.views)


@pytest.fixture(scope="session")
def ids_only_schema(travel_schema):
    return Schema(travel_schema.relations, travel_schema.ids)


@pytest.fixture(scope="session")
def unconstrained_schema(travel_schema):
    return Schema(travel_schema.relations, ())


@pytest.fixture(scope="session")
def city_ontology(travel_schema):
    return load_ontology(DATA_DIR / "ontology.json", travel_schema)


@pytest.fixture(scope="session")
def city_obda(travel_schema):
    return load_obda_spec(DATA_DIR / "obda.json", travel_schema)


@pytest.fixture(scope="session")
def city_obda_ontology(city_obda):
    return induce_ontology(city_obda)


@pytest.fixture(scope="session")
def two_hop_query():
    return parse_query("q(x, y) :- Train-Connections(x, z), Train-Connections(z, y).")


@pytest.fixture(scope="session")
def amsterdam_newyork(travel_schema, travel_instance, two_hop_query):
    return WhyNotInstance.build(
        travel_schema, travel_instance, two_hop_query, ("Amsterdam", "New York")
    )
