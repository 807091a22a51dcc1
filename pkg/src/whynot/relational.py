"""Relational schema and instance model with ingestion and validation.

Schema files are JSON::

    {"relations": {"Cities": ["name", "population", "country", "continent"]},
     "fds":   [{"rel": "Cities", "lhs": ["country"], "rhs": ["continent"]}],
     "ids":   [{"from": ["BigCity", ["name"]],
                "to":   ["Train-Connections", ["city_from"]]}],
     "views": [{"rel": "BigCity",
                "body": "q(x) :- Cities(x, y, z, w), y >= 5000000."}]}

Data arrives as one CSV per relation, header row naming the attributes.
Values that look numeric (thousands separators allowed) become numbers.
View relations may be supplied (then checked against their definitions)
or omitted (then materialized).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Union

from .constants import Constant
from .errors import ConstraintViolationError, QueryParseError, SchemaError
from .queries import UCQ, eval_ucq, parse_query


@dataclass(frozen=True)
class Relation:
    name: str
    attributes: tuple[str, ...]

    def __post_init__(self):
        if not self.attributes:
            raise SchemaError(f"relation {self.name!r} needs at least one attribute")
        if len(set(self.attributes)) != len(self.attributes):
            raise SchemaError(f"relation {self.name!r} repeats an attribute name")

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def position(self, attribute: str) -> int:
        try:
            return self.attributes.index(attribute)
        except ValueError:
            raise SchemaError(f"relation {self.name!r} has no attribute {attribute!r}") from None


@dataclass(frozen=True)
class FunctionalDependency:
    relation: str
    lhs: tuple[str, ...]
    rhs: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.relation}: {', '.join(self.lhs)} -> {', '.join(self.rhs)}"


@dataclass(frozen=True)
class InclusionDependency:
    from_rel: str
    from_attrs: tuple[str, ...]
    to_rel: str
    to_attrs: tuple[str, ...]

    def __post_init__(self):
        if len(self.from_attrs) != len(self.to_attrs):
            raise SchemaError(f"inclusion dependency {self} relates attribute lists of different lengths")

    def __str__(self) -> str:
        return f"{self.from_rel}[{', '.join(self.from_attrs)}] <= {self.to_rel}[{', '.join(self.to_attrs)}]"


@dataclass(frozen=True)
class ViewDefinition:
    view: str
    body: UCQ

    def __str__(self) -> str:
        return f"{self.view} := {self.body}"


Constraint = Union[FunctionalDependency, InclusionDependency, ViewDefinition]


@dataclass(frozen=True)
class Schema:
    relations: tuple[Relation, ...]
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate relation name in schema")
        self._check_references()
        self._check_views()

    # -- lookups ----------------------------------------------------------

    @cached_property
    def _by_name(self) -> dict[str, Relation]:
        return {r.name: r for r in self.relations}

    def relation(self, name: str) -> Relation:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown relation {name!r}") from None

    def arity(self, name: str) -> int:
        return self.relation(name).arity

    @property
    def fds(self) -> tuple[FunctionalDependency, ...]:
        return tuple(c for c in self.constraints if isinstance(c, FunctionalDependency))

    @property
    def ids(self) -> tuple[InclusionDependency, ...]:
        return tuple(c for c in self.constraints if isinstance(c, InclusionDependency))

    @property
    def views(self) -> tuple[ViewDefinition, ...]:
        return tuple(c for c in self.constraints if isinstance(c, ViewDefinition))

    def view_definitions(self) -> dict[str, UCQ]:
        return {v.view: v.body for v in self.views}

    @property
    def view_names(self) -> frozenset[str]:
        return frozenset(v.view for v in self.views)

    @property
    def base_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.relations if r.name not in self.view_names)

    # -- structural validation --------------------------------------------

    def _check_references(self) -> None:
        for constraint in self.constraints:
            if isinstance(constraint, FunctionalDependency):
                rel = self.relation(constraint.relation)
                for attr in (*constraint.lhs, *constraint.rhs):
                    rel.position(attr)
            elif isinstance(constraint, InclusionDependency):
                for attr in constraint.from_attrs:
                    self.relation(constraint.from_rel).position(attr)
                for attr in constraint.to_attrs:
                    self.relation(constraint.to_rel).position(attr)
            else:
                view = self.relation(constraint.view)
                if constraint.body.arity != view.arity:
                    raise SchemaError(
                        f"view {view.name!r} has arity {view.arity} but its definition has arity {constraint.body.arity}"
                    )
                for disjunct in constraint.body.disjuncts:
                    if len(set(disjunct.head)) != len(disjunct.head):
                        raise SchemaError(f"view {view.name!r} repeats a head variable in its definition")
                    for atom in disjunct.atoms:
                        target = self.relation(atom.relation)
                        if len(atom.args) != target.arity:
                            raise SchemaError(
                                f"atom {atom} in view {view.name!r} does not match the arity of {target.name!r}"
                            )

    def _check_views(self) -> None:
        definitions = {}
        for view in self.views:
            if view.view in definitions:
                raise SchemaError(f"view {view.view!r} has more than one definition")
            definitions[view.view] = view
        # "depends on" edges between view relations must be acyclic.
        graph = {
            name: {
                atom.relation
                for disjunct in view.body.disjuncts
                for atom in disjunct.atoms
                if atom.relation in definitions
            }
            for name, view in definitions.items()
        }
        self._view_order(graph)

    @staticmethod
    def _view_order(graph: Mapping[str, set[str]]) -> list[str]:
        order: list[str] = []
        state: dict[str, int] = {}
        path: list[str] = []

        def visit(node: str) -> None:
            mark = state.get(node, 0)
            if mark == 1:
                cycle = path[path.index(node):] + [node]
                raise SchemaError(f"cyclic view dependency: {' -> '.join(cycle)}")
            if mark == 2:
                return
            state[node] = 1
            path.append(node)
            for dep in sorted(graph[node]):
                visit(dep)
            path.pop()
            state[node] = 2
            order.append(node)

        for node in sorted(graph):
            visit(node)
        return order

    def view_topological_order(self) -> list[str]:
        definitions = self.view_definitions()
        graph = {
            name: {
                atom.relation
                for disjunct in body.disjuncts
                for atom in disjunct.atoms
                if atom.relation in definitions
            }
            for name, body in definitions.items()
        }
        return self._view_order(graph)


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

TableData = Mapping[str, Iterable[tuple[Constant, ...]]]


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable set of facts per relation, constructed through validation.

    Identity-based equality keeps instances usable as cache keys for
    extension memoization.
    """

    schema: Schema
    tables: Mapping[str, frozenset[tuple[Constant, ...]]]
    active_domain: frozenset[Constant] = field(init=False)

    def __post_init__(self):
        domain: set[Constant] = set()
        for rows in self.tables.values():
            for row in rows:
                domain.update(row)
        object.__setattr__(self, "active_domain", frozenset(domain))

    @classmethod
    def build(cls, schema: Schema, tables: TableData, validate: bool = True) -> "Instance":
        """Normalize, complete missing views, check arities and constraints."""
        normalized: dict[str, frozenset[tuple[Constant, ...]]] = {}
        for name, rows in tables.items():
            relation = schema.relation(name)
            frozen = frozenset(tuple(row) for row in rows)
            for row in frozen:
                if len(row) != relation.arity:
                    raise SchemaError(
                        f"tuple {tuple(str(v) for v in row)} has arity {len(row)}, relation {name!r} expects {relation.arity}"
                    )
            normalized[name] = frozen
        for relation in schema.relations:
            if relation.name in normalized:
                continue
            if relation.name in schema.view_names:
                continue  # filled in below
            normalized[relation.name] = frozenset()
        missing_views = [v for v in schema.view_topological_order() if v not in normalized]
        if missing_views:
            materialized = materialize_views(schema, normalized)
            for name in missing_views:
                normalized[name] = materialized[name]
        if validate:
            report = validate_constraints(schema, normalized)
            if not report.ok:
                raise ConstraintViolationError(report.summary(), report=report)
        return cls(schema, normalized)

    def rows(self, relation: str) -> frozenset[tuple[Constant, ...]]:
        if relation not in self.tables:
            raise SchemaError(f"unknown relation {relation!r}")
        return self.tables[relation]

    def size(self, relation: str) -> int:
        return len(self.rows(relation))


# ---------------------------------------------------------------------------
# Constraint validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintCheck:
    constraint: Constraint
    passed: bool
    witnesses: tuple = ()
    detail: str = ""

    def __str__(self) -> str:
        status = "ok" if self.passed else "VIOLATED"
        text = f"[{status}] {self.constraint}"
        if self.detail:
            text += f" ({self.detail})"
        return text


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def ok(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> tuple[ConstraintCheck, ...]:
        return tuple(check for check in self.checks if not check.passed)

    def summary(self) -> str:
        if self.ok:
            return f"all {len(self.checks)} constraints hold"
        lines = [str(check) for check in self.failures]
        return "; ".join(lines)


def validate_constraints(schema: Schema, tables: TableData) -> ValidationReport:
    """Check every declared constraint, reporting witnesses for failures."""
    data = {name: frozenset(tuple(r) for r in rows) for name, rows in tables.items()}
    for relation in schema.relations:
        data.setdefault(relation.name, frozenset())
    checks: list[ConstraintCheck] = []
    for constraint in schema.constraints:
        if isinstance(constraint, FunctionalDependency):
            checks.append(_check_fd(schema, constraint, data))
        elif isinstance(constraint, InclusionDependency):
            checks.append(_check_id(schema, constraint, data))
        else:
            checks.append(_check_view(constraint, data))
    return ValidationReport(tuple(checks))


def _check_fd(schema: Schema, fd: FunctionalDependency, data) -> ConstraintCheck:
    relation = schema.relation(fd.relation)
    lhs = [relation.position(a) for a in fd.lhs]
    rhs = [relation.position(a) for a in fd.rhs]
    seen: dict[tuple, tuple] = {}
    for row in sorted(data[fd.relation], key=lambda r: tuple(v.sort_key() for v in r)):
        key = tuple(row[p] for p in lhs)
        image = tuple(row[p] for p in rhs)
        if key in seen and seen[key][0] != image:
            return ConstraintCheck(
                fd, False, (seen[key][1], row),
                detail=f"rows agree on {fd.lhs} but differ on {fd.rhs}",
            )
        seen.setdefault(key, (image, row))
    return ConstraintCheck(fd, True)


def _check_id(schema: Schema, dep: InclusionDependency, data) -> ConstraintCheck:
    src = schema.relation(dep.from_rel)
    dst = schema.relation(dep.to_rel)
    src_pos = [src.position(a) for a in dep.from_attrs]
    dst_pos = [dst.position(a) for a in dep.to_attrs]
    targets = {tuple(row[p] for p in dst_pos) for row in data[dep.to_rel]}
    missing = [
        row
        for row in sorted(data[dep.from_rel], key=lambda r: tuple(v.sort_key() for v in r))
        if tuple(row[p] for p in src_pos) not in targets
    ]
    if missing:
        return ConstraintCheck(
            dep, False, tuple(missing),
            detail=f"{len(missing)} tuple(s) have no counterpart in {dep.to_rel}",
        )
    return ConstraintCheck(dep, True)


def _check_view(view: ViewDefinition, data) -> ConstraintCheck:
    expected = frozenset(eval_ucq(view.body, data))
    stored = data[view.view]
    if expected == stored:
        return ConstraintCheck(view, True)
    missing = tuple(sorted(expected - stored, key=lambda r: tuple(v.sort_key() for v in r)))
    extra = tuple(sorted(stored - expected, key=lambda r: tuple(v.sort_key() for v in r)))
    detail_parts = []
    if missing:
        detail_parts.append(f"definition derives {len(missing)} tuple(s) absent from the stored view")
    if extra:
        detail_parts.append(f"stored view holds {len(extra)} underivable tuple(s)")
    return ConstraintCheck(view, False, missing + extra, detail="; ".join(detail_parts))


def materialize_views(schema: Schema, base: TableData) -> dict[str, frozenset[tuple[Constant, ...]]]:
    """Evaluate view bodies in dependency order over the base relations."""
    tables: dict[str, frozenset[tuple[Constant, ...]]] = {
        name: frozenset(tuple(r) for r in rows) for name, rows in base.items()
    }
    for relation in schema.relations:
        if relation.name not in schema.view_names:
            tables.setdefault(relation.name, frozenset())
    definitions = schema.view_definitions()
    for view in schema.view_topological_order():
        tables[view] = frozenset(eval_ucq(definitions[view], tables))
    return tables


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_schema(source: Union[str, Path, Mapping]) -> Schema:
    """Load a schema from a JSON file, JSON text, or an already-parsed dict."""
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        if path.exists():
            text = path.read_text(encoding="utf-8")
        else:
            text = str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise QueryParseError(f"schema source is not valid JSON: {exc}") from exc

    try:
        relations = tuple(
            Relation(name, tuple(attrs)) for name, attrs in doc["relations"].items()
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise QueryParseError("schema JSON needs a 'relations' object mapping names to attribute lists") from exc

    constraints: list[Constraint] = []
    for entry in doc.get("fds", []):
        constraints.append(
            FunctionalDependency(entry["rel"], tuple(entry["lhs"]), tuple(entry["rhs"]))
        )
    for entry in doc.get("ids", []):
        (from_rel, from_attrs), (to_rel, to_attrs) = entry["from"], entry["to"]
        constraints.append(
            InclusionDependency(from_rel, tuple(from_attrs), to_rel, tuple(to_attrs))
        )
    for entry in doc.get("views", []):
        constraints.append(ViewDefinition(entry["rel"], parse_query(entry["body"])))
    return Schema(relations, tuple(constraints))


def parse_csv(text: str, relation: Relation) -> frozenset[tuple[Constant, ...]]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        return frozenset()
    header = [cell.strip() for cell in rows[0]]
    if sorted(header) != sorted(relation.attributes):
        raise SchemaError(
            f"CSV header {header} does not match attributes of {relation.name!r}: {list(relation.attributes)}"
        )
    reorder = [header.index(attr) for attr in relation.attributes]
    parsed = set()
    for row in rows[1:]:
        if len(row) != len(header):
            raise SchemaError(f"row {row} in {relation.name!r} has {len(row)} fields, header has {len(header)}")
        parsed.add(tuple(Constant.of(row[i]) for i in reorder))
    return frozenset(parsed)


def load_instance(schema: Schema, sources: Mapping[str, Union[str, Path]], validate: bool = True) -> Instance:
    """Read one CSV per relation (paths or raw CSV text) and build an instance."""
    tables: dict[str, frozenset[tuple[Constant, ...]]] = {}
    for name, source in sources.items():
        relation = schema.relation(name)
        path = Path(source)
        text = path.read_text(encoding="utf-8") if path.exists() else str(source)
        tables[name] = parse_csv(text, relation)
    return Instance.build(schema, tables, validate=validate)


def load_instance_dir(schema: Schema, directory: Union[str, Path], validate: bool = True) -> Instance:
    """Load ``<relation>.csv`` files from a directory; absent views are materialized."""
    directory = Path(directory)
    sources: dict[str, Path] = {}
    for relation in schema.relations:
        candidate = directory / f"{relation.name}.csv"
        if candidate.exists():
            sources[relation.name] = candidate
        elif relation.name not in schema.view_names:
            raise SchemaError(f"no data file for base relation {relation.name!r} in {directory}")
    return load_instance(schema, sources, validate=validate)
