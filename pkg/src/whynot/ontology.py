"""The uniform ontology interface and its concrete forms.

An ontology is a triple: a concept universe, a subsumption pre-order, and
an extension function mapping (concept, instance) to a constant set.  The
universe may be a finite list (file-defined or induced from a mapped
terminology) or virtual (concepts derived from the schema or instance, far
too many to list).

Ontology files are JSON::

    {"concepts": ["City", "Dutch-City"],
     "subsumptions": [["Dutch-City", "City"]],
     "ext": {"City": {"list": ["Amsterdam", "Rome"]},
             "Dutch-City": {"query": "q(x) :- Cities(x, y, \"Netherlands\", w)."}}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

from .concepts import (
    Concept,
    Extension,
    Fragment,
    concept_key,
    extension,
    ext_subset,
    is_all,
    subsumed_by_instance,
    subsumed_by_schema,
)
from .constants import Constant
from .errors import QueryParseError, SchemaError
from .queries import UCQ, eval_ucq, parse_query
from .relational import Instance, Schema


class SOntology:
    """Interface: finite or virtual universe, subsumption, extensions."""

    concepts: Sequence | None = None

    def subsumes(self, sub, sup) -> bool:
        raise NotImplementedError

    def ext(self, concept, instance: Instance) -> Extension:
        raise NotImplementedError

    def key(self, concept):
        """Canonical sort key for deterministic iteration and tie-breaks."""
        return str(concept)


@dataclass(frozen=True)
class FiniteOntology(SOntology):
    """Named concepts with an explicitly closed subsumption relation.

    Extensions are either fixed constant lists (independent of the
    instance) or unary queries evaluated against it.
    """

    names: tuple[str, ...]
    closure: frozenset[tuple[str, str]]
    extensions: Mapping[str, Union[frozenset, UCQ]]

    @property
    def concepts(self) -> tuple[str, ...]:  # type: ignore[override]
        return self.names

    @staticmethod
    def create(
        names: Sequence[str],
        subsumptions: Sequence[tuple[str, str]],
        extensions: Mapping[str, Union[frozenset, UCQ]],
    ) -> "FiniteOntology":
        declared = set(names)
        for sub, sup in subsumptions:
            for name in (sub, sup):
                if name not in declared:
                    raise SchemaError(f"subsumption references undeclared concept {name!r}")
        for name in extensions:
            if name not in declared:
                raise SchemaError(f"extension given for undeclared concept {name!r}")
        missing = [name for name in names if name not in extensions]
        if missing:
            raise SchemaError(f"concepts without extensions: {missing}")
        closure = _reflexive_transitive_closure(names, subsumptions)
        return FiniteOntology(tuple(names), closure, dict(extensions))

    def subsumes(self, sub: str, sup: str) -> bool:
        return (sub, sup) in self.closure

    def ext(self, concept: str, instance: Instance) -> Extension:
        definition = self.extensions.get(concept)
        if definition is None:
            raise SchemaError(f"unknown concept {concept!r}")
        if isinstance(definition, UCQ):
            return frozenset(row[0] for row in eval_ucq(definition, instance.tables))
        return definition


def _reflexive_transitive_closure(names: Sequence[str], edges) -> frozenset[tuple[str, str]]:
    reach: dict[str, set[str]] = {name: {name} for name in names}
    adjacency: dict[str, set[str]] = {name: set() for name in names}
    for sub, sup in edges:
        adjacency[sub].add(sup)
    changed = True
    while changed:
        changed = False
        for name in names:
            for mid in list(reach[name]):
                before = len(reach[name])
                reach[name] |= adjacency[mid]
                if len(reach[name]) != before:
                    changed = True
    return frozenset((sub, sup) for sub, targets in reach.items() for sup in targets)


def load_ontology(source: Union[str, Path, Mapping], schema: Schema) -> FiniteOntology:
    """Load a finite ontology file; query extensions are validated against
    the schema and must be unary."""
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        text = path.read_text(encoding="utf-8") if path.exists() else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise QueryParseError(f"ontology source is not valid JSON: {exc}") from exc

    names = list(doc.get("concepts", []))
    subsumptions = [tuple(pair) for pair in doc.get("subsumptions", [])]
    extensions: dict[str, Union[frozenset, UCQ]] = {}
    for name, spec in doc.get("ext", {}).items():
        if "list" in spec:
            extensions[name] = frozenset(Constant.of(v) for v in spec["list"])
        elif "query" in spec:
            query = parse_query(spec["query"])
            if query.arity != 1:
                raise SchemaError(f"extension query for {name!r} must be unary")
            for disjunct in query.disjuncts:
                for atom in disjunct.atoms:
                    if len(atom.args) != schema.arity(atom.relation):
                        raise SchemaError(f"extension query for {name!r} mismatches arity of {atom.relation!r}")
            extensions[name] = query
        else:
            raise QueryParseError(f"extension of {name!r} needs a 'list' or a 'query'")
    return FiniteOntology.create(names, subsumptions, extensions)


@dataclass(frozen=True)
class ConsistencyViolation:
    sub: object
    sup: object
    witness: Constant

    def __str__(self) -> str:
        return f"{self.sub} is subsumed by {self.sup} but {self.witness} is only in the former"


def check_consistency(ontology: SOntology, instance: Instance) -> tuple[bool, list[ConsistencyViolation]]:
    """Every subsumption must be matched by extension inclusion on the
    instance.  Requires a finite universe."""
    if ontology.concepts is None:
        raise ValueError("consistency checking needs a finite concept universe")
    violations: list[ConsistencyViolation] = []
    universe = list(ontology.concepts)
    exts = {concept: ontology.ext(concept, instance) for concept in universe}
    for sub in universe:
        for sup in universe:
            if sub == sup or not ontology.subsumes(sub, sup):
                continue
            if not ext_subset(exts[sub], exts[sup]):
                if is_all(exts[sub]):
                    witness = Constant.of("<every constant>")
                else:
                    witness = min(exts[sub] - exts[sup], key=Constant.sort_key)
                violations.append(ConsistencyViolation(sub, sup, witness))
    return (not violations, violations)


@dataclass(frozen=True, eq=False)
class InstanceOntology(SOntology):
    """Concept-language ontology with subsumption judged on one instance."""

    schema: Schema
    instance: Instance
    fragment: Fragment = Fragment.FULL
    concepts: None = field(default=None, init=False)

    def subsumes(self, sub: Concept, sup: Concept) -> bool:
        return subsumed_by_instance(sub, sup, self.instance)

    def ext(self, concept: Concept, instance: Instance) -> Extension:
        return extension(concept, instance)

    def key(self, concept: Concept):
        return concept_key(concept)


@dataclass(frozen=True, eq=False)
class SchemaOntology(SOntology):
    """Concept-language ontology with subsumption over all valid instances."""

    schema: Schema
    fragment: Fragment = Fragment.SELECTION_FREE
    concepts: None = field(default=None, init=False)

    def subsumes(self, sub: Concept, sup: Concept) -> bool:
        return subsumed_by_schema(sub, sup, self.schema)

    def ext(self, concept: Concept, instance: Instance) -> Extension:
        return extension(concept, instance)

    def key(self, concept: Concept):
        return concept_key(concept)
