"""Lightweight terminology with inverse roles, GAV mappings, and the
ontology they induce over a relational schema.

Axioms relate basic expressions: atomic concepts ``A``, existential role
projections ``exists R`` / ``exists R-``, and basic roles ``R`` / ``R-``;
the right-hand side may be negated (``!X``).  Mappings send a conjunctive
pattern over the schema to one concept or role fact.  The induced ontology
has the basic concept expressions occurring in the axioms as its universe,
entailed subsumption as its order, and certain membership (computed by
saturating the mapped facts) as its extension function.

Specification files are JSON::

    {"concepts": ["City", "EU-City"],
     "roles": ["connected"],
     "axioms": [{"lhs": "EU-City", "rhs": "City"},
                {"lhs": "EU-City", "rhs": "!N.A.-City"},
                {"lhs": "exists connected-", "rhs": "City"}],
     "mappings": [{"body": "Cities(x, z, w, \"Europe\")", "head": "EU-City(x)"}]}
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence, Union
from weakref import WeakKeyDictionary

import json

from .constants import Constant
from .errors import NoSolutionError, QueryParseError, SchemaError
from .ontology import SOntology
from .queries import ConjunctiveQuery, Var, eval_cq, parse_query
from .relational import Instance, Schema


@dataclass(frozen=True)
class BasicRole:
    name: str
    inverse: bool = False

    def flipped(self) -> "BasicRole":
        return BasicRole(self.name, not self.inverse)

    def __str__(self) -> str:
        return f"{self.name}-" if self.inverse else self.name


@dataclass(frozen=True)
class BasicConcept:
    """Atomic concept, or the domain of a (possibly inverse) role."""

    name: str
    exists: bool = False
    inverse: bool = False

    def __str__(self) -> str:
        if not self.exists:
            return self.name
        suffix = "-" if self.inverse else ""
        return f"exists {self.name}{suffix}"


BasicExpression = Union[BasicConcept, BasicRole]


@dataclass(frozen=True)
class Axiom:
    lhs: BasicExpression
    rhs: BasicExpression
    negated: bool = False

    def __post_init__(self):
        if isinstance(self.lhs, BasicRole) != isinstance(self.rhs, BasicRole):
            raise SchemaError(f"axiom {self} mixes a role with a concept")

    def __str__(self) -> str:
        neg = "!" if self.negated else ""
        return f"{self.lhs} <= {neg}{self.rhs}"


@dataclass(frozen=True)
class TBox:
    concept_names: tuple[str, ...]
    role_names: tuple[str, ...]
    axioms: tuple[Axiom, ...]

    def __post_init__(self):
        concepts = set(self.concept_names)
        roles = set(self.role_names)
        for axiom in self.axioms:
            for side in (axiom.lhs, axiom.rhs):
                if isinstance(side, BasicRole):
                    if side.name not in roles:
                        raise SchemaError(f"axiom {axiom} uses undeclared role {side.name!r}")
                elif side.exists:
                    if side.name not in roles:
                        raise SchemaError(f"axiom {axiom} uses undeclared role {side.name!r}")
                elif side.name not in concepts:
                    raise SchemaError(f"axiom {axiom} uses undeclared concept {side.name!r}")

    # -- closure ------------------------------------------------------------

    @cached_property
    def _role_closure(self) -> frozenset[tuple[BasicRole, BasicRole]]:
        nodes = {BasicRole(n, inv) for n in self.role_names for inv in (False, True)}
        edges: set[tuple[BasicRole, BasicRole]] = set()
        for axiom in self.axioms:
            if isinstance(axiom.lhs, BasicRole) and not axiom.negated:
                edges.add((axiom.lhs, axiom.rhs))
                edges.add((axiom.lhs.flipped(), axiom.rhs.flipped()))
        return _closure(nodes, edges)

    @cached_property
    def _concept_closure(self) -> frozenset[tuple[BasicConcept, BasicConcept]]:
        nodes = set(self.universe()) | {
            BasicConcept(n, exists=True, inverse=inv) for n in self.role_names for inv in (False, True)
        } | {BasicConcept(n) for n in self.concept_names}
        edges: set[tuple[BasicConcept, BasicConcept]] = set()
        for axiom in self.axioms:
            if not isinstance(axiom.lhs, BasicRole) and not axiom.negated:
                edges.add((axiom.lhs, axiom.rhs))
        for sub_role, sup_role in self._role_closure:
            edges.add(
                (
                    BasicConcept(sub_role.name, exists=True, inverse=sub_role.inverse),
                    BasicConcept(sup_role.name, exists=True, inverse=sup_role.inverse),
                )
            )
        return _closure(nodes, edges)

    @cached_property
    def _disjoint_concepts(self) -> frozenset[tuple[BasicConcept, BasicConcept]]:
        pairs: set[tuple[BasicConcept, BasicConcept]] = set()
        for axiom in self.axioms:
            if not isinstance(axiom.lhs, BasicRole) and axiom.negated:
                pairs.add((axiom.lhs, axiom.rhs))
                pairs.add((axiom.rhs, axiom.lhs))
        return frozenset(pairs)

    @cached_property
    def _disjoint_roles(self) -> frozenset[tuple[BasicRole, BasicRole]]:
        pairs: set[tuple[BasicRole, BasicRole]] = set()
        for axiom in self.axioms:
            if isinstance(axiom.lhs, BasicRole) and axiom.negated:
                for lhs, rhs in ((axiom.lhs, axiom.rhs), (axiom.rhs, axiom.lhs)):
                    pairs.add((lhs, rhs))
                    pairs.add((lhs.flipped(), rhs.flipped()))
        return frozenset(pairs)

    @cached_property
    def unsatisfiable_concepts(self) -> frozenset[BasicConcept]:
        """Concepts entailed empty: below two disjoint concepts, or below the
        domain of a role that is below two disjoint roles."""
        closure = self._concept_closure
        above: dict[BasicConcept, set[BasicConcept]] = {}
        for sub, sup in closure:
            above.setdefault(sub, set()).add(sup)
        bad_roles = set()
        role_above: dict[BasicRole, set[BasicRole]] = {}
        for sub, sup in self._role_closure:
            role_above.setdefault(sub, set()).add(sup)
        for role, sups in role_above.items():
            if any((a, b) in self._disjoint_roles for a in sups for b in sups):
                bad_roles.add(role)
        unsat = set()
        for concept, sups in above.items():
            if any((a, b) in self._disjoint_concepts for a in sups for b in sups):
                unsat.add(concept)
                continue
            if any(
                sup.exists and BasicRole(sup.name, sup.inverse) in bad_roles
                for sup in sups
            ):
                unsat.add(concept)
        return frozenset(unsat)

    def universe(self) -> tuple[BasicConcept, ...]:
        """Basic concept expressions occurring syntactically in the axioms."""
        seen: dict[BasicConcept, None] = {}
        for axiom in self.axioms:
            for side in (axiom.lhs, axiom.rhs):
                if isinstance(side, BasicConcept):
                    seen.setdefault(side)
        return tuple(seen)

    def subsumes(self, sub: BasicConcept, sup: BasicConcept) -> bool:
        """Entailed subsumption between basic concept expressions."""
        if sub in self.unsatisfiable_concepts:
            return True
        return (sub, sup) in self._concept_closure


def _closure(nodes, edges):
    reach = {node: {node} for node in nodes}
    adjacency: dict[object, set] = {node: set() for node in nodes}
    for sub, sup in edges:
        adjacency.setdefault(sub, set()).add(sup)
        reach.setdefault(sub, {sub})
        reach.setdefault(sup, {sup})
    changed = True
    while changed:
        changed = False
        for node in reach:
            expanded = set(reach[node])
            for mid in reach[node]:
                expanded |= adjacency.get(mid, set())
            if expanded != reach[node]:
                reach[node] = expanded
                changed = True
    return frozenset((sub, sup) for sub, targets in reach.items() for sup in targets)


def tbox_subsumption(tbox: TBox, sub: BasicConcept, sup: BasicConcept) -> bool:
    return tbox.subsumes(sub, sup)


# ---------------------------------------------------------------------------
# Mappings and specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GAVMapping:
    """One rule: a conjunctive body over the schema feeding a concept or
    role membership fact."""

    body: ConjunctiveQuery
    head_name: str
    head_is_role: bool

    def __str__(self) -> str:
        args = ", ".join(str(v) for v in self.body.head)
        body = ", ".join(
            [str(a) for a in self.body.atoms] + [str(c) for c in self.body.comparisons]
        )
        return f"{body} -> {self.head_name}({args})"


@dataclass(frozen=True, eq=False)
class OBDASpec:
    tbox: TBox
    schema: Schema
    mappings: tuple[GAVMapping, ...]

    def __post_init__(self):
        concepts = set(self.tbox.concept_names)
        roles = set(self.tbox.role_names)
        for mapping in self.mappings:
            expected = roles if mapping.head_is_role else concepts
            if mapping.head_name not in expected:
                raise SchemaError(f"mapping head {mapping.head_name!r} is not declared in the terminology")
            for atom in mapping.body.atoms:
                if len(atom.args) != self.schema.arity(atom.relation):
                    raise SchemaError(f"mapping body atom {atom} mismatches the schema arity")


_HEAD = re.compile(r"^\s*([^\s(]+)\s*\(\s*([A-Za-z_][\w\-]*)\s*(?:,\s*([A-Za-z_][\w\-]*)\s*)?\)\s*$")


def parse_basic_concept(text: str) -> BasicConcept:
    token = text.strip()
    if token.startswith("exists "):
        role = token[len("exists "):].strip()
        inverse = role.endswith("-")
        if inverse:
            role = role[:-1].strip()
        return BasicConcept(role, exists=True, inverse=inverse)
    return BasicConcept(token)


def _parse_axiom_side(text: str, concepts: set[str], roles: set[str]) -> BasicExpression:
    token = text.strip()
    if token.startswith("exists "):
        return parse_basic_concept(token)
    if token.endswith("-") and token[:-1] in roles:
        return BasicRole(token[:-1], inverse=True)
    if token in roles:
        return BasicRole(token)
    return BasicConcept(token)


def load_obda_spec(source: Union[str, Path, Mapping], schema: Schema) -> OBDASpec:
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        text = path.read_text(encoding="utf-8") if path.exists() else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise QueryParseError(f"mapping specification is not valid JSON: {exc}") from exc

    concepts = set(doc.get("concepts", []))
    roles = set(doc.get("roles", []))
    axioms = []
    for entry in doc.get("axioms", []):
        lhs = _parse_axiom_side(entry["lhs"], concepts, roles)
        rhs_text = entry["rhs"].strip()
        negated = rhs_text.startswith("!")
        if negated:
            rhs_text = rhs_text[1:].strip()
        rhs = _parse_axiom_side(rhs_text, concepts, roles)
        axioms.append(Axiom(lhs, rhs, negated))
    tbox = TBox(tuple(sorted(concepts)), tuple(sorted(roles)), tuple(axioms))

    mappings = []
    for entry in doc.get("mappings", []):
        match = _HEAD.match(entry["head"])
        if not match:
            raise QueryParseError(f"bad mapping head {entry['head']!r}")
        head_name, first, second = match.group(1), match.group(2), match.group(3)
        head_is_role = second is not None
        head_vars = f"{first}, {second}" if head_is_role else first
        body = parse_query(f"q({head_vars}) :- {entry['body']}.").disjuncts[0]
        mappings.append(GAVMapping(body, head_name, head_is_role))
    return OBDASpec(tbox, schema, tuple(mappings))


# ---------------------------------------------------------------------------
# Saturation and certain extensions
# ---------------------------------------------------------------------------

@dataclass
class _Saturation:
    members: dict[BasicConcept, frozenset[Constant]]
    pairs: dict[BasicRole, frozenset[tuple[Constant, Constant]]]
    violations: tuple[str, ...]


_saturation_cache: "WeakKeyDictionary[Instance, dict[int, _Saturation]]" = WeakKeyDictionary()


def _saturate(spec: OBDASpec, instance: Instance) -> _Saturation:
    per_instance = _saturation_cache.setdefault(instance, {})
    cached = per_instance.get(id(spec))
    if cached is not None:
        return cached

    concept_members: dict[BasicConcept, set[Constant]] = {}
    role_pairs: dict[str, set[tuple[Constant, Constant]]] = {name: set() for name in spec.tbox.role_names}
    for mapping in spec.mappings:
        answers = eval_cq(mapping.body, instance.tables)
        if mapping.head_is_role:
            role_pairs.setdefault(mapping.head_name, set()).update(
                (row[0], row[1]) for row in answers
            )
        else:
            concept_members.setdefault(BasicConcept(mapping.head_name), set()).update(
                row[0] for row in answers
            )

    # Close role facts under positive role inclusions.
    signed: dict[BasicRole, set[tuple[Constant, Constant]]] = {}
    for name, pairs in role_pairs.items():
        signed[BasicRole(name)] = set(pairs)
        signed[BasicRole(name, inverse=True)] = {(b, a) for a, b in pairs}
    changed = True
    while changed:
        changed = False
        for sub, sup in spec.tbox._role_closure:
            if sub == sup:
                continue
            source = signed.get(sub, set())
            target = signed.setdefault(sup, set())
            before = len(target)
            target |= source
            mirrored = signed.setdefault(sup.flipped(), set())
            mirrored |= {(b, a) for a, b in source}
            if len(target) != before:
                changed = True

    # Role facts feed the existential concepts.
    for role, pairs in signed.items():
        exists = BasicConcept(role.name, exists=True, inverse=role.inverse)
        concept_members.setdefault(exists, set()).update(a for a, _ in pairs)

    # Propagate memberships upward through the concept closure.
    final: dict[BasicConcept, set[Constant]] = {}
    for sub, sup in spec.tbox._concept_closure:
        if sub in concept_members:
            final.setdefault(sup, set()).update(concept_members[sub])
    for concept, base in concept_members.items():
        final.setdefault(concept, set()).update(base)

    violations = []
    for left, right in sorted(spec.tbox._disjoint_concepts, key=lambda p: (str(p[0]), str(p[1]))):
        overlap = final.get(left, set()) & final.get(right, set())
        for witness in sorted(overlap, key=Constant.sort_key):
            violations.append(f"{witness} certainly belongs to both {left} and {right}")
    for left, right in sorted(spec.tbox._disjoint_roles, key=lambda p: (str(p[0]), str(p[1]))):
        overlap = signed.get(left, set()) & signed.get(right, set())
        for a, b in sorted(overlap, key=lambda p: (p[0].sort_key(), p[1].sort_key())):
            violations.append(f"({a}, {b}) certainly belongs to both {left} and {right}")

    result = _Saturation(
        members={c: frozenset(v) for c, v in final.items()},
        pairs={r: frozenset(v) for r, v in signed.items()},
        violations=tuple(dict.fromkeys(violations)),
    )
    per_instance[id(spec)] = result
    return result


def check_solution_exists(spec: OBDASpec, instance: Instance) -> tuple[bool, tuple[str, ...]]:
    """A solution exists exactly when no negative axiom is certainly violated."""
    saturation = _saturate(spec, instance)
    return (not saturation.violations, saturation.violations)


def certain_extension(spec: OBDASpec, instance: Instance, concept: BasicConcept) -> frozenset[Constant]:
    """Constants in the concept under every solution for the instance.

    Axioms pointing into an existential concept mark members without
    inventing witnesses; that is enough because only basic-concept
    membership of named constants is ever queried.
    """
    ok, violations = check_solution_exists(spec, instance)
    if not ok:
        raise NoSolutionError("the instance admits no solution", violations=violations)
    if concept in spec.tbox.unsatisfiable_concepts:
        return frozenset()
    return _saturate(spec, instance).members.get(concept, frozenset())


@dataclass(frozen=True, eq=False)
class InducedOntology(SOntology):
    """Ontology induced by a mapping specification: universe, entailed
    subsumption, certain extensions."""

    spec: OBDASpec
    concepts: tuple[BasicConcept, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "concepts", self.spec.tbox.universe())

    def subsumes(self, sub: BasicConcept, sup: BasicConcept) -> bool:
        return self.spec.tbox.subsumes(sub, sup)

    def ext(self, concept: BasicConcept, instance: Instance) -> frozenset[Constant]:
        return certain_extension(self.spec, instance, concept)

    def key(self, concept: BasicConcept):
        return str(concept)


def induce_ontology(spec: OBDASpec) -> InducedOntology:
    return InducedOntology(spec)
