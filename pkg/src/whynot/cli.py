"""Command-line front end.

Subcommands: ``validate`` (schema and data report), ``query`` (answer set),
``explain`` (why-not explanations), ``ontology show`` (universe, closed
subsumption, extensions).  Exit codes: 0 ok, 2 parse error, 3 constraint or
consistency violation, 4 unsupported constraint class, 5 no solution,
6 no explanation, 7 budget exceeded, 8 the tuple is present in the answer.
The WHYNOT_BUDGET environment variable caps enumeration sizes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .concepts import Fragment, extension, is_all, minimize_irredundant
from .constants import Constant
from .errors import (
    BudgetExceededError,
    ChaseBoundExceededError,
    ConstraintViolationError,
    NoExplanationError,
    NoSolutionError,
    QueryParseError,
    SchemaError,
    TuplePresentError,
    UnsupportedConstraintClassError,
    WhynotError,
)
from .explain import (
    Explanation,
    WhyNotInstance,
    card_maximal_explanation,
    compute_schema_mges,
    exhaustive_mges,
    explanation_to_dict,
    incremental_mge,
    is_explanation,
    mges_to_dict,
    minimize_equivalent_length,
    shortest_mge,
)
from .obda import induce_ontology, load_obda_spec, check_solution_exists
from .ontology import InstanceOntology, SchemaOntology, check_consistency, load_ontology
from .queries import eval_ucq, parse_query
from .relational import load_instance_dir, load_schema, validate_constraints

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONSTRAINT = 3
EXIT_UNSUPPORTED = 4
EXIT_NO_SOLUTION = 5
EXIT_NO_EXPLANATION = 6
EXIT_BUDGET = 7
EXIT_TUPLE_PRESENT = 8


def _budget(default: int = 50_000) -> int:
    raw = os.environ.get("WHYNOT_BUDGET")
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise QueryParseError(f"WHYNOT_BUDGET must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whynot",
        description="Explain missing query answers with ontology concepts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--schema", required=True, help="schema JSON file")
        p.add_argument("--data", required=True, help="directory of <relation>.csv files")

    p_validate = sub.add_parser("validate", help="check the data against every declared constraint")
    add_data_args(p_validate)

    p_query = sub.add_parser("query", help="evaluate a query and print its answers")
    add_data_args(p_query)
    p_query.add_argument("--query", required=True, help="query text or a file containing it")
    p_query.add_argument("--format", choices=("text", "json"), default="text")

    p_explain = sub.add_parser("explain", help="explain why a tuple is missing from the answers")
    add_data_args(p_explain)
    p_explain.add_argument("--query", required=True, help="query text or a file containing it")
    p_explain.add_argument("--tuple", required=True, dest="missing", help="comma-separated missing tuple")
    source = p_explain.add_mutually_exclusive_group(required=True)
    source.add_argument("--ontology", help="finite ontology JSON file")
    source.add_argument("--obda", help="terminology and mapping JSON file")
    source.add_argument("--derive", choices=("instance", "schema"), help="derive the ontology")
    p_explain.add_argument(
        "--fragment",
        choices=tuple(f.value for f in Fragment),
        default=Fragment.SELECTION_FREE.value,
        help="concept-language fragment for derived ontologies",
    )
    p_explain.add_argument("--all", action="store_true", help="print every most-general explanation")
    p_explain.add_argument("--shortest", action="store_true", help="print a shortest most-general explanation")
    p_explain.add_argument("--card", action="store_true", help="print a cardinality-maximal explanation")
    p_explain.add_argument("--minimize", action="store_true", help="drop redundant conjuncts before printing")
    p_explain.add_argument("--verify-ans", action="store_true", help="re-evaluate the query to verify the answer set")
    p_explain.add_argument("--check", action="store_true", help="re-verify each printed explanation")
    p_explain.add_argument("--format", choices=("text", "json"), default="text")

    p_onto = sub.add_parser("ontology", help="inspect an ontology")
    onto_sub = p_onto.add_subparsers(dest="ontology_command", required=True)
    p_show = onto_sub.add_parser("show", help="print universe, subsumptions, and extensions")
    add_data_args(p_show)
    onto_source = p_show.add_mutually_exclusive_group(required=True)
    onto_source.add_argument("--ontology", help="finite ontology JSON file")
    onto_source.add_argument("--obda", help="terminology and mapping JSON file")

    return parser


def _load_query(raw: str):
    path = Path(raw)
    text = path.read_text(encoding="utf-8") if path.exists() else raw
    return parse_query(text)


def _cmd_validate(args) -> int:
    schema = load_schema(args.schema)
    instance = load_instance_dir(schema, args.data, validate=False)
    report = validate_constraints(schema, instance.tables)
    for check in report.checks:
        print(check)
    if not report.ok:
        return EXIT_CONSTRAINT
    print(f"instance satisfies all {len(report.checks)} constraints")
    return EXIT_OK


def _cmd_query(args) -> int:
    schema = load_schema(args.schema)
    instance = load_instance_dir(schema, args.data)
    query = _load_query(args.query)
    answers = sorted(eval_ucq(query, instance.tables), key=lambda row: tuple(v.sort_key() for v in row))
    if args.format == "json":
        print(json.dumps({"answers": [[str(v) for v in row] for row in answers]}, indent=2))
    else:
        for row in answers:
            print("(" + ", ".join(str(v) for v in row) + ")")
        print(f"{len(answers)} answer(s)")
    return EXIT_OK


def _parse_missing(raw: str) -> tuple[Constant, ...]:
    parts = [p.strip() for p in raw.split(",")]
    if any(not p for p in parts):
        raise QueryParseError(f"bad missing tuple {raw!r}")
    return tuple(Constant.of(p) for p in parts)


def _cmd_explain(args) -> int:
    schema = load_schema(args.schema)
    instance = load_instance_dir(schema, args.data)
    query = _load_query(args.query)
    missing = _parse_missing(args.missing)
    wn = WhyNotInstance.build(schema, instance, query, missing)
    if args.verify_ans:
        print(f"answer set verified ({len(wn.answers)} tuples)", file=sys.stderr)
    fragment = Fragment(args.fragment)
    budget = _budget()

    results: list[Explanation]
    if args.ontology:
        ontology = load_ontology(args.ontology, schema)
        consistent, violations = check_consistency(ontology, instance)
        if not consistent:
            for violation in violations:
                print(f"inconsistent ontology: {violation}", file=sys.stderr)
            return EXIT_CONSTRAINT
        results = _finite_results(wn, ontology, args)
    elif args.obda:
        spec = load_obda_spec(args.obda, schema)
        ok, violations = check_solution_exists(spec, instance)
        if not ok:
            for violation in violations:
                print(f"no solution: {violation}", file=sys.stderr)
            return EXIT_NO_SOLUTION
        ontology = induce_ontology(spec)
        results = _finite_results(wn, ontology, args)
    elif args.derive == "instance":
        ontology = InstanceOntology(schema, instance, fragment)
        if args.all or args.shortest or args.card:
            raise UnsupportedConstraintClassError(
                "the instance-derived ontology supports only single-explanation search"
            )
        results = [incremental_mge(wn, fragment)]
    else:
        ontology = SchemaOntology(schema, fragment)
        mges = compute_schema_mges(wn, fragment, budget=budget)
        results = mges if args.all else mges[:1]

    if args.minimize:
        results = [minimize_equivalent_length(e, instance) for e in results]
    if not results:
        print("no explanation exists", file=sys.stderr)
        return EXIT_NO_EXPLANATION
    if args.check:
        for result in results:
            if not is_explanation(result, wn, ontology):
                print(f"self-check failed for {result}", file=sys.stderr)
                return EXIT_CONSTRAINT

    if args.format == "json":
        print(json.dumps(mges_to_dict(results, ontology, instance), indent=2))
    else:
        for result in results:
            print(result)
    return EXIT_OK


def _finite_results(wn, ontology, args) -> list[Explanation]:
    if args.shortest:
        return [shortest_mge(wn, ontology)]
    if args.card:
        return [card_maximal_explanation(wn, ontology)]
    mges = exhaustive_mges(wn, ontology)
    if not mges:
        raise NoExplanationError("no explanation exists for this question")
    return mges if args.all else mges[:1]


def _cmd_ontology_show(args) -> int:
    schema = load_schema(args.schema)
    instance = load_instance_dir(schema, args.data)
    if args.ontology:
        ontology = load_ontology(args.ontology, schema)
    else:
        spec = load_obda_spec(args.obda, schema)
        ok, violations = check_solution_exists(spec, instance)
        if not ok:
            for violation in violations:
                print(f"no solution: {violation}", file=sys.stderr)
            return EXIT_NO_SOLUTION
        ontology = induce_ontology(spec)
    print("concepts:")
    for concept in ontology.concepts:
        print(f"  {concept}")
    print("subsumptions (closed, without reflexive pairs):")
    for sub in ontology.concepts:
        for sup in ontology.concepts:
            if sub != sup and ontology.subsumes(sub, sup):
                print(f"  {sub} <= {sup}")
    print("extensions:")
    for concept in ontology.concepts:
        ext = ontology.ext(concept, instance)
        if is_all(ext):
            print(f"  {concept}: all constants")
        else:
            values = ", ".join(str(v) for v in sorted(ext, key=Constant.sort_key))
            print(f"  {concept}: {{{values}}}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "query":
            return _cmd_query(args)
        if args.command == "explain":
            return _cmd_explain(args)
        if args.command == "ontology":
            return _cmd_ontology_show(args)
        parser.error(f"unknown command {args.command!r}")
    except TuplePresentError as exc:
        print(f"tuple is present: {exc}", file=sys.stderr)
        return EXIT_TUPLE_PRESENT
    except (QueryParseError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConstraintViolationError as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        if exc.report is not None:
            for check in exc.report.failures:
                print(f"  {check}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except UnsupportedConstraintClassError as exc:
        print(f"unsupported constraint class: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except NoExplanationError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_NO_EXPLANATION
    except (BudgetExceededError, ChaseBoundExceededError) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except WhynotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
