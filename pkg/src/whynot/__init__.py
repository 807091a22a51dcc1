"""Why-not explanations over relational data, backed by ontologies.

Given a query, its answers, and a tuple that is unexpectedly missing, the
engine produces tuples of ontology concepts that cover the missing tuple
while steering clear of every actual answer, preferring the most general
such tuples.  Ontologies come from a file, from a mapped terminology, or
are derived from the instance or schema on the fly.
"""

from .concepts import (
    ALL_CONSTANTS,
    Concept,
    Fragment,
    Nominal,
    Projection,
    SelectionCondition,
    Top,
    TOP,
    enumerate_concepts,
    extension,
    minimize_irredundant,
    parse_concept,
    subsumed_by_instance,
    subsumed_by_schema,
)
from .constants import Constant, labeled_null
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
    Generality,
    WhyNotInstance,
    card_maximal_explanation,
    check_mge,
    check_mge_instance,
    compare_generality,
    compute_schema_mges,
    degree_of_generality,
    enumerate_explanations,
    exhaustive_mges,
    exists_explanation,
    incremental_mge,
    is_explanation,
    lub_selection_free,
    lub_with_selections,
    minimize_equivalent_length,
    shortest_mge,
)
from .obda import (
    Axiom,
    BasicConcept,
    BasicRole,
    GAVMapping,
    InducedOntology,
    OBDASpec,
    TBox,
    certain_extension,
    check_solution_exists,
    induce_ontology,
    load_obda_spec,
    parse_basic_concept,
    tbox_subsumption,
)
from .ontology import (
    FiniteOntology,
    InstanceOntology,
    SchemaOntology,
    SOntology,
    check_consistency,
    load_ontology,
)
from .queries import (
    UCQ,
    Atom,
    Comparison,
    ConjunctiveQuery,
    Var,
    chase_with_ids,
    contains_cq,
    contains_ucq,
    eval_cq,
    eval_ucq,
    parse_query,
    unfold_views,
)
from .relational import (
    Constraint,
    FunctionalDependency,
    InclusionDependency,
    Instance,
    Relation,
    Schema,
    ValidationReport,
    ViewDefinition,
    load_instance,
    load_instance_dir,
    load_schema,
    materialize_views,
    validate_constraints,
)

__version__ = "0.1.0"
