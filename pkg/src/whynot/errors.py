"""Exception hierarchy shared across the package."""

from __future__ import annotations


class WhynotError(Exception):
    """Base class for all errors raised by this package."""


class QueryParseError(WhynotError):
    """Malformed query, concept, schema or ontology text."""


class SchemaError(WhynotError):
    """Unknown relation/attribute, bad arity, or a cyclic view dependency."""


class ConstraintViolationError(WhynotError):
    """Data violates a declared constraint; carries the validation report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedConstraintClassError(WhynotError):
    """Schema-level subsumption requested for a constraint class we do not decide."""

    def __init__(self, message, constraints=()):
        super().__init__(message)
        self.constraints = tuple(constraints)


class NoSolutionError(WhynotError):
    """The mapped instance violates a negative axiom of the terminology."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class NoExplanationError(WhynotError):
    """No explanation exists for the why-not question."""


class BudgetExceededError(WhynotError):
    """An enumeration grew past its caller-supplied cap."""


class ChaseBoundExceededError(WhynotError):
    """The chase did not reach a fixpoint within its round bound.

    The partially chased fact set is attached; every fact in it is implied,
    so callers that only need sound positive answers may still use it.
    """

    def __init__(self, message, facts=None):
        super().__init__(message)
        self.facts = facts


class TuplePresentError(WhynotError):
    """The tuple under question is actually part of the answer set."""
