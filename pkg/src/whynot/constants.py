"""Constants: dynamically typed scalar values with a deterministic order.

A raw token that looks numeric (optionally written with thousands
separators, e.g. "3,502,000") is stored as a Decimal; anything else is
text.  Two orders live here:

* ``compare`` implements the comparison semantics used by selection and
  comparison predicates: numeric against numeric compares numerically,
  every other pair compares lexicographically on the textual form.  This
  satisfies trichotomy but is not transitive across mixed numeric/text
  pairs, so it must not drive sorting.
* ``sort_key`` is a genuine total order (numbers before text) used
  wherever deterministic iteration is required.

Labeled nulls produced by the chase are constants with ``is_null`` set;
they compare like ordinary text constants.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

_GROUPED_NUMBER = re.compile(r"-?\d{1,3}(?:,\d{3})+(?:\.\d+)?")
_PLAIN_NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")


def _canonical_number_text(value: Decimal) -> str:
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


@dataclass(frozen=True)
class Constant:
    """A single data value: text or number, plus the labeled-null flag."""

    text: str
    number: Decimal | None = None
    is_null: bool = False

    @staticmethod
    def of(raw) -> "Constant":
        """Build a constant from a raw token, detecting numeric values."""
        if isinstance(raw, Constant):
            return raw
        if isinstance(raw, bool):
            raise TypeError("booleans are not constants")
        if isinstance(raw, (int, float, Decimal)):
            number = Decimal(str(raw))
            return Constant(_canonical_number_text(number), number)
        if not isinstance(raw, str):
            raise TypeError(f"cannot build a constant from {type(raw).__name__}")
        token = raw.strip()
        candidate = token
        if _GROUPED_NUMBER.fullmatch(token):
            candidate = token.replace(",", "")
        if _PLAIN_NUMBER.fullmatch(candidate):
            try:
                number = Decimal(candidate)
            except InvalidOperation:  # pragma: no cover - regex guards this
                return Constant(token)
            return Constant(_canonical_number_text(number), number)
        return Constant(token)

    @property
    def is_number(self) -> bool:
        return self.number is not None

    def compare(self, other: "Constant") -> int:
        """Three-way comparison under the predicate semantics."""
        if self.number is not None and other.number is not None:
            if self.number < other.number:
                return -1
            if self.number > other.number:
                return 1
            return 0
        if self.text < other.text:
            return -1
        if self.text > other.text:
            return 1
        if self == other:
            return 0
        # Same text, different kind or null flag; break the tie so that
        # trichotomy holds for distinct constants.
        return -1 if self.sort_key() < other.sort_key() else 1

    def satisfies(self, op: str, bound: "Constant") -> bool:
        cmp = self.compare(bound)
        if op == "=":
            return cmp == 0
        if op == "<":
            return cmp < 0
        if op == ">":
            return cmp > 0
        if op == "<=":
            return cmp <= 0
        if op == ">=":
            return cmp >= 0
        raise ValueError(f"unknown comparison operator {op!r}")

    def sort_key(self):
        if self.number is not None:
            return (self.is_null, 0, self.number, self.text)
        return (self.is_null, 1, self.text, "")

    def __str__(self) -> str:
        return self.text

    def __repr__(self) -> str:
        if self.is_null:
            return f"Null({self.text})"
        return f"Constant({self.text!r})"


def labeled_null(index: int) -> Constant:
    """Fresh labeled null, distinct from every data constant."""
    return Constant(text=f"_:{index}", is_null=True)


def constant_sort_key(values) -> tuple:
    """Sort key for a tuple of constants."""
    return tuple(value.sort_key() for value in values)
