"""
Syntax tree for scenario filter expressions.

The parser produces these nodes and the evaluator walks them, so neither
depends on lark's parse trees.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Union


# ----- Enums -----

class ComparisonOp(Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    GT = ">"
    LTE = "<="
    GTE = ">="

    @property
    def is_ordering(self) -> bool:
        return self not in (ComparisonOp.EQ, ComparisonOp.NE)


class LogicalOp(Enum):
    AND = "AND"
    OR = "OR"


class LiteralType(Enum):
    SIZE = "SIZE"
    WORD = "WORD"
    STRING = "STRING"


# ----- Expression nodes -----

@dataclass(frozen=True)
class FieldRef:
    """Reference to a scenario row field such as `collective` or `size`."""
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Literal:
    """
    A literal as written plus its interpreted value.

    Size literals carry their byte count in `value`; words and quoted
    strings carry the text itself.
    """
    value: Union[int, str]
    type: LiteralType
    text: str


@dataclass(frozen=True)
class Comparison:
    """field op literal"""
    left: FieldRef
    op: ComparisonOp
    right: Literal


@dataclass(frozen=True)
class LogicalCondition:
    left: "Condition"
    op: LogicalOp
    right: "Condition"


Condition = Union[Comparison, LogicalCondition]


# Fields a filter may reference. `size` is the collective payload in bytes;
# every other field compares as text.
TEXT_FIELDS = ("id", "gemm", "gemm_class", "collective", "taxonomy", "expected", "source")
SIZE_FIELDS = ("size",)
FIELDS = TEXT_FIELDS + SIZE_FIELDS
