"""
Scenario selector parser using Lark.

Parses filter expressions into syntax-tree nodes and size literals into
byte counts. Separates parsing from evaluation.
"""

import re
from decimal import Decimal, ROUND_HALF_EVEN
from pathlib import Path

from lark import Lark, Transformer
from lark.exceptions import LarkError, VisitError

from . import ast
from ..utils.exceptions import C3Error, SelectorSyntaxError

# K/M/G/T and the explicit KiB forms are binary; KB/MB/GB/TB are decimal.
_BINARY = {"K": 2 ** 10, "M": 2 ** 20, "G": 2 ** 30, "T": 2 ** 40}
_DECIMAL = {"K": 10 ** 3, "M": 10 ** 6, "G": 10 ** 9, "T": 10 ** 12}
_SIZE_RE = re.compile(r"(\d+(?:\.\d+)?)([KMGT]?)(i?)(B?)")


def size_to_bytes(text: str) -> int:
    """
    Converts a lexed size literal to bytes, rounding to the nearest byte.

    "896M" -> 939524096, "1GB" -> 1000000000, "512MiB" -> 536870912
    """
    match = _SIZE_RE.fullmatch(text)
    if match is None:
        raise SelectorSyntaxError(f"invalid size literal {text!r}", text)
    number, prefix, binary_marker, byte_suffix = match.groups()
    multiplier = 1
    if prefix:
        decimal_units = byte_suffix and not binary_marker
        multiplier = (_DECIMAL if decimal_units else _BINARY)[prefix]
    exact = Decimal(number) * multiplier
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


class SelectorBuilder(Transformer):
    """
    Transforms the Lark parse tree into selector nodes.

    Each method corresponds to a rule (or alias) in grammar.lark.
    """

    # ----- Conditions -----

    def condition(self, args):
        return args[0]

    def condition_and(self, args):
        return ast.LogicalCondition(left=args[0], op=ast.LogicalOp.AND, right=args[1])

    def condition_or(self, args):
        return ast.LogicalCondition(left=args[0], op=ast.LogicalOp.OR, right=args[1])

    def condition_parens(self, args):
        return args[0]

    def comparison(self, args):
        name, op, literal = str(args[0]), args[1], args[2]
        if name not in ast.FIELDS:
            raise SelectorSyntaxError(
                f"unknown field {name!r}; expected one of {', '.join(ast.FIELDS)}"
            )
        if name in ast.SIZE_FIELDS and literal.type != ast.LiteralType.SIZE:
            raise SelectorSyntaxError(f"field {name!r} compares against a size, got {literal.text!r}")
        if name in ast.TEXT_FIELDS and op.is_ordering:
            raise SelectorSyntaxError(f"field {name!r} only supports = and !=")
        return ast.Comparison(left=ast.FieldRef(name), op=op, right=literal)

    # ----- Operators -----

    def op_eq(self, args):
        return ast.ComparisonOp.EQ

    def op_ne(self, args):
        return ast.ComparisonOp.NE

    def op_lt(self, args):
        return ast.ComparisonOp.LT

    def op_gt(self, args):
        return ast.ComparisonOp.GT

    def op_lte(self, args):
        return ast.ComparisonOp.LTE

    def op_gte(self, args):
        return ast.ComparisonOp.GTE

    # ----- Literals -----

    def size_value(self, args):
        text = str(args[0])
        return ast.Literal(value=size_to_bytes(text), type=ast.LiteralType.SIZE, text=text)

    def word_value(self, args):
        text = str(args[0])
        return ast.Literal(value=text, type=ast.LiteralType.WORD, text=text)

    def string_value(self, args):
        raw = str(args[0])
        text = raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        return ast.Literal(value=text, type=ast.LiteralType.STRING, text=raw)

    def size(self, args):
        return size_to_bytes(str(args[0]))


class ScenarioSelector:
    """
    Selector parser facade.

    Provides a simple interface for parsing filter expressions and size
    literals.
    """

    def __init__(self):
        grammar_path = Path(__file__).parent / "grammar.lark"
        with open(grammar_path, "r") as f:
            grammar = f.read()

        self._parser = Lark(grammar, start=["condition", "size"], parser="lalr")
        self._transformer = SelectorBuilder()

    def _run(self, text: str, start: str):
        try:
            tree = self._parser.parse(text.strip(), start=start)
            return self._transformer.transform(tree)
        except VisitError as e:
            if isinstance(e.orig_exc, C3Error):
                if isinstance(e.orig_exc, SelectorSyntaxError) and e.orig_exc.text is None:
                    raise SelectorSyntaxError(e.orig_exc.message, text)
                raise e.orig_exc
            raise SelectorSyntaxError(str(e.orig_exc), text)
        except LarkError as e:
            raise SelectorSyntaxError(str(e), text)

    def parse(self, text: str) -> ast.Condition:
        """
        Parses a filter expression.

        Args:
            text: Expression such as `collective = all-gather AND size >= 1G`

        Returns:
            Comparison or LogicalCondition tree

        Raises:
            SelectorSyntaxError: On invalid syntax, unknown fields or a
                comparison the field does not support
        """
        return self._run(text, "condition")

    def parse_size(self, text: str) -> int:
        """
        Parses a size literal such as `896M`, `3.25G` or `1GB` into bytes.

        Raises:
            SelectorSyntaxError: If the text is not a size literal
        """
        return self._run(text, "size")
