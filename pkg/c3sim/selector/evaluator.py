"""
Condition evaluator for scenario filters.

Single source of truth for deciding whether a scenario row satisfies a
filter. The CLI's --where, --filter-collective and --filter-taxonomy all
go through here.
"""

from typing import Any, Dict, List, Optional, Sequence

from ..hardware.machine import MachineDescriptor, machine_op_to_byte
from ..params import ModelParams
from ..sim.sweep import scenario_taxonomy
from ..workload.kernels import C3Scenario
from ..workload.roofline import classify_gemm_boundedness
from .ast import (
    Comparison,
    ComparisonOp,
    Condition,
    FieldRef,
    Literal,
    LiteralType,
    LogicalCondition,
    LogicalOp,
    SIZE_FIELDS,
)


def scenario_row(scenario: C3Scenario, md: MachineDescriptor, params: ModelParams) -> Dict[str, Any]:
    """Flattens a scenario into the fields a filter can reference."""
    expected = scenario.expected_taxonomy.value if scenario.expected_taxonomy is not None else ""
    return {
        "id": scenario.id,
        "gemm": scenario.gemm.tag,
        "gemm_class": classify_gemm_boundedness(scenario.gemm, machine_op_to_byte(md)).value,
        "collective": scenario.collective.kind.value,
        "taxonomy": scenario_taxonomy(scenario, md, params),
        "expected": expected,
        "source": scenario.source,
        "size": scenario.collective.payload_bytes,
    }


class ConditionEvaluator:
    """Evaluates filter conditions against scenario rows."""

    def evaluate(self, condition: Condition, row: Dict[str, Any]) -> bool:
        """
        Evaluate a condition against a row.

        Args:
            condition: Comparison or LogicalCondition node
            row: Row built by scenario_row

        Returns:
            True if the row satisfies the condition
        """
        if isinstance(condition, Comparison):
            return self._evaluate_comparison(condition, row)
        elif isinstance(condition, LogicalCondition):
            return self._evaluate_logical(condition, row)
        else:
            raise ValueError(f"Unknown condition type: {type(condition)}")

    def _evaluate_comparison(self, comp: Comparison, row: Dict[str, Any]) -> bool:
        left = row[comp.left.name]
        right = self._literal_value(comp.left, comp.right)

        if comp.op == ComparisonOp.EQ:
            return left == right
        elif comp.op == ComparisonOp.NE:
            return left != right
        elif comp.op == ComparisonOp.LT:
            return left < right
        elif comp.op == ComparisonOp.GT:
            return left > right
        elif comp.op == ComparisonOp.LTE:
            return left <= right
        elif comp.op == ComparisonOp.GTE:
            return left >= right
        else:
            raise ValueError(f"Unknown comparison operator: {comp.op}")

    def _evaluate_logical(self, logic: LogicalCondition, row: Dict[str, Any]) -> bool:
        left_result = self.evaluate(logic.left, row)

        # Short-circuit
        if logic.op == LogicalOp.AND:
            return left_result and self.evaluate(logic.right, row)
        elif logic.op == LogicalOp.OR:
            return left_result or self.evaluate(logic.right, row)
        else:
            raise ValueError(f"Unknown logical operator: {logic.op}")

    @staticmethod
    def _literal_value(field: FieldRef, literal: Literal):
        # Text fields see a size literal as written, e.g. `gemm = 896M` is never a number.
        if field.name in SIZE_FIELDS or literal.type != LiteralType.SIZE:
            return literal.value
        return literal.text


def select_scenarios(
    scenarios: Sequence[C3Scenario],
    condition: Optional[Condition],
    md: MachineDescriptor,
    params: ModelParams,
) -> List[C3Scenario]:
    """Scenarios whose row satisfies condition, in input order; None keeps all."""
    if condition is None:
        return list(scenarios)
    evaluator = ConditionEvaluator()
    return [s for s in scenarios if evaluator.evaluate(condition, scenario_row(s, md, params))]
