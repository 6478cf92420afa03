"""
Report formatter for terminal output.

Separates presentation from modelling: every command builds plain
records and hands them here to be laid out as tables.
"""

from typing import Any, Dict, List, Optional, Sequence

from tabulate import tabulate

from .conccl.cost import CrossoverPoint, PlanCost
from .conccl.plan import TransferPlan
from .sim.calibrate import CalibrationResult
from .sim.engine import ExhaustivePartition, SimTimeline
from .sim.sweep import SweepResult
from .strategy.planner import PartitionPlan


def format_table(rows: List[Dict[str, Any]]) -> str:
    """
    Format records as an ASCII grid with a row count.

    Args:
        rows: List of dicts sharing the same keys

    Returns:
        Formatted string with table
    """
    if not rows:
        return "(0 rows)"

    columns = list(rows[0].keys())
    values = [[row.get(col) for col in columns] for row in rows]
    table = tabulate(values, headers=columns, tablefmt="grid", floatfmt=".6g")
    return table + f"\n({len(rows)} row{'s' if len(rows) != 1 else ''})"


def _pairs(pairs: Sequence[Sequence[Any]]) -> str:
    return tabulate(pairs, tablefmt="plain", floatfmt=".6g")


def format_classify_report(rows: List[Dict[str, Any]]) -> str:
    mismatches = sum(1 for row in rows if row.get("match") is False)
    text = format_table(rows)
    if mismatches:
        text += f"\n{mismatches} scenario{'s' if mismatches != 1 else ''} differ from the expected taxonomy"
    return text


def format_plan(
    title: str,
    plan: PartitionPlan,
    simulated_makespan: float,
    exhaustive: Optional[ExhaustivePartition] = None,
) -> str:
    """Plan summary followed by the candidate sweep when the plan has one."""
    lines = [
        title,
        _pairs([
            ("backend", plan.comm_backend.value),
            ("cus_gemm", plan.cus_gemm),
            ("cus_comm", plan.cus_comm),
            ("cus_idle", plan.cus_idle),
            ("schedule_order", " -> ".join(plan.schedule_order)),
            ("predicted_makespan_s", plan.predicted_makespan),
            ("simulated_makespan_s", simulated_makespan),
        ]),
    ]
    if plan.candidates:
        simulated = dict(exhaustive.evaluations) if exhaustive else {}
        rows = []
        for c in plan.candidates:
            row = {
                "cus_comm": c.cus_comm,
                "cus_gemm": c.cus_gemm,
                "gemm_time_s": c.gemm_time,
                "comm_time_s": c.comm_time,
                "predicted_s": c.predicted,
            }
            if exhaustive:
                row["simulated_s"] = simulated.get(c.cus_comm)
            row["chosen"] = "*" if c.cus_comm == plan.cus_comm else ""
            rows.append(row)
        lines.append(format_table(rows))
    if exhaustive:
        lines.append(
            f"exhaustive best: {exhaustive.best_cus_comm} CUs, {exhaustive.best_makespan:.6g} s "
            f"(plan within {simulated_makespan / exhaustive.best_makespan - 1:.2%})"
        )
    return "\n".join(lines)


def format_transfer_plan(plan: TransferPlan, cost: PlanCost, verdict: str) -> str:
    lines = [
        _pairs([
            ("collective", plan.kind.value),
            ("n_ranks", plan.n_ranks),
            ("chunk_bytes", plan.chunk_bytes),
            ("transfers", len(plan.transfers)),
            ("dma_engines", plan.dma_engines),
            ("validation", verdict),
            ("total_s", cost.total),
            ("wire_s", cost.wire),
        ])
    ]
    if cost.per_engine:
        lines.append(
            tabulate(
                [[engine, finish] for engine, finish in enumerate(cost.per_engine)],
                headers=["engine", "finish_s"],
                tablefmt="grid",
                floatfmt=".6g",
            )
        )
    return "\n".join(lines)


def format_sweep(result: SweepResult) -> str:
    rows = [row.to_dict() for row in result.rows]
    aggregates = [agg.to_dict() for agg in result.aggregates]
    text = format_table(rows)
    if aggregates:
        text += "\n\n" + format_table(aggregates)
    return text


def format_timeline(timeline: SimTimeline) -> str:
    summary = _pairs([
        ("scenario", f"{timeline.scenario_id} ({timeline.collective})"),
        ("strategy", timeline.strategy.value),
        ("allocation", f"gemm {timeline.allocation.cus_gemm} CUs, comm {timeline.allocation.cus_comm} CUs "
                       f"on {timeline.allocation.backend.value}, idle {timeline.allocation.cus_idle}"),
        ("t_gemm_s", timeline.t_gemm),
        ("t_comm_s", timeline.t_comm),
        ("serial_s", timeline.serial_time),
        ("makespan_s", timeline.makespan),
        ("speedup", timeline.speedup),
        ("ideal", timeline.ideal),
        ("fraction_of_ideal", timeline.fraction_of_ideal),
    ])
    phases = []
    for i, phase in enumerate(timeline.phases, start=1):
        for kernel in phase.kernels:
            phases.append({
                "phase": i,
                "start_s": phase.start,
                "end_s": phase.end,
                "kernel": kernel.name,
                "rate": kernel.rate,
                "cus": kernel.cus,
                "backend": kernel.backend.value,
            })
    return summary + "\n" + format_table(phases)


def crossover_rows(points: Sequence[CrossoverPoint]) -> List[Dict[str, Any]]:
    return [
        {"payload_bytes": p.payload_bytes, "dma_time_s": p.dma_time, "cu_time_s": p.cu_time, "ratio": p.ratio}
        for p in points
    ]


def format_crossover(points: Sequence[CrossoverPoint]) -> str:
    return format_table(crossover_rows(points))


def format_calibration(result: CalibrationResult) -> str:
    fitted = _pairs([(name, value) for name, value in result.fitted.items()])
    residuals = format_table([r.to_dict() for r in result.residuals])
    return (
        f"fitted parameters ({result.iterations} evaluations)\n{fitted}\n"
        f"{residuals}\nrms residual: {result.rms:.6g}"
    )
