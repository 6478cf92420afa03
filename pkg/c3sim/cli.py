"""
Command-line front end.

Ties the model together behind subcommands: classify, plan, conccl-plan,
sweep, simulate, crossover and calibrate. All input comes from files (or
the bundled defaults) and all output goes to stdout or an --out file that
is written atomically. Library errors become exit codes here and nowhere
else:

    0 ok, 2 load/parse, 3 unknown entity, 4 validation, 5 fit failure
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .conccl.cost import crossover_curve, plan_cost
from .conccl.plan import plan_collective
from .conccl.validator import validate_plan
from .formatter import (
    crossover_rows,
    format_calibration,
    format_classify_report,
    format_crossover,
    format_plan,
    format_sweep,
    format_timeline,
    format_transfer_plan,
)
from .hardware.machine import (
    MachineDescriptor,
    default_machine,
    load_machine_file,
    machine_op_to_byte,
    save_machine,
)
from .interference.tables import SlowdownTables, default_slowdown_tables, load_slowdown_tables
from .params import ModelParams, default_params, load_params_file, save_params, zero_interference
from .selector.ast import (
    Comparison,
    ComparisonOp,
    Condition,
    FieldRef,
    Literal,
    LiteralType,
    LogicalCondition,
    LogicalOp,
)
from .selector.evaluator import select_scenarios
from .selector.parser import ScenarioSelector
from .sim.calibrate import calibrate, parse_measurements
from .sim.engine import (
    ALL_STRATEGIES,
    StrategyName,
    exhaustive_partition,
    plan_for_strategy,
    simulate,
    work_conservation_check,
)
from .sim.sweep import sweep, sweep_to_csv, sweep_to_json
from .taxonomy import C3Type, classify_c3, ideal_speedup
from .utils.exceptions import C3Error
from .utils.validators import read_text, write_text_atomic
from .workload.dataset import default_dataset, find_scenarios, load_dataset
from .workload.kernels import C3Scenario, CollectiveKind, CollectiveOp
from .workload.roofline import (
    classify_collective_boundedness,
    classify_gemm_boundedness,
    isolated_collective_time,
    roofline_gemm_time,
)

logger = logging.getLogger(__name__)

COLLECTIVE_CHOICES = [kind.value for kind in CollectiveKind]
TAXONOMY_CHOICES = [t.value for t in C3Type]
STRATEGY_CHOICES = [s.value for s in StrategyName]
DEFAULT_CROSSOVER_PAYLOADS = "1M,2M,4M,8M,16M,32M,64M,128M,256M,512M,1G"


# ----- Run configuration -----

@dataclass
class RunConfig:
    """Machine, tables, parameters and dataset a command runs against."""
    machine: MachineDescriptor
    tables: SlowdownTables
    params: ModelParams
    dataset_path: Optional[str] = None

    def scenarios(self) -> List[C3Scenario]:
        if self.dataset_path:
            return load_dataset(self.dataset_path)
        return default_dataset()


def load_config(args: argparse.Namespace) -> RunConfig:
    """Loads the files named on the command line, falling back to bundled data."""
    md = load_machine_file(args.machine) if args.machine else default_machine()
    tables = load_slowdown_tables(args.tables, md) if args.tables else default_slowdown_tables(md)
    params = load_params_file(args.params) if args.params else default_params()
    if args.zero_interference:
        md, tables, params = zero_interference(md, params)
    return RunConfig(machine=md, tables=tables, params=params, dataset_path=args.dataset)


def _filter_condition(args: argparse.Namespace) -> Optional[Condition]:
    conditions: List[Condition] = []
    for name, value in (("collective", args.filter_collective), ("taxonomy", args.filter_taxonomy)):
        if value:
            conditions.append(
                Comparison(FieldRef(name), ComparisonOp.EQ, Literal(value, LiteralType.WORD, value))
            )
    if args.where:
        conditions.append(ScenarioSelector().parse(args.where))
    if not conditions:
        return None
    combined = conditions[0]
    for condition in conditions[1:]:
        combined = LogicalCondition(combined, LogicalOp.AND, condition)
    return combined


def _selected_scenarios(args: argparse.Namespace, config: RunConfig) -> List[C3Scenario]:
    scenarios = select_scenarios(config.scenarios(), _filter_condition(args), config.machine, config.params)
    logger.info("%d scenarios selected", len(scenarios))
    return scenarios


def _named_scenarios(args: argparse.Namespace, config: RunConfig) -> List[C3Scenario]:
    return find_scenarios(config.scenarios(), args.scenario, args.collective)


# ----- Output -----

def _emit(text: str, out: Optional[str]) -> None:
    if out:
        write_text_atomic(out, text)
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buffer.getvalue()


def _render_rows(rows: List[Dict[str, Any]], fmt: str, table_text: str) -> str:
    if fmt == "csv":
        return _rows_to_csv(rows)
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    return table_text + "\n"


# ----- Commands -----

def classify_rows(scenarios: Sequence[C3Scenario], md: MachineDescriptor, params: ModelParams) -> List[Dict[str, Any]]:
    """
    Per-scenario boundedness, roofline taxonomy and ideal speedup.

    A pair where either kernel has no work (a single-rank collective, say)
    has no taxonomy: it is reported as "n/a" with ideal 1.0 and no match.
    """
    eff = params.efficiency
    ratio = machine_op_to_byte(md)
    rows = []
    for s in scenarios:
        t_gemm = roofline_gemm_time(s.gemm, md, eff)
        t_comm = isolated_collective_time(s.collective, md, eff)
        expected = s.expected_taxonomy.value if s.expected_taxonomy is not None else None
        if t_gemm > 0 and t_comm > 0:
            label = classify_c3(t_gemm, t_comm).value.value
            ideal = ideal_speedup(t_gemm, t_comm)
            match = None if expected is None else label == expected
        else:
            label, ideal, match = "n/a", 1.0, None
        rows.append({
            "scenario_id": s.id,
            "collective": s.collective.kind.value,
            "gemm_boundedness": classify_gemm_boundedness(s.gemm, ratio).value,
            "collective_boundedness": classify_collective_boundedness(s.collective, md, eff).value,
            "t_gemm_s": t_gemm,
            "t_comm_s": t_comm,
            "taxonomy": label,
            "expected": expected,
            "match": match,
            "ideal": ideal,
        })
    return rows


def cmd_classify(args: argparse.Namespace) -> int:
    config = load_config(args)
    rows = classify_rows(_selected_scenarios(args, config), config.machine, config.params)
    _emit(_render_rows(rows, args.format, format_classify_report(rows)), args.out)
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    config = load_config(args)
    strategy = StrategyName.parse(args.strategy)
    md, tables, params = config.machine, config.tables, config.params

    records, blocks = [], []
    for scenario in _named_scenarios(args, config):
        plan = plan_for_strategy(scenario, strategy, md, tables, params)
        simulated = simulate(scenario, strategy, md, tables, params).makespan
        exhaustive = None
        if strategy in (StrategyName.C3_RP, StrategyName.C3_SP_RP):
            exhaustive = exhaustive_partition(scenario, md, tables, params)

        title = f"{scenario.id} ({scenario.collective.kind.value}) under {strategy.value}"
        blocks.append(format_plan(title, plan, simulated, exhaustive))
        record = {
            "scenario_id": scenario.id,
            "collective": scenario.collective.kind.value,
            "strategy": strategy.value,
            "plan": plan.to_dict(),
            "simulated_makespan_s": simulated,
        }
        if exhaustive is not None:
            record["exhaustive"] = {
                "best_cus_comm": exhaustive.best_cus_comm,
                "best_makespan_s": exhaustive.best_makespan,
                "evaluations": [{"cus_comm": c, "makespan_s": m} for c, m in exhaustive.evaluations],
            }
        records.append(record)

    if args.format == "json":
        text = json.dumps(records, indent=2) + "\n"
    else:
        text = "\n\n".join(blocks) + "\n"
    _emit(text, args.out)
    return 0


def cmd_conccl_plan(args: argparse.Namespace) -> int:
    config = load_config(args)
    md = config.machine
    kind = CollectiveKind(args.collective)
    payload = ScenarioSelector().parse_size(args.payload)

    plan = plan_collective(CollectiveOp(kind=kind, payload_bytes=payload, n_ranks=args.ranks), md)

    validate_plan(plan)
    cost = plan_cost(plan, md, config.params.efficiency)
    logger.info("%s plan over %d ranks: %d transfers, valid", kind.value, args.ranks, len(plan.transfers))

    if args.out:
        write_text_atomic(args.out, json.dumps(plan.to_dict(), indent=2) + "\n")
    if args.format == "json":
        summary = {
            "valid": True,
            "transfers": len(plan.transfers),
            "total_s": cost.total,
            "wire_s": cost.wire,
            "per_engine_s": list(cost.per_engine),
        }
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    else:
        sys.stdout.write(format_transfer_plan(plan, cost, "valid") + "\n")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args)
    strategies = [StrategyName.parse(name) for name in args.strategy] if args.strategy else list(ALL_STRATEGIES)
    result = sweep(
        _selected_scenarios(args, config),
        strategies,
        config.machine,
        config.tables,
        config.params,
        workers=args.workers,
    )
    for row in result.rows:
        work_conservation_check(row.timeline)

    if args.format == "json":
        text = sweep_to_json(result)
    elif args.format == "table":
        text = format_sweep(result) + "\n"
    else:
        text = sweep_to_csv(result)
    _emit(text, args.out)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args)
    strategy = StrategyName.parse(args.strategy)
    timelines = [
        simulate(scenario, strategy, config.machine, config.tables, config.params)
        for scenario in _named_scenarios(args, config)
    ]
    for timeline in timelines:
        work_conservation_check(timeline)

    if args.format == "json":
        text = json.dumps([t.to_dict() for t in timelines], indent=2) + "\n"
    else:
        text = "\n\n".join(format_timeline(t) for t in timelines) + "\n"
    _emit(text, args.out)
    return 0


def cmd_crossover(args: argparse.Namespace) -> int:
    config = load_config(args)
    selector = ScenarioSelector()
    payloads = [selector.parse_size(text) for text in args.payloads.split(",") if text.strip()]
    points = crossover_curve(
        CollectiveKind(args.collective), payloads, args.ranks, config.machine, config.params.efficiency
    )
    rows = crossover_rows(points)
    _emit(_render_rows(rows, args.format, format_crossover(points)), args.out)
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = load_config(args)
    measurements = parse_measurements(read_text(args.measured), source=args.measured)
    result = calibrate(
        measurements,
        config.scenarios(),
        config.machine,
        config.tables,
        config.params,
        fit_overheads=args.fit_overheads,
    )
    write_text_atomic(args.out, save_params(result.params))
    if args.machine_out:
        write_text_atomic(args.machine_out, save_machine(result.machine))

    if args.format == "json":
        report = {
            "fitted": result.fitted,
            "rms": result.rms,
            "evaluations": result.iterations,
            "residuals": [r.to_dict() for r in result.residuals],
        }
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        sys.stdout.write(format_calibration(result) + "\n")
    return 0


# ----- Argument parsing -----

def build_parser() -> argparse.ArgumentParser:
    config = argparse.ArgumentParser(add_help=False)
    group = config.add_argument_group("configuration")
    group.add_argument("--machine", help="machine descriptor JSON (default: bundled MI300X node)")
    group.add_argument("--dataset", help="scenario dataset JSON (default: bundled 30 scenarios)")
    group.add_argument("--tables", help="slowdown tables CSV (default: bundled tables)")
    group.add_argument("--params", help="model parameters JSON (default: bundled calibration)")
    group.add_argument(
        "--zero-interference",
        action="store_true",
        help="unit slowdowns and penalties, no overheads, no memory contention",
    )
    group.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")

    selection = argparse.ArgumentParser(add_help=False)
    group = selection.add_argument_group("scenario selection")
    group.add_argument("--filter-collective", choices=COLLECTIVE_CHOICES)
    group.add_argument("--filter-taxonomy", choices=TAXONOMY_CHOICES)
    group.add_argument("--where", help="filter expression, e.g. 'collective = all-gather AND size >= 1G'")

    single = argparse.ArgumentParser(add_help=False)
    group = single.add_argument_group("scenario")
    group.add_argument("--scenario", required=True, help="scenario id, e.g. cb1_896M")
    group.add_argument("--collective", choices=COLLECTIVE_CHOICES, help="narrow an id to one collective")

    def output(default: str, choices: Sequence[str]) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(add_help=False)
        group = parser.add_argument_group("output")
        group.add_argument("--out", help="write to this file instead of stdout")
        group.add_argument("--format", choices=list(choices), default=default)
        return parser

    parser = argparse.ArgumentParser(
        prog="c3sim",
        description="Performance model for concurrent computation and communication on GPU nodes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = commands.add_parser(
        "classify",
        parents=[config, selection, output("table", ("table", "csv", "json"))],
        help="boundedness, taxonomy and ideal speedup per scenario",
    )
    p.set_defaults(func=cmd_classify)

    p = commands.add_parser(
        "plan",
        parents=[config, single, output("table", ("table", "json"))],
        help="CU partition plan for one scenario",
    )
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default=StrategyName.C3_RP.value)
    p.set_defaults(func=cmd_plan)

    p = commands.add_parser(
        "conccl-plan",
        parents=[config, output("table", ("table", "json"))],
        help="build, validate and cost a DMA transfer plan (--out receives the plan JSON)",
    )
    p.add_argument("--collective", choices=COLLECTIVE_CHOICES, required=True)
    p.add_argument("--ranks", type=int, default=8)
    p.add_argument("--payload", required=True, help="total payload, e.g. 896M or 1GB")
    p.set_defaults(func=cmd_conccl_plan)

    p = commands.add_parser(
        "sweep",
        parents=[config, selection, output("csv", ("csv", "json", "table"))],
        help="simulate scenarios × strategies with aggregates",
    )
    p.add_argument("--strategy", action="append", choices=STRATEGY_CHOICES, help="repeatable; default all")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = commands.add_parser(
        "simulate",
        parents=[config, single, output("table", ("table", "json"))],
        help="phase timeline of one scenario under one strategy",
    )
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default=StrategyName.C3_RP.value)
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser(
        "crossover",
        parents=[config, output("table", ("table", "csv", "json"))],
        help="DMA plan cost against the CU collective over payload sizes",
    )
    p.add_argument("--collective", choices=COLLECTIVE_CHOICES, default=CollectiveKind.ALL_GATHER.value)
    p.add_argument("--ranks", type=int, default=8)
    p.add_argument("--payloads", default=DEFAULT_CROSSOVER_PAYLOADS, help="comma-separated sizes")
    p.set_defaults(func=cmd_crossover)

    p = commands.add_parser(
        "calibrate",
        parents=[config],
        help="fit co-run penalties (and overheads) to measured speedups",
    )
    p.add_argument("--measured", required=True, help="CSV: scenario_id,strategy,measured_speedup[,collective]")
    p.add_argument("--out", required=True, help="fitted model parameters JSON")
    p.add_argument("--machine-out", help="machine descriptor with fitted overheads")
    p.add_argument("--fit-overheads", action="store_true", help="also fit the DMA launch and sync overheads")
    p.add_argument("--format", choices=["table", "json"], default="table", help="residual report format")
    p.set_defaults(func=cmd_calibrate)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("c3sim").setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Args:
        argv: Arguments without the program name; sys.argv[1:] if None

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except C3Error as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
