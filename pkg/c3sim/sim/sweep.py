"""
Batch simulation over scenarios × strategies with grouped aggregates.

Rows come back in canonical order (scenario id, collective, strategy) no
matter how many worker processes ran them, so identical inputs always
produce identical tables.
"""

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from statistics import fmean
from typing import Dict, List, Optional, Sequence, Tuple

from ..hardware.machine import MachineDescriptor
from ..interference.tables import SlowdownTables
from ..params import ModelParams
from ..taxonomy import classify_c3
from ..workload.kernels import C3Scenario
from ..workload.roofline import isolated_collective_time, roofline_gemm_time
from .engine import SimTimeline, StrategyName, simulate

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scenario_id", "collective", "taxonomy", "strategy",
    "makespan_s", "speedup", "ideal", "fraction_of_ideal",
]
AGGREGATE_COLUMNS = ["group", "collective", "taxonomy", "strategy", "mean_fraction_of_ideal", "count"]

C3_BEST = "c3_best"
GROUP_COLLECTIVE_TAXONOMY = "collective×taxonomy"
GROUP_COLLECTIVE = "collective"
GROUP_OVERALL = "overall"


@dataclass(frozen=True)
class SweepRow:
    scenario_id: str
    collective: str
    taxonomy: str
    strategy: str
    makespan: float
    speedup: float
    ideal: float
    fraction_of_ideal: float
    timeline: SimTimeline = field(compare=False, repr=False, default=None)

    def to_dict(self) -> Dict[str, object]:
        return {
            "scenario_id": self.scenario_id,
            "collective": self.collective,
            "taxonomy": self.taxonomy,
            "strategy": self.strategy,
            "makespan_s": self.makespan,
            "speedup": self.speedup,
            "ideal": self.ideal,
            "fraction_of_ideal": self.fraction_of_ideal,
        }


@dataclass(frozen=True)
class AggregateRow:
    group: str
    collective: str
    taxonomy: str
    strategy: str
    mean_fraction_of_ideal: float
    count: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "group": self.group,
            "collective": self.collective,
            "taxonomy": self.taxonomy,
            "strategy": self.strategy,
            "mean_fraction_of_ideal": self.mean_fraction_of_ideal,
            "count": self.count,
        }


@dataclass
class SweepResult:
    rows: List[SweepRow]
    aggregates: List[AggregateRow]

    def mean_fraction(
        self,
        strategy: str,
        collective: Optional[str] = None,
        taxonomy: Optional[str] = None,
    ) -> float:
        """Looks up one aggregate; omitted keys select the coarser grouping."""
        if collective is None:
            group = GROUP_OVERALL
        elif taxonomy is None:
            group = GROUP_COLLECTIVE
        else:
            group = GROUP_COLLECTIVE_TAXONOMY
        for agg in self.aggregates:
            if (agg.group, agg.strategy, agg.collective or None, agg.taxonomy or None) == (
                group, strategy, collective, taxonomy
            ):
                return agg.mean_fraction_of_ideal
        raise KeyError((group, strategy, collective, taxonomy))


def scenario_taxonomy(scenario: C3Scenario, md: MachineDescriptor, params: ModelParams) -> str:
    """Expected label when the dataset has one, else the roofline label."""
    if scenario.expected_taxonomy is not None:
        return scenario.expected_taxonomy.value
    t_gemm = roofline_gemm_time(scenario.gemm, md, params.efficiency)
    t_comm = isolated_collective_time(scenario.collective, md, params.efficiency)
    if t_gemm > 0 and t_comm > 0:
        return classify_c3(t_gemm, t_comm).value.value
    return "n/a"


def _run_one(
    task: Tuple[C3Scenario, StrategyName, str],
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
) -> SweepRow:
    scenario, strategy, taxonomy = task
    timeline = simulate(scenario, strategy, md, tables, params)
    return SweepRow(
        scenario_id=scenario.id,
        collective=scenario.collective.kind.value,
        taxonomy=taxonomy,
        strategy=strategy.value,
        makespan=timeline.makespan,
        speedup=timeline.speedup,
        ideal=timeline.ideal,
        fraction_of_ideal=timeline.fraction_of_ideal,
        timeline=timeline,
    )


def sweep(
    scenarios: Sequence[C3Scenario],
    strategies: Sequence[StrategyName],
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
    workers: int = 1,
) -> SweepResult:
    """
    Simulates every (scenario, strategy) pair.

    Args:
        scenarios: Scenarios to run
        strategies: Strategies to run each scenario under
        md: Machine descriptor
        tables: Slowdown tables
        params: Model parameters
        workers: Worker processes; 1 runs in-process

    Returns:
        SweepResult with canonical rows and aggregates of mean
        fraction-of-ideal by (collective, taxonomy), by collective and overall
    """
    tasks = [
        (scenario, strategy, scenario_taxonomy(scenario, md, params))
        for scenario in scenarios
        for strategy in strategies
    ]
    run = partial(_run_one, md=md, tables=tables, params=params)

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(run, tasks))
    else:
        rows = [run(task) for task in tasks]

    rows.sort(key=lambda r: (r.scenario_id, r.collective, r.strategy))
    logger.info("Sweep finished: %d scenarios × %d strategies", len(scenarios), len(strategies))
    return SweepResult(rows=rows, aggregates=aggregate(rows, strategies))


def aggregate(rows: Sequence[SweepRow], strategies: Sequence[StrategyName]) -> List[AggregateRow]:
    """Mean fraction-of-ideal per grouping, plus a per-scenario best-of-c3 entry."""
    names = [s.value for s in strategies]
    c3_names = [s.value for s in strategies if s.is_c3]

    samples: Dict[Tuple[str, str], List[Tuple[str, str, float]]] = {}
    for row in rows:
        samples.setdefault((row.scenario_id, row.collective), []).append(
            (row.strategy, row.taxonomy, row.fraction_of_ideal)
        )

    # (collective, taxonomy, strategy, fraction) per scenario instance
    points: List[Tuple[str, str, str, float]] = []
    for (_, collective), entries in sorted(samples.items()):
        for strategy, taxonomy, fraction in entries:
            points.append((collective, taxonomy, strategy, fraction))
        c3 = [fraction for strategy, _, fraction in entries if strategy in c3_names]
        if c3:
            points.append((collective, entries[0][1], C3_BEST, max(c3)))

    order = names + ([C3_BEST] if c3_names else [])
    result = []

    def emit(group: str, key_of):
        buckets: Dict[Tuple[str, str, str], List[float]] = {}
        for collective, taxonomy, strategy, fraction in points:
            buckets.setdefault(key_of(collective, taxonomy, strategy), []).append(fraction)
        for key in sorted(buckets, key=lambda k: (k[0], k[1], order.index(k[2]))):
            values = buckets[key]
            result.append(AggregateRow(group, key[0], key[1], key[2], fmean(values), len(values)))

    emit(GROUP_COLLECTIVE_TAXONOMY, lambda c, t, s: (c, t, s))
    emit(GROUP_COLLECTIVE, lambda c, t, s: (c, "", s))
    emit(GROUP_OVERALL, lambda c, t, s: ("", "", s))
    return result


# ----- Output -----

def sweep_to_csv(result: SweepResult) -> str:
    """Row block, a blank line, then the aggregate block (omitted when empty)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in result.rows:
        writer.writerow([row.to_dict()[column] for column in CSV_COLUMNS])
    if result.aggregates:
        writer.writerow([])
        writer.writerow(AGGREGATE_COLUMNS)
        for agg in result.aggregates:
            writer.writerow([agg.to_dict()[column] for column in AGGREGATE_COLUMNS])
    return buffer.getvalue()


def sweep_to_json(result: SweepResult) -> str:
    return json.dumps(
        {
            "rows": [row.to_dict() for row in result.rows],
            "aggregates": [agg.to_dict() for agg in result.aggregates],
        },
        indent=2,
    ) + "\n"
