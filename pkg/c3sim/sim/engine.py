"""
Two-phase fluid simulator for one GEMM and one collective.

Phase 1 runs both kernels together. Each progresses at
1 / (CU slowdown × memory stretch × co-run penalty); a DMA-backed
collective has no CU slowdown and does its plan's total time as work.
When the first kernel finishes, phase 2 runs the survivor alone: at full
rate on the whole GPU by default, or at its phase-1 CU share when
ModelParams.restore_on_retire is off. The serial baseline runs the GEMM
then the collective, each alone.

Does NOT model waves, occupancy or more than two kernels.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..conccl.cost import dma_collective_time
from ..hardware.machine import MachineDescriptor
from ..interference.memory import shared_memory_factor
from ..interference.penalty import Backend
from ..interference.tables import (
    KernelClass,
    SlowdownTables,
    comm_saturation_cus,
    gemm_kernel_class,
    slowdown_at,
    table_for,
)
from ..params import ModelParams
from ..strategy.planner import (
    COMM,
    GEMM,
    KernelDemand,
    PartitionPlan,
    conccl_rp_plan,
    partition_candidates,
    partition_heuristic,
    predict_partition,
    schedule_priority_order,
)
from ..taxonomy import fraction_of_ideal, ideal_speedup
from ..utils.exceptions import (
    InvariantViolationError,
    UnknownStrategyError,
    WorkConservationError,
)
from ..workload.kernels import C3Scenario
from ..workload.roofline import (
    collective_bandwidth_demand,
    estimate_workgroups,
    gemm_bandwidth_demand,
    isolated_collective_time,
    roofline_gemm_time,
)

logger = logging.getLogger(__name__)

WORK_TOLERANCE = 1e-9


class StrategyName(Enum):
    SERIAL = "serial"
    C3_BASE = "c3_base"
    C3_SP = "c3_sp"
    C3_RP = "c3_rp"
    C3_SP_RP = "c3_sp_rp"
    CONCCL = "conccl"
    CONCCL_RP = "conccl_rp"

    @classmethod
    def parse(cls, name: str) -> "StrategyName":
        try:
            return cls(name)
        except ValueError:
            raise UnknownStrategyError(name)

    @property
    def is_c3(self) -> bool:
        return self.value.startswith("c3_")


ALL_STRATEGIES = tuple(StrategyName)


# ----- Allocation -----

@dataclass(frozen=True)
class CuAllocation:
    """How a strategy splits the GPU; serial gives each kernel every CU in turn."""
    cus_gemm: int
    cus_comm: int
    order: Tuple[str, ...]
    backend: Backend = Backend.CU
    cus_idle: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cus_gemm": self.cus_gemm,
            "cus_comm": self.cus_comm,
            "cus_idle": self.cus_idle,
            "backend": self.backend.value,
            "order": list(self.order),
        }


def _priority_order(scenario: C3Scenario, params: ModelParams) -> Tuple[str, ...]:
    ordered = schedule_priority_order([
        KernelDemand(GEMM, estimate_workgroups(scenario.gemm, params.gemm_tile)),
        KernelDemand(COMM, estimate_workgroups(scenario.collective), is_communication=True),
    ])
    return tuple(k.name for k in ordered)


def allocate_cus(
    scenario: C3Scenario,
    strategy: StrategyName,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
) -> CuAllocation:
    """
    CU split and launch order a strategy produces.

    c3_base models the hardware scheduler handing the GEMM, launched first,
    as many CUs as it has workgroups, leaving the collective one grain.
    """
    cus = md.cus_per_gpu
    grain = md.min_cu_grain

    if strategy == StrategyName.SERIAL:
        return CuAllocation(cus_gemm=cus, cus_comm=cus, order=(GEMM, COMM))

    if strategy in (StrategyName.C3_BASE, StrategyName.C3_SP) and cus < 2 * grain:
        raise InvariantViolationError("cus_per_gpu", "too few CUs to co-schedule two kernels")

    if strategy == StrategyName.C3_BASE:
        workgroups = estimate_workgroups(scenario.gemm, params.gemm_tile)
        cus_gemm = min(md.round_up_to_grain(min(workgroups, cus)), cus - grain)
        return CuAllocation(cus_gemm=cus_gemm, cus_comm=cus - cus_gemm, order=(GEMM, COMM))

    if strategy == StrategyName.C3_SP:
        saturation = comm_saturation_cus(scenario.collective.kind)
        cus_comm = min(md.round_up_to_grain(saturation), cus - grain)
        return CuAllocation(
            cus_gemm=cus - cus_comm, cus_comm=cus_comm, order=_priority_order(scenario, params)
        )

    if strategy in (StrategyName.C3_RP, StrategyName.C3_SP_RP):
        plan = partition_heuristic(scenario, md, tables, params)
        order = plan.schedule_order
        if strategy == StrategyName.C3_SP_RP:
            order = _priority_order(scenario, params)
        return CuAllocation(cus_gemm=plan.cus_gemm, cus_comm=plan.cus_comm, order=order)

    if strategy == StrategyName.CONCCL:
        return CuAllocation(cus_gemm=cus, cus_comm=0, order=(GEMM, COMM), backend=Backend.DMA)

    plan = conccl_rp_plan(scenario, md, tables, params)
    return CuAllocation(
        cus_gemm=plan.cus_gemm,
        cus_comm=0,
        order=plan.schedule_order,
        backend=Backend.DMA,
        cus_idle=plan.cus_idle,
    )



def plan_for_strategy(
    scenario: C3Scenario,
    strategy: StrategyName,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
) -> PartitionPlan:
    """
    Partition plan a concurrent strategy runs with, plus its full-overlap
    prediction. The partitioning strategies carry their candidate sweep.

    Raises:
        InvariantViolationError: For the serial strategy, which has no partition
    """
    if strategy == StrategyName.SERIAL:
        raise InvariantViolationError("strategy", "serial runs the kernels back to back; nothing to partition")
    if strategy == StrategyName.C3_RP:
        return partition_heuristic(scenario, md, tables, params)
    if strategy == StrategyName.C3_SP_RP:
        plan = partition_heuristic(scenario, md, tables, params)
        return dataclasses.replace(plan, schedule_order=_priority_order(scenario, params))
    if strategy == StrategyName.CONCCL_RP:
        return conccl_rp_plan(scenario, md, tables, params)

    allocation = allocate_cus(scenario, strategy, md, tables, params)
    evaluation = predict_partition(
        scenario, md, tables, params, allocation.backend, allocation.cus_gemm, allocation.cus_comm
    )
    return PartitionPlan(
        comm_backend=allocation.backend,
        cus_comm=allocation.cus_comm,
        cus_gemm=allocation.cus_gemm,
        cus_idle=allocation.cus_idle,
        schedule_order=allocation.order,
        predicted_makespan=evaluation.predicted,
    ).validate(md)


# ----- Timeline types -----

@dataclass(frozen=True)
class KernelExec:
    """A kernel's total work (isolated seconds) and its phase-1 execution setup."""
    name: str
    work: float
    rate: float
    cus: int
    backend: Backend

    def __post_init__(self):
        if not self.work > 0:
            raise InvariantViolationError(f"{self.name}.work", f"must be > 0, got {self.work}")
        if not self.rate > 0:
            raise InvariantViolationError(f"{self.name}.rate", f"must be > 0, got {self.rate}")


@dataclass(frozen=True)
class KernelPhase:
    name: str
    rate: float
    cus: int
    backend: Backend


@dataclass(frozen=True)
class Phase:
    start: float
    end: float
    kernels: Tuple[KernelPhase, ...]

    @property
    def duration(self) -> float:
        return self.end - self.start

    def rate_of(self, name: str) -> float:
        for kernel in self.kernels:
            if kernel.name == name:
                return kernel.rate
        return 0.0


@dataclass(frozen=True)
class SimTimeline:
    scenario_id: str
    collective: str
    strategy: StrategyName
    phases: Tuple[Phase, ...]
    makespan: float
    serial_time: float
    speedup: float
    ideal: float
    fraction_of_ideal: float
    t_gemm: float
    t_comm: float
    allocation: CuAllocation
    kernels: Tuple[KernelExec, ...] = field(default=())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "collective": self.collective,
            "strategy": self.strategy.value,
            "makespan_s": self.makespan,
            "serial_time_s": self.serial_time,
            "speedup": self.speedup,
            "ideal": self.ideal,
            "fraction_of_ideal": self.fraction_of_ideal,
            "t_gemm_s": self.t_gemm,
            "t_comm_s": self.t_comm,
            "allocation": self.allocation.to_dict(),
            "phases": [
                {
                    "start": p.start,
                    "end": p.end,
                    "kernels": [
                        {"name": k.name, "rate": k.rate, "cus": k.cus, "backend": k.backend.value}
                        for k in p.kernels
                    ],
                }
                for p in self.phases
            ],
        }


# ----- Simulation -----

def _serial_phases(t_gemm: float, t_comm: float, md: MachineDescriptor) -> List[Phase]:
    phases = []
    clock = 0.0
    if t_gemm > 0:
        phases.append(Phase(clock, t_gemm, (KernelPhase(GEMM, 1.0, md.cus_per_gpu, Backend.CU),)))
        clock = t_gemm
    if t_comm > 0:
        phases.append(Phase(clock, t_gemm + t_comm, (KernelPhase(COMM, 1.0, md.cus_per_gpu, Backend.CU),)))
    return phases


def _memory_factors(scenario: C3Scenario, md: MachineDescriptor, params: ModelParams) -> List[float]:
    if not params.memory_contention:
        return [1.0, 1.0]
    eff = params.efficiency
    c = scenario.collective
    comm_demand = 0.0
    if c.payload_bytes > 0 and c.n_ranks > 1:
        comm_demand = collective_bandwidth_demand(c, md, eff)
    demands = [gemm_bandwidth_demand(scenario.gemm, md, eff), comm_demand]
    return shared_memory_factor(demands, eff.efficiency * md.hbm_bandwidth)


def _concurrent_phases(
    gemm: KernelExec,
    comm: KernelExec,
    solo_rates: Dict[str, float],
    solo_cus: Dict[str, int],
) -> List[Phase]:
    """Runs both kernels until one finishes, then the survivor alone."""
    finish = {k.name: k.work / k.rate for k in (gemm, comm)}
    t1 = min(finish.values())
    phase1 = Phase(0.0, t1, tuple(KernelPhase(k.name, k.rate, k.cus, k.backend) for k in (gemm, comm)))

    survivors = [k for k in (gemm, comm) if finish[k.name] > t1]
    if not survivors:
        return [phase1]

    survivor = survivors[0]
    remaining = survivor.work - survivor.rate * t1
    rate = solo_rates[survivor.name]
    phase2 = Phase(
        t1,
        t1 + remaining / rate,
        (KernelPhase(survivor.name, rate, solo_cus[survivor.name], survivor.backend),),
    )
    return [phase1, phase2]


def simulate_allocation(
    scenario: C3Scenario,
    allocation: CuAllocation,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
    strategy: StrategyName,
) -> SimTimeline:
    """Simulates a scenario under an explicit allocation."""
    eff = params.efficiency
    t_gemm = roofline_gemm_time(scenario.gemm, md, eff)
    t_comm = isolated_collective_time(scenario.collective, md, eff)
    serial_time = t_gemm + t_comm

    if strategy == StrategyName.SERIAL:
        phases = _serial_phases(t_gemm, t_comm, md)
        kernels = []
        if t_gemm > 0:
            kernels.append(KernelExec(GEMM, t_gemm, 1.0, md.cus_per_gpu, Backend.CU))
        if t_comm > 0:
            kernels.append(KernelExec(COMM, t_comm, 1.0, md.cus_per_gpu, Backend.CU))
    else:
        phases, kernels = _run_concurrent(scenario, allocation, md, tables, params, t_gemm, t_comm)

    makespan = phases[-1].end if phases else 0.0
    speedup = serial_time / makespan if makespan > 0 else 1.0

    if t_gemm > 0 and t_comm > 0:
        ideal = ideal_speedup(t_gemm, t_comm)
        if speedup > ideal * (1.0 + 1e-12):
            logger.warning(
                "%s/%s under %s: speedup %.6g exceeds ideal %.6g",
                scenario.id, scenario.collective.kind.value, strategy.value, speedup, ideal,
            )
        fraction = min(fraction_of_ideal(speedup, ideal), 1.0)
    else:
        ideal, fraction = 1.0, 0.0

    return SimTimeline(
        scenario_id=scenario.id,
        collective=scenario.collective.kind.value,
        strategy=strategy,
        phases=tuple(phases),
        makespan=makespan,
        serial_time=serial_time,
        speedup=speedup,
        ideal=ideal,
        fraction_of_ideal=fraction,
        t_gemm=t_gemm,
        t_comm=t_comm,
        allocation=allocation,
        kernels=tuple(kernels),
    )


def _run_concurrent(
    scenario: C3Scenario,
    allocation: CuAllocation,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
    t_gemm: float,
    t_comm: float,
) -> Tuple[List[Phase], List[KernelExec]]:
    backend = allocation.backend
    gemm_class = gemm_kernel_class(scenario.gemm, md)
    comm_class = KernelClass.for_collective(scenario.collective.kind)
    gemm_table = table_for(tables, gemm_class)

    if backend == Backend.DMA:
        comm_work = dma_collective_time(scenario.collective, md, params.efficiency)
    else:
        comm_work = t_comm

    # A kernel with nothing to do just leaves the other running alone.
    if comm_work <= 0 or t_gemm <= 0:
        name, work, kernel_backend = (GEMM, t_gemm, Backend.CU) if t_gemm > 0 else (COMM, comm_work, backend)
        if work <= 0:
            return [], []
        cus = md.cus_per_gpu if kernel_backend == Backend.CU else 0
        return (
            [Phase(0.0, work, (KernelPhase(name, 1.0, cus, kernel_backend),))],
            [KernelExec(name, work, 1.0, cus, kernel_backend)],
        )

    mem_gemm, mem_comm = _memory_factors(scenario, md, params)
    penalties = params.penalties

    gemm_slowdown = slowdown_at(gemm_table, allocation.cus_gemm)
    gemm_rate = 1.0 / (gemm_slowdown * mem_gemm * penalties.factor(gemm_class, backend))

    if backend == Backend.DMA:
        comm_slowdown = 1.0
        comm_rate = 1.0 / (mem_comm * penalties.factor(comm_class, Backend.DMA))
    else:
        comm_slowdown = slowdown_at(table_for(tables, comm_class), allocation.cus_comm)
        comm_rate = 1.0 / (comm_slowdown * mem_comm * penalties.factor(comm_class, Backend.CU))

    gemm = KernelExec(GEMM, t_gemm, gemm_rate, allocation.cus_gemm, Backend.CU)
    comm = KernelExec(COMM, comm_work, comm_rate, allocation.cus_comm, backend)

    if params.restore_on_retire:
        solo_rates = {GEMM: 1.0, COMM: 1.0}
        solo_cus = {GEMM: md.cus_per_gpu, COMM: md.cus_per_gpu if backend == Backend.CU else 0}
    else:
        solo_rates = {GEMM: 1.0 / gemm_slowdown, COMM: 1.0 / comm_slowdown}
        solo_cus = {GEMM: allocation.cus_gemm, COMM: allocation.cus_comm}

    phases = _concurrent_phases(gemm, comm, solo_rates, solo_cus)
    logger.debug(
        "%s/%s: gemm rate %.4g on %d CUs, comm rate %.4g (%s), t1=%.6g, makespan=%.6g",
        scenario.id, scenario.collective.kind.value, gemm_rate, allocation.cus_gemm,
        comm_rate, backend.value, phases[0].end, phases[-1].end,
    )
    return phases, [gemm, comm]


def simulate(
    scenario: C3Scenario,
    strategy: StrategyName,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
) -> SimTimeline:
    """
    Simulates a scenario under a named strategy.

    Args:
        scenario: GEMM/collective pair
        strategy: Concurrency strategy
        md: Machine descriptor
        tables: Slowdown tables for every kernel class involved
        params: Efficiency, penalties and simulator policies

    Returns:
        SimTimeline with phases, makespan, speedup over serial, ideal speedup
        and fraction of ideal in [0, 1]
    """
    allocation = allocate_cus(scenario, strategy, md, tables, params)
    return simulate_allocation(scenario, allocation, md, tables, params, strategy)


# ----- Audits -----

def work_conservation_check(
    timeline: SimTimeline,
    kernels: Optional[Sequence[KernelExec]] = None,
) -> None:
    """
    Checks each kernel's integrated progress equals its work.

    Raises:
        WorkConservationError: If any kernel is off by more than 1e-9 relative
    """
    kernels = timeline.kernels if kernels is None else kernels
    for kernel in kernels:
        done = sum(phase.duration * phase.rate_of(kernel.name) for phase in timeline.phases)
        if abs(done - kernel.work) > WORK_TOLERANCE * kernel.work:
            raise WorkConservationError(kernel.name, kernel.work, done)


@dataclass(frozen=True)
class ExhaustivePartition:
    """Simulator-evaluated makespan of every partition candidate."""
    best_cus_comm: int
    best_makespan: float
    evaluations: Tuple[Tuple[int, float], ...]


def exhaustive_partition(
    scenario: C3Scenario,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
) -> ExhaustivePartition:
    """Best CU reservation by simulation over the heuristic's candidate set."""
    evaluations = []
    for c in partition_candidates(md):
        allocation = CuAllocation(cus_gemm=md.cus_per_gpu - c, cus_comm=c, order=(GEMM, COMM))
        timeline = simulate_allocation(scenario, allocation, md, tables, params, StrategyName.C3_RP)
        evaluations.append((c, timeline.makespan))

    best_c, best_makespan = evaluations[0]
    for c, makespan in evaluations[1:]:
        if makespan < best_makespan:
            best_c, best_makespan = c, makespan
    return ExhaustivePartition(best_c, best_makespan, tuple(evaluations))
