"""
Runtime heuristics for co-scheduling a GEMM with a collective.

Single source of truth for:
- schedule prioritization (launch the kernel with fewer workgroups first)
- resource partitioning (sweep power-of-two CU reservations for the
  collective and keep the one with the lowest predicted max(GEMM, comm))
- the DMA-offload plan that idles one CU grain for memory-bound GEMMs

Predictions assume full overlap; the simulator is what evaluates plans.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

from ..conccl.cost import dma_collective_time
from ..hardware.machine import MachineDescriptor
from ..interference.penalty import Backend
from ..interference.tables import (
    KernelClass,
    SlowdownTables,
    gemm_kernel_class,
    slowdown_at,
    table_for,
)
from ..params import ModelParams
from ..utils.exceptions import InvariantViolationError
from ..workload.kernels import C3Scenario
from ..workload.roofline import isolated_collective_time, roofline_gemm_time

logger = logging.getLogger(__name__)

GEMM = "gemm"
COMM = "comm"


# ----- Plan types -----

@dataclass(frozen=True)
class CandidateEvaluation:
    """One row of the partition sweep."""
    cus_comm: int
    cus_gemm: int
    gemm_time: float
    comm_time: float

    @property
    def predicted(self) -> float:
        return max(self.gemm_time, self.comm_time)


@dataclass(frozen=True)
class PartitionPlan:
    comm_backend: Backend
    cus_comm: int
    cus_gemm: int
    cus_idle: int
    schedule_order: Tuple[str, ...]
    predicted_makespan: float
    candidates: Tuple[CandidateEvaluation, ...] = ()

    def validate(self, md: MachineDescriptor) -> "PartitionPlan":
        """
        Checks the plan against a machine.

        Raises:
            InvariantViolationError: If CUs do not add up, break the grain,
                or a CU-backend collective gets less than one grain
        """
        if self.cus_comm + self.cus_gemm + self.cus_idle != md.cus_per_gpu:
            raise InvariantViolationError(
                "partition",
                f"{self.cus_comm} + {self.cus_gemm} + {self.cus_idle} != {md.cus_per_gpu} CUs",
            )
        for name in ("cus_comm", "cus_gemm", "cus_idle"):
            value = getattr(self, name)
            if value < 0 or value % md.min_cu_grain != 0:
                raise InvariantViolationError(name, f"{value} is not a multiple of {md.min_cu_grain}")
        if self.comm_backend == Backend.CU and self.cus_comm < md.min_cu_grain:
            raise InvariantViolationError("cus_comm", "a CU-based collective needs at least one grain")
        if self.comm_backend == Backend.DMA and self.cus_comm != 0:
            raise InvariantViolationError("cus_comm", "a DMA collective takes no CUs")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "comm_backend": self.comm_backend.value,
            "cus_comm": self.cus_comm,
            "cus_gemm": self.cus_gemm,
            "cus_idle": self.cus_idle,
            "schedule_order": list(self.schedule_order),
            "predicted_makespan": self.predicted_makespan,
            "candidates": [
                {
                    "cus_comm": c.cus_comm,
                    "cus_gemm": c.cus_gemm,
                    "gemm_time": c.gemm_time,
                    "comm_time": c.comm_time,
                    "predicted": c.predicted,
                }
                for c in self.candidates
            ],
        }


@dataclass(frozen=True)
class KernelDemand:
    name: str
    workgroups: int
    is_communication: bool = False


# ----- Schedule prioritization -----

def schedule_priority_order(kernels: Sequence[KernelDemand]) -> List[KernelDemand]:
    """
    Launch order: fewest workgroups first, communication first on ties.

    Launching the small kernel first keeps the large one from occupying
    every CU and starving it.
    """
    for kernel in kernels:
        if kernel.workgroups < 1:
            raise InvariantViolationError(kernel.name, f"workgroups must be >= 1, got {kernel.workgroups}")
    return sorted(kernels, key=lambda k: (k.workgroups, 0 if k.is_communication else 1))


# ----- Prediction -----

def predict_partition(
    scenario: C3Scenario,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
    backend: Backend,
    cus_gemm: int,
    cus_comm: int,
) -> CandidateEvaluation:
    """
    Full-overlap prediction for one split of the GPU.

    Each kernel's isolated time is stretched by its CU-loss slowdown and its
    co-run penalty on the collective's backend. A DMA collective takes its
    plan's cost and has no CU slowdown.

    Raises:
        MissingTableError: If a kernel class involved has no table
    """
    eff = params.efficiency
    gemm_class = gemm_kernel_class(scenario.gemm, md)
    comm_class = KernelClass.for_collective(scenario.collective.kind)

    gemm_time = (
        roofline_gemm_time(scenario.gemm, md, eff)
        * slowdown_at(table_for(tables, gemm_class), cus_gemm)
        * params.penalties.factor(gemm_class, backend)
    )
    if backend == Backend.DMA:
        comm_time = dma_collective_time(scenario.collective, md, eff) * params.penalties.factor(comm_class, backend)
    else:
        comm_time = (
            isolated_collective_time(scenario.collective, md, eff)
            * slowdown_at(table_for(tables, comm_class), cus_comm)
            * params.penalties.factor(comm_class, backend)
        )
    return CandidateEvaluation(cus_comm=cus_comm, cus_gemm=cus_gemm, gemm_time=gemm_time, comm_time=comm_time)


# ----- Resource partitioning -----

def partition_candidates(md: MachineDescriptor) -> List[int]:
    """Power-of-two multiples of the grain that leave the GEMM at least one grain."""
    candidates = []
    cus = md.min_cu_grain
    while cus <= md.cus_per_gpu - md.min_cu_grain:
        candidates.append(cus)
        cus *= 2
    if not candidates:
        raise InvariantViolationError(
            "cus_per_gpu", f"{md.cus_per_gpu} CUs cannot be split into two grains of {md.min_cu_grain}"
        )
    return candidates


def partition_heuristic(
    scenario: C3Scenario,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
) -> PartitionPlan:
    """
    Picks the CU reservation for a CU-based collective.

    For each candidate c the prediction is
        max(t_gemm · s_gemm(cus − c) · pen_gemm, t_comm · s_comm(c) · pen_comm)
    with CU-backend co-run penalties from params (unit penalties give the
    plain table lookup). The smallest c wins ties.

    Raises:
        MissingTableError: If either kernel class has no table
    """
    evaluations = []
    best = None
    for c in partition_candidates(md):
        evaluation = predict_partition(scenario, md, tables, params, Backend.CU, md.cus_per_gpu - c, c)
        evaluations.append(evaluation)
        if best is None or evaluation.predicted < best.predicted:
            best = evaluation

    logger.debug(
        "Partition for %s (%s): comm=%d CUs, predicted %.6g s",
        scenario.id, scenario.collective.kind.value, best.cus_comm, best.predicted,
    )
    return PartitionPlan(
        comm_backend=Backend.CU,
        cus_comm=best.cus_comm,
        cus_gemm=best.cus_gemm,
        cus_idle=0,
        schedule_order=(GEMM, COMM),
        predicted_makespan=best.predicted,
        candidates=tuple(evaluations),
    ).validate(md)


# ----- DMA offload -----

def conccl_rp_plan(
    scenario: C3Scenario,
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams = None,
) -> PartitionPlan:
    """
    Collective on DMA engines; a memory-bound GEMM leaves one grain idle.

    Giving a memory-bound GEMM slightly fewer CUs eases its contention and
    runs it faster, so its plan idles min_cu_grain CUs.
    """
    params = params or ModelParams()

    gemm_class = gemm_kernel_class(scenario.gemm, md)
    cus_idle = md.min_cu_grain if gemm_class == KernelClass.GEMM_MEMORY_BOUND else 0
    cus_gemm = md.cus_per_gpu - cus_idle
    evaluation = predict_partition(scenario, md, tables, params, Backend.DMA, cus_gemm, 0)

    return PartitionPlan(
        comm_backend=Backend.DMA,
        cus_comm=0,
        cus_gemm=cus_gemm,
        cus_idle=cus_idle,
        schedule_order=(GEMM, COMM),
        predicted_makespan=evaluation.predicted,
    ).validate(md)
