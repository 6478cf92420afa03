"""
Timing model for DMA transfer plans.

One CPU thread submits transfers in plan order, one every
cpu_launch_overhead seconds. A transfer starts once it is submitted, its
engine has drained earlier work (FIFO) and its (src, dst) link is free;
it then streams at efficiency × link bandwidth. A single completion wait
of dma_sync_overhead closes the collective. Engines have no bandwidth cap
of their own.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from ..hardware.machine import MachineDescriptor
from ..workload.kernels import CollectiveKind, CollectiveOp, EfficiencyParams
from ..workload.roofline import roofline_collective_time
from .plan import TransferPlan, plan_collective


@dataclass(frozen=True)
class PlanCost:
    """
    total: seconds from first submission to completion of the final wait
    per_engine: for each engine index, the latest finish across GPUs
    wire: streaming time of the longest single transfer
    """
    total: float
    per_engine: Tuple[float, ...]
    wire: float


def plan_cost(plan: TransferPlan, md: MachineDescriptor, params: EfficiencyParams) -> PlanCost:
    link_bw = params.efficiency * md.link_bandwidth_unidir
    engine_free: Dict[Tuple[int, int], float] = {}
    link_free: Dict[Tuple[int, int], float] = {}
    per_engine = [0.0] * plan.dma_engines

    finish_max = 0.0
    wire = 0.0
    for i, t in enumerate(plan.transfers):
        ready = i * md.cpu_launch_overhead
        start = max(
            ready,
            engine_free.get((t.src_gpu, t.engine_id), 0.0),
            link_free.get((t.src_gpu, t.dst_gpu), 0.0),
        )
        duration = t.length / link_bw
        finish = start + duration

        engine_free[(t.src_gpu, t.engine_id)] = finish
        link_free[(t.src_gpu, t.dst_gpu)] = finish
        per_engine[t.engine_id] = max(per_engine[t.engine_id], finish)
        finish_max = max(finish_max, finish)
        wire = max(wire, duration)

    total = finish_max + md.dma_sync_overhead if plan.transfers else 0.0
    return PlanCost(total=total, per_engine=tuple(per_engine), wire=wire)


def dma_collective_time(c: CollectiveOp, md: MachineDescriptor, params: EfficiencyParams) -> float:
    """Isolated time of a collective run through its DMA plan."""
    if c.payload_bytes == 0 or c.n_ranks == 1:
        return 0.0
    return plan_cost(plan_collective(c, md), md, params).total


@dataclass(frozen=True)
class CrossoverPoint:
    payload_bytes: int
    dma_time: float
    cu_time: float

    @property
    def ratio(self) -> float:
        return self.dma_time / self.cu_time


def crossover_curve(
    kind: CollectiveKind,
    payloads: Sequence[int],
    n_ranks: int,
    md: MachineDescriptor,
    params: EfficiencyParams,
) -> List[CrossoverPoint]:
    """
    DMA plan time against the CU-kernel roofline (launch cost included)
    for each payload. Ratios above 1 mean the DMA path is slower.
    """
    points = []
    for payload in payloads:
        c = CollectiveOp(kind=kind, payload_bytes=payload, n_ranks=n_ranks)
        points.append(
            CrossoverPoint(
                payload_bytes=payload,
                dma_time=dma_collective_time(c, md, params),
                cu_time=roofline_collective_time(c, md, params, include_overhead=True),
            )
        )
    return points
