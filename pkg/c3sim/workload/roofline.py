"""
Roofline estimates for GEMMs and direct-algorithm collectives.

Single source of truth for isolated kernel times, boundedness and
bandwidth demand. Every function is pure.

Collectives use the direct algorithm on a fully connected node: each rank
sends its payload/n chunk to every peer at once over a dedicated link, so
the per-link volume is payload/n for both all-gather and all-to-all.
"""

import math
from typing import Union

from ..hardware.machine import FULLY_CONNECTED, MachineDescriptor
from ..utils.exceptions import InvariantViolationError, NonPositiveTimeError, RankLimitError
from .kernels import (
    Boundedness,
    CollectiveBoundedness,
    CollectiveKind,
    CollectiveOp,
    EfficiencyParams,
    GemmKernel,
)

DEFAULT_GEMM_TILE = 128

# Workgroups the collective library launches by default.
COLLECTIVE_WORKGROUPS = {
    CollectiveKind.ALL_GATHER: 64,
    CollectiveKind.ALL_TO_ALL: 56,
}

# All-gather moves about 14% less memory traffic than all-to-all.
ALL_GATHER_TRAFFIC_DISCOUNT = 0.14


# ----- GEMM -----

def gemm_flops(g: GemmKernel) -> int:
    return 2 * g.m * g.n * g.k


def gemm_min_bytes(g: GemmKernel) -> int:
    """Cold-read/write lower bound: both inputs read once, output written once."""
    return g.dtype_bytes * (g.m * g.k + g.k * g.n + g.m * g.n)


def classify_gemm_boundedness(g: GemmKernel, machine_ratio: float) -> Boundedness:
    """
    Places a GEMM on the roofline.

    The override wins, then the measured op-to-byte ratio, then the
    analytic ratio. Only a ratio strictly above the machine's is
    compute-bound.

    Raises:
        InvariantViolationError: If machine_ratio <= 0
    """
    if not machine_ratio > 0:
        raise InvariantViolationError("machine_ratio", f"must be > 0, got {machine_ratio}")
    if g.boundedness_override is not None:
        return g.boundedness_override

    if g.measured_op_to_byte is not None:
        ratio = g.measured_op_to_byte
    else:
        ratio = gemm_flops(g) / gemm_min_bytes(g)

    if ratio > machine_ratio:
        return Boundedness.COMPUTE_BOUND
    return Boundedness.MEMORY_BOUND


def roofline_gemm_time(g: GemmKernel, md: MachineDescriptor, p: EfficiencyParams) -> float:
    """Isolated GEMM time with all CUs: measured if known, else the roofline."""
    if g.measured_time is not None:
        return g.measured_time
    compute = gemm_flops(g) / (p.efficiency * md.peak_compute_flops)
    memory = gemm_min_bytes(g) / (p.efficiency * md.hbm_bandwidth)
    return max(compute, memory)


# ----- Collectives -----

def roofline_collective_time(
    c: CollectiveOp,
    md: MachineDescriptor,
    p: EfficiencyParams,
    include_overhead: bool = True,
) -> float:
    """
    Direct-algorithm time for a collective on CU-based kernels.

    Args:
        c: The collective
        md: Machine descriptor
        p: Efficiency and launch overhead
        include_overhead: Add comm_launch_overhead_cu to the wire time

    Returns:
        Seconds; 0.0 for a single rank

    Raises:
        RankLimitError: If the collective spans more ranks than the node
        InvariantViolationError: If the topology is not fully connected
    """
    if md.topology != FULLY_CONNECTED:
        raise InvariantViolationError("topology", f"direct algorithm needs {FULLY_CONNECTED}")
    if c.n_ranks > md.gpus_per_node:
        raise RankLimitError(c.n_ranks, md.gpus_per_node)
    if c.n_ranks == 1:
        return 0.0

    per_link_bytes = c.payload_bytes / c.n_ranks
    wire = per_link_bytes / (p.efficiency * md.link_bandwidth_unidir)
    if include_overhead:
        return wire + p.comm_launch_overhead_cu
    return wire


def isolated_collective_time(c: CollectiveOp, md: MachineDescriptor, p: EfficiencyParams) -> float:
    """Isolated CU collective time: measured if known, else roofline with launch cost."""
    if c.measured_time is not None:
        return c.measured_time
    return roofline_collective_time(c, md, p, include_overhead=True)


def classify_collective_boundedness(
    c: CollectiveOp,
    md: MachineDescriptor,
    p: EfficiencyParams,
) -> CollectiveBoundedness:
    wire = roofline_collective_time(c, md, p, include_overhead=False)
    if p.comm_launch_overhead_cu >= wire:
        return CollectiveBoundedness.LATENCY_BOUND
    return CollectiveBoundedness.BANDWIDTH_BOUND


# ----- Workgroups and bandwidth demand -----

def estimate_workgroups(kernel: Union[GemmKernel, CollectiveOp], tile: int = DEFAULT_GEMM_TILE) -> int:
    """Workgroup count, used as a proxy for a kernel's CU requirement."""
    if isinstance(kernel, GemmKernel):
        return math.ceil(kernel.m / tile) * math.ceil(kernel.n / tile)
    return COLLECTIVE_WORKGROUPS[kernel.kind]


def gemm_bandwidth_demand(g: GemmKernel, md: MachineDescriptor, p: EfficiencyParams) -> float:
    """HBM bytes/second the GEMM draws when running at its isolated rate."""
    t = roofline_gemm_time(g, md, p)
    if not t > 0:
        raise NonPositiveTimeError("gemm time", t)
    return gemm_min_bytes(g) / t


def collective_bandwidth_demand(c: CollectiveOp, md: MachineDescriptor, p: EfficiencyParams) -> float:
    """
    HBM bytes/second one GPU draws while the collective streams.

    Each rank reads what it sends and writes what it receives; all-gather
    carries a 14% discount on that traffic.
    """
    wire = roofline_collective_time(c, md, p, include_overhead=False)
    if not wire > 0:
        raise NonPositiveTimeError("collective wire time", wire)

    traffic_factor = 2.0
    if c.kind == CollectiveKind.ALL_GATHER:
        traffic_factor *= 1.0 - ALL_GATHER_TRAFFIC_DISCOUNT
    moved = (c.n_ranks - 1) / c.n_ranks * c.payload_bytes
    return traffic_factor * moved / wire
