"""
Hardware model of one GPU node.

The MachineDescriptor is the single source of truth for CU counts, DMA
engines, bandwidths, topology and DMA launch/sync overheads. It is
immutable once validated and safe to share between threads and worker
processes.

Does NOT model PCIe, NUMA, multi-node topology or DMA queues; the DMA
command flow is collapsed into the two overhead fields.
"""

import json
import logging
from dataclasses import asdict, dataclass, fields
from importlib import resources
from typing import Any, Dict

from ..utils.exceptions import InvariantViolationError, ZeroBandwidthError
from ..utils.validators import (
    PathLike,
    parse_json,
    read_text,
    validate_count,
    validate_fields,
    validate_non_negative,
    validate_positive,
)

logger = logging.getLogger(__name__)

FULLY_CONNECTED = "fully-connected"
TOPOLOGIES = (FULLY_CONNECTED,)

DEFAULT_MACHINE_FILE = "mi300x-node.json"

_COUNT_FIELDS = (
    "gpus_per_node",
    "cus_per_gpu",
    "xcds_per_gpu",
    "cus_per_xcd",
    "min_cu_grain",
    "dma_engines_per_gpu",
    "links_per_gpu",
)
_POSITIVE_FIELDS = (
    "peak_compute_flops",
    "hbm_bandwidth",
    "llc_capacity",
    "link_bandwidth_unidir",
)
_OVERHEAD_FIELDS = ("cpu_launch_overhead", "dma_sync_overhead")


@dataclass(frozen=True)
class MachineDescriptor:
    """
    GPU node hardware model.

    Bandwidths are bytes/second, overheads seconds, peak compute ops/second
    for the datatype the workloads use.
    """
    gpus_per_node: int
    cus_per_gpu: int
    xcds_per_gpu: int
    cus_per_xcd: int
    min_cu_grain: int
    dma_engines_per_gpu: int
    peak_compute_flops: float
    hbm_bandwidth: float
    llc_capacity: int
    link_bandwidth_unidir: float
    links_per_gpu: int
    topology: str
    cpu_launch_overhead: float
    dma_sync_overhead: float

    def __post_init__(self):
        for name in _COUNT_FIELDS:
            validate_count(getattr(self, name), name, minimum=1)
        validate_count(self.llc_capacity, "llc_capacity", minimum=1)
        for name in _POSITIVE_FIELDS:
            validate_positive(getattr(self, name), name)
        for name in _OVERHEAD_FIELDS:
            validate_non_negative(getattr(self, name), name)

        if self.cus_per_gpu != self.xcds_per_gpu * self.cus_per_xcd:
            raise InvariantViolationError(
                "cus_per_gpu",
                f"{self.cus_per_gpu} != xcds_per_gpu × cus_per_xcd "
                f"({self.xcds_per_gpu}×{self.cus_per_xcd})",
            )
        if self.cus_per_gpu % self.min_cu_grain != 0:
            raise InvariantViolationError(
                "min_cu_grain",
                f"{self.min_cu_grain} does not divide cus_per_gpu {self.cus_per_gpu}",
            )
        if self.topology not in TOPOLOGIES:
            raise InvariantViolationError(
                "topology", f"unsupported topology {self.topology!r}"
            )
        if self.topology == FULLY_CONNECTED and self.links_per_gpu != self.gpus_per_node - 1:
            raise InvariantViolationError(
                "links_per_gpu",
                f"fully-connected node of {self.gpus_per_node} GPUs needs "
                f"{self.gpus_per_node - 1} links, got {self.links_per_gpu}",
            )

    def round_up_to_grain(self, cus: int) -> int:
        """Rounds a CU count up to the next multiple of min_cu_grain."""
        grain = self.min_cu_grain
        return -(-cus // grain) * grain

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "machine descriptor") -> "MachineDescriptor":
        validate_fields(data, [f.name for f in fields(cls)], source)
        return cls(**data)


def load_machine(config_text: str, source: str = "machine descriptor") -> MachineDescriptor:
    """
    Parses and validates a machine descriptor document.

    Args:
        config_text: JSON object with exactly the MachineDescriptor fields
        source: Description used in error messages

    Returns:
        Validated MachineDescriptor

    Raises:
        ConfigParseError: If the document does not parse
        InvariantViolationError: On missing/unknown fields or broken invariants
    """
    md = MachineDescriptor.from_dict(parse_json(config_text, source), source)
    logger.debug("Loaded machine from %s: %d GPUs × %d CUs", source, md.gpus_per_node, md.cus_per_gpu)
    return md


def save_machine(md: MachineDescriptor) -> str:
    """Serializes a descriptor; load_machine(save_machine(md)) == md."""
    return json.dumps(md.to_dict(), indent=2) + "\n"


def load_machine_file(path: PathLike) -> MachineDescriptor:
    """Loads a machine descriptor from a file path."""
    return load_machine(read_text(path), source=str(path))


def default_machine() -> MachineDescriptor:
    """Loads the shipped MI300X node descriptor."""
    text = resources.files("c3sim.data").joinpath(DEFAULT_MACHINE_FILE).read_text(encoding="utf-8")
    return load_machine(text, source=DEFAULT_MACHINE_FILE)


def machine_op_to_byte(md: MachineDescriptor) -> float:
    """
    Machine balance point in ops per byte of HBM traffic.

    Raises:
        ZeroBandwidthError: If hbm_bandwidth is zero
    """
    if md.hbm_bandwidth == 0:
        raise ZeroBandwidthError("hbm_bandwidth")
    return md.peak_compute_flops / md.hbm_bandwidth
