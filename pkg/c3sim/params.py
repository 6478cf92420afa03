"""
Model parameter file: efficiency, launch overhead, co-run penalties and
simulator policies.

    {
      "efficiency": 0.7,
      "comm_launch_overhead_cu": 5e-05,
      "gemm_tile": 128,
      "restore_on_retire": true,
      "memory_contention": true,
      "penalties": {"all-gather": {"CU": 1.5, "DMA": 1.45}, ...}
    }

Only `efficiency` and `comm_launch_overhead_cu` are required; the rest
fall back to the defaults below.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, Tuple

from .hardware.machine import MachineDescriptor
from .interference.penalty import CoRunPenalty
from .interference.tables import SlowdownTable, KernelClass, unit_tables
from .utils.exceptions import InvariantViolationError
from .utils.validators import PathLike, parse_json, read_text, validate_count, validate_fields
from .workload.kernels import EfficiencyParams
from .workload.roofline import DEFAULT_GEMM_TILE

logger = logging.getLogger(__name__)

DEFAULT_PARAMS_FILE = "default-params.json"


@dataclass(frozen=True)
class ModelParams:
    """
    Everything besides the machine and tables that shapes a simulation.

    restore_on_retire: the surviving kernel gets the whole GPU back once
        its partner finishes; otherwise it keeps its phase-1 CU share.
    memory_contention: apply HBM bandwidth sharing between co-runners.
    """
    efficiency: EfficiencyParams = field(default_factory=EfficiencyParams)
    penalties: CoRunPenalty = field(default_factory=CoRunPenalty.unit)
    gemm_tile: int = DEFAULT_GEMM_TILE
    restore_on_retire: bool = True
    memory_contention: bool = True

    def __post_init__(self):
        validate_count(self.gemm_tile, "gemm_tile", minimum=1)
        for name in ("restore_on_retire", "memory_contention"):
            if not isinstance(getattr(self, name), bool):
                raise InvariantViolationError(name, f"expected true/false, got {getattr(self, name)!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "efficiency": self.efficiency.efficiency,
            "comm_launch_overhead_cu": self.efficiency.comm_launch_overhead_cu,
            "gemm_tile": self.gemm_tile,
            "restore_on_retire": self.restore_on_retire,
            "memory_contention": self.memory_contention,
            "penalties": self.penalties.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "model parameters") -> "ModelParams":
        validate_fields(
            data,
            ["efficiency", "comm_launch_overhead_cu"],
            source,
            optional=["gemm_tile", "restore_on_retire", "memory_contention", "penalties"],
        )
        return cls(
            efficiency=EfficiencyParams(
                efficiency=data["efficiency"],
                comm_launch_overhead_cu=data["comm_launch_overhead_cu"],
            ),
            penalties=CoRunPenalty.from_dict(data.get("penalties", {})),
            gemm_tile=data.get("gemm_tile", DEFAULT_GEMM_TILE),
            restore_on_retire=data.get("restore_on_retire", True),
            memory_contention=data.get("memory_contention", True),
        )


def load_params(text: str, source: str = "model parameters") -> ModelParams:
    return ModelParams.from_dict(parse_json(text, source), source)


def load_params_file(path: PathLike) -> ModelParams:
    return load_params(read_text(path), source=str(path))


def save_params(params: ModelParams) -> str:
    return json.dumps(params.to_dict(), indent=2) + "\n"


def default_params() -> ModelParams:
    """Shipped calibration: efficiency 0.7, 50 µs CU launch, fitted penalties."""
    text = resources.files("c3sim.data").joinpath(DEFAULT_PARAMS_FILE).read_text(encoding="utf-8")
    return load_params(text, source=DEFAULT_PARAMS_FILE)


def zero_interference(
    md: MachineDescriptor,
    params: ModelParams,
) -> Tuple[MachineDescriptor, Dict[KernelClass, SlowdownTable], ModelParams]:
    """
    Strips every interference and overhead term from a configuration.

    Under this configuration each concurrent strategy should reach
    exactly the ideal speedup, which makes it a soundness check.
    """
    logger.debug("Zero-interference mode: unit tables, unit penalties, no overheads")
    quiet_md = dataclasses.replace(md, cpu_launch_overhead=0.0, dma_sync_overhead=0.0)
    quiet_params = dataclasses.replace(
        params,
        efficiency=dataclasses.replace(params.efficiency, comm_launch_overhead_cu=0.0),
        penalties=CoRunPenalty.unit(),
        memory_contention=False,
    )
    return quiet_md, unit_tables(md), quiet_params
