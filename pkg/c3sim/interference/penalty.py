"""
Co-run penalties: extra slowdown a kernel suffers while sharing the GPU.

The penalty captures cache and memory-pipeline interference that CU
partitioning alone does not explain. A collective offloaded to DMA engines
bypasses the L1/L2 path, so its DMA penalty never exceeds its CU penalty.
GEMM classes carry a penalty too: the factor their GEMM sees while the
collective co-runs on that backend.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Tuple

from ..utils.exceptions import InvariantViolationError
from ..utils.validators import validate_number
from .tables import KernelClass


class Backend(Enum):
    """Engine that moves a collective's data."""
    CU = "CU"
    DMA = "DMA"


PenaltyKey = Tuple[KernelClass, Backend]


@dataclass(frozen=True)
class CoRunPenalty:
    """Multiplicative co-run factors; absent entries mean 1.0."""
    factors: Mapping[PenaltyKey, float] = field(default_factory=dict)

    def __post_init__(self):
        factors = {}
        for (kernel_class, backend), value in self.factors.items():
            value = validate_number(value, f"penalty[{kernel_class.value}/{backend.value}]")
            if value < 1.0:
                raise InvariantViolationError(
                    f"penalty[{kernel_class.value}/{backend.value}]", f"must be >= 1, got {value}"
                )
            factors[(kernel_class, backend)] = value
        object.__setattr__(self, "factors", factors)

        for kernel_class in KernelClass:
            cu = factors.get((kernel_class, Backend.CU))
            dma = factors.get((kernel_class, Backend.DMA))
            if cu is not None and dma is not None and dma > cu:
                raise InvariantViolationError(
                    f"penalty[{kernel_class.value}]",
                    f"DMA factor {dma} exceeds CU factor {cu}",
                )

    def factor(self, kernel_class: KernelClass, backend: Backend) -> float:
        return self.factors.get((kernel_class, backend), 1.0)

    def with_factors(self, updates: Mapping[PenaltyKey, float]) -> "CoRunPenalty":
        merged = dict(self.factors)
        merged.update(updates)
        return CoRunPenalty(merged)

    @classmethod
    def unit(cls) -> "CoRunPenalty":
        return cls({})

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        data: Dict[str, Dict[str, float]] = {}
        for (kernel_class, backend), value in self.factors.items():
            data.setdefault(kernel_class.value, {})[backend.value] = value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CoRunPenalty":
        if not isinstance(data, Mapping):
            raise InvariantViolationError("penalties", "expected an object keyed by kernel class")
        factors = {}
        for class_name, per_backend in data.items():
            try:
                kernel_class = KernelClass(class_name)
            except ValueError:
                raise InvariantViolationError("penalties", f"unknown kernel class {class_name!r}")
            if not isinstance(per_backend, Mapping):
                raise InvariantViolationError(f"penalties.{class_name}", "expected an object keyed by backend")
            for backend_name, value in per_backend.items():
                try:
                    backend = Backend(backend_name)
                except ValueError:
                    raise InvariantViolationError(
                        f"penalties.{class_name}", f"unknown backend {backend_name!r}"
                    )
                factors[(kernel_class, backend)] = value
        return cls(factors)
