"""
Workload value types: GEMM kernels, collectives and C3 scenarios.

These dataclasses are immutable and validated on construction. The
to_dict/from_dict pairs define the dataset file format.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from ..taxonomy import C3Type
from ..utils.exceptions import InvariantViolationError
from ..utils.validators import (
    validate_count,
    validate_fields,
    validate_fraction,
    validate_non_negative,
    validate_positive,
)


# ----- Enums -----

class Boundedness(Enum):
    """GEMM roofline regime."""
    COMPUTE_BOUND = "compute-bound"
    MEMORY_BOUND = "memory-bound"


class CollectiveBoundedness(Enum):
    """Collective regime: fixed launch cost vs wire time."""
    LATENCY_BOUND = "latency-bound"
    BANDWIDTH_BOUND = "bandwidth-bound"


class CollectiveKind(Enum):
    """Supported collectives."""
    ALL_GATHER = "all-gather"
    ALL_TO_ALL = "all-to-all"


DTYPE_BYTES = (1, 2, 4, 8)


def _enum_value(enum_cls, value, field: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise InvariantViolationError(field, f"{value!r} is not one of: {allowed}")


# ----- Kernels -----

@dataclass(frozen=True)
class GemmKernel:
    """
    A GEMM of an (m×k) by (k×n) product.

    measured_op_to_byte and measured_time override the analytic estimates
    when profiling data exists; boundedness_override pins the regime.
    """
    tag: str
    m: int
    n: int
    k: int
    dtype_bytes: int = 2
    measured_op_to_byte: Optional[float] = None
    measured_time: Optional[float] = None
    boundedness_override: Optional[Boundedness] = None

    def __post_init__(self):
        for name in ("m", "n", "k"):
            validate_count(getattr(self, name), name, minimum=1)
        if self.dtype_bytes not in DTYPE_BYTES or isinstance(self.dtype_bytes, bool):
            raise InvariantViolationError(
                "dtype_bytes", f"must be one of {DTYPE_BYTES}, got {self.dtype_bytes!r}"
            )
        if self.measured_op_to_byte is not None:
            validate_positive(self.measured_op_to_byte, "measured_op_to_byte")
        if self.measured_time is not None:
            validate_positive(self.measured_time, "measured_time")
        if isinstance(self.boundedness_override, str):
            object.__setattr__(
                self,
                "boundedness_override",
                _enum_value(Boundedness, self.boundedness_override, "boundedness_override"),
            )

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "tag": self.tag,
            "m": self.m,
            "n": self.n,
            "k": self.k,
            "dtype_bytes": self.dtype_bytes,
        }
        if self.measured_op_to_byte is not None:
            data["measured_op_to_byte"] = self.measured_op_to_byte
        if self.measured_time is not None:
            data["measured_time"] = self.measured_time
        if self.boundedness_override is not None:
            data["boundedness_override"] = self.boundedness_override.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GemmKernel":
        validate_fields(
            data,
            ["tag", "m", "n", "k"],
            "gemm record",
            optional=["dtype_bytes", "measured_op_to_byte", "measured_time", "boundedness_override"],
        )
        return cls(**data)


@dataclass(frozen=True)
class CollectiveOp:
    """
    A collective over n_ranks GPUs of one node.

    For all-gather payload_bytes is the gathered result per rank; for
    all-to-all it is each rank's whole send buffer. Either way every rank
    sends payload_bytes/n_ranks to each peer.
    """
    kind: CollectiveKind
    payload_bytes: int
    n_ranks: int
    measured_time: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.kind, CollectiveKind):
            object.__setattr__(self, "kind", _enum_value(CollectiveKind, self.kind, "kind"))
        validate_count(self.payload_bytes, "payload_bytes", minimum=0)
        validate_count(self.n_ranks, "n_ranks", minimum=1)
        if self.payload_bytes % self.n_ranks != 0:
            raise InvariantViolationError(
                "payload_bytes",
                f"{self.payload_bytes} is not divisible by n_ranks {self.n_ranks}",
            )
        if self.measured_time is not None:
            validate_positive(self.measured_time, "measured_time")

    @property
    def per_peer_bytes(self) -> int:
        return self.payload_bytes // self.n_ranks

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "kind": self.kind.value,
            "payload_bytes": self.payload_bytes,
            "n_ranks": self.n_ranks,
        }
        if self.measured_time is not None:
            data["measured_time"] = self.measured_time
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CollectiveOp":
        validate_fields(
            data, ["kind", "payload_bytes", "n_ranks"], "collective record",
            optional=["measured_time"],
        )
        return cls(**data)


# ----- Scenario -----

@dataclass(frozen=True)
class C3Scenario:
    """A GEMM paired with an independent collective on the same GPU."""
    id: str
    gemm: GemmKernel
    collective: CollectiveOp
    source: str = "synthetic"
    expected_taxonomy: Optional[C3Type] = None

    def __post_init__(self):
        if not self.id:
            raise InvariantViolationError("id", "scenario id cannot be empty")
        if isinstance(self.expected_taxonomy, str):
            object.__setattr__(
                self,
                "expected_taxonomy",
                _enum_value(C3Type, self.expected_taxonomy, "expected_taxonomy"),
            )

    @property
    def key(self) -> Tuple[str, str]:
        """Identity within a dataset: the id under one collective kind."""
        return (self.id, self.collective.kind.value)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "id": self.id,
            "gemm": self.gemm.to_dict(),
            "collective": self.collective.to_dict(),
            "source": self.source,
        }
        if self.expected_taxonomy is not None:
            data["expected_taxonomy"] = self.expected_taxonomy.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "C3Scenario":
        validate_fields(
            data, ["id", "gemm", "collective"], "scenario record",
            optional=["source", "expected_taxonomy"],
        )
        return cls(
            id=data["id"],
            gemm=GemmKernel.from_dict(data["gemm"]),
            collective=CollectiveOp.from_dict(data["collective"]),
            source=data.get("source", "synthetic"),
            expected_taxonomy=data.get("expected_taxonomy"),
        )


# ----- Model parameters -----

@dataclass(frozen=True)
class EfficiencyParams:
    """Achievable fraction of peak rates and the CU collective launch cost."""
    efficiency: float = 0.7
    comm_launch_overhead_cu: float = 50e-6

    def __post_init__(self):
        validate_fraction(self.efficiency, "efficiency")
        validate_non_negative(self.comm_launch_overhead_cu, "comm_launch_overhead_cu")
