"""
Derive GEMM and FSDP all-gather workloads from a transformer layer shape.

Convention for one decoder layer's forward pass:
    qkv      tokens × 3·hidden × hidden
    out      tokens × hidden × hidden
    gate_up  tokens × 2·ffn × hidden
    down     tokens × hidden × ffn
With sharded weights every matrix is all-gathered before use; the gathered
payload is the full weight, padded up to a multiple of the shard count.
"""

from dataclasses import dataclass, field
from typing import List

from ..utils.validators import validate_count
from .kernels import CollectiveKind, CollectiveOp, GemmKernel


@dataclass(frozen=True)
class ModelConfig:
    hidden: int
    ffn: int
    tokens: int
    dtype_bytes: int = 2
    shards: int = 8

    def __post_init__(self):
        for name in ("hidden", "ffn", "tokens", "dtype_bytes", "shards"):
            validate_count(getattr(self, name), name, minimum=1)


@dataclass
class LayerWorkload:
    """Kernels of one layer: GEMMs in execution order and their weight gathers."""
    gemms: List[GemmKernel] = field(default_factory=list)
    all_gathers: List[CollectiveOp] = field(default_factory=list)


def _padded(nbytes: int, shards: int) -> int:
    return -(-nbytes // shards) * shards


def ingest_model(config: ModelConfig) -> LayerWorkload:
    """
    Emits the forward GEMMs and weight all-gathers of one layer.

    Args:
        config: Layer dimensions, token count, datatype size and shard count

    Returns:
        LayerWorkload; all_gathers is empty when shards == 1
    """
    h, f, t = config.hidden, config.ffn, config.tokens
    shapes = [
        ("qkv", 3 * h, h),
        ("out", h, h),
        ("gate_up", 2 * f, h),
        ("down", h, f),
    ]

    workload = LayerWorkload()
    for tag, n, k in shapes:
        workload.gemms.append(GemmKernel(tag=tag, m=t, n=n, k=k, dtype_bytes=config.dtype_bytes))
        if config.shards > 1:
            weight_bytes = n * k * config.dtype_bytes
            workload.all_gathers.append(
                CollectiveOp(
                    kind=CollectiveKind.ALL_GATHER,
                    payload_bytes=_padded(weight_bytes, config.shards),
                    n_ranks=config.shards,
                )
            )
    return workload
