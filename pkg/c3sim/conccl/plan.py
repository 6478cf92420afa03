"""
DMA-offloaded collectives as explicit transfer lists.

Both collectives use the direct algorithm: every GPU writes the data each
peer needs straight into that peer's destination buffer. The issuing
(source) GPU pins each transfer to one of its DMA engines round-robin over
its peers; seq is the transfer's position in that engine's FIFO.

Buffer layout per rank:
    all-gather  source = own chunk (chunk_bytes);  destination = n slots
    all-to-all  source = n send slots;             destination = n receive slots
A rank's own slot is filled by a local copy and never appears as a transfer.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

from ..hardware.machine import MachineDescriptor
from ..utils.exceptions import InvariantViolationError, RankLimitError
from ..utils.validators import validate_count, validate_fields
from ..workload.kernels import CollectiveKind, CollectiveOp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transfer:
    """One DMA copy from a source GPU buffer range into a peer's buffer."""
    src_gpu: int
    dst_gpu: int
    src_offset: int
    dst_offset: int
    length: int
    engine_id: int
    seq: int

    def to_dict(self) -> Dict[str, int]:
        return {
            "src": self.src_gpu,
            "dst": self.dst_gpu,
            "src_off": self.src_offset,
            "dst_off": self.dst_offset,
            "len": self.length,
            "engine": self.engine_id,
            "seq": self.seq,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Transfer":
        validate_fields(data, ["src", "dst", "src_off", "dst_off", "len", "engine", "seq"], "transfer")
        return cls(
            src_gpu=data["src"],
            dst_gpu=data["dst"],
            src_offset=data["src_off"],
            dst_offset=data["dst_off"],
            length=data["len"],
            engine_id=data["engine"],
            seq=data["seq"],
        )


@dataclass(frozen=True)
class BufferLayout:
    """Per-rank buffer sizes in bytes."""
    src_extent: int
    dst_extent: int


@dataclass(frozen=True)
class TransferPlan:
    """
    A collective decomposed into DMA transfers, listed in CPU submission order.

    chunk_bytes is the all-gather chunk or the all-to-all per-peer slot.
    Structural correctness is checked by validate_plan, not here, so that
    damaged plans can still be represented and rejected.
    """
    kind: CollectiveKind
    n_ranks: int
    chunk_bytes: int
    transfers: Tuple[Transfer, ...]
    layout: BufferLayout
    dma_engines: int

    def __post_init__(self):
        object.__setattr__(self, "transfers", tuple(self.transfers))

    @property
    def slot_bytes(self) -> int:
        return self.chunk_bytes

    @property
    def total_bytes(self) -> int:
        return sum(t.length for t in self.transfers)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n_ranks": self.n_ranks,
            "chunk_bytes": self.chunk_bytes,
            "dma_engines": self.dma_engines,
            "layout": {"src_extent": self.layout.src_extent, "dst_extent": self.layout.dst_extent},
            "transfers": [t.to_dict() for t in self.transfers],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TransferPlan":
        validate_fields(
            data, ["kind", "n_ranks", "chunk_bytes", "dma_engines", "layout", "transfers"], "transfer plan"
        )
        layout = data["layout"]
        validate_fields(layout, ["src_extent", "dst_extent"], "transfer plan layout")
        return cls(
            kind=CollectiveKind(data["kind"]),
            n_ranks=data["n_ranks"],
            chunk_bytes=data["chunk_bytes"],
            transfers=tuple(Transfer.from_dict(t) for t in data["transfers"]),
            layout=BufferLayout(layout["src_extent"], layout["dst_extent"]),
            dma_engines=data["dma_engines"],
        )


def _check_args(n_ranks: int, chunk_bytes: int, md: MachineDescriptor) -> None:
    validate_count(n_ranks, "n_ranks", minimum=1)
    validate_count(chunk_bytes, "chunk_bytes", minimum=1)
    if n_ranks > md.gpus_per_node:
        raise RankLimitError(n_ranks, md.gpus_per_node)


def _direct_transfers(
    n_ranks: int,
    chunk_bytes: int,
    md: MachineDescriptor,
    src_offset_for,
) -> List[Transfer]:
    transfers = []
    for src in range(n_ranks):
        next_seq = [0] * md.dma_engines_per_gpu
        peers = [p for p in range(n_ranks) if p != src]
        for peer_index, dst in enumerate(peers):
            engine = peer_index % md.dma_engines_per_gpu
            transfers.append(
                Transfer(
                    src_gpu=src,
                    dst_gpu=dst,
                    src_offset=src_offset_for(src, dst),
                    dst_offset=src * chunk_bytes,
                    length=chunk_bytes,
                    engine_id=engine,
                    seq=next_seq[engine],
                )
            )
            next_seq[engine] += 1
    return transfers


def plan_all_gather(n_ranks: int, chunk_bytes: int, md: MachineDescriptor) -> TransferPlan:
    """
    Direct all-gather: rank g's chunk lands in slot g of every peer.

    Raises:
        RankLimitError: If n_ranks exceeds the node
        InvariantViolationError: If n_ranks < 1 or chunk_bytes < 1
    """
    _check_args(n_ranks, chunk_bytes, md)
    transfers = _direct_transfers(n_ranks, chunk_bytes, md, lambda src, dst: 0)
    logger.debug("all-gather plan: %d ranks, %d B chunks, %d transfers", n_ranks, chunk_bytes, len(transfers))
    return TransferPlan(
        kind=CollectiveKind.ALL_GATHER,
        n_ranks=n_ranks,
        chunk_bytes=chunk_bytes,
        transfers=tuple(transfers),
        layout=BufferLayout(src_extent=chunk_bytes, dst_extent=n_ranks * chunk_bytes),
        dma_engines=md.dma_engines_per_gpu,
    )


def plan_all_to_all(n_ranks: int, per_peer_bytes: int, md: MachineDescriptor) -> TransferPlan:
    """
    Direct all-to-all: send slot p of rank g lands in receive slot g of rank p.

    Raises:
        RankLimitError: If n_ranks exceeds the node
        InvariantViolationError: If n_ranks < 1 or per_peer_bytes < 1
    """
    _check_args(n_ranks, per_peer_bytes, md)
    transfers = _direct_transfers(n_ranks, per_peer_bytes, md, lambda src, dst: dst * per_peer_bytes)
    logger.debug("all-to-all plan: %d ranks, %d B per peer, %d transfers", n_ranks, per_peer_bytes, len(transfers))
    extent = n_ranks * per_peer_bytes
    return TransferPlan(
        kind=CollectiveKind.ALL_TO_ALL,
        n_ranks=n_ranks,
        chunk_bytes=per_peer_bytes,
        transfers=tuple(transfers),
        layout=BufferLayout(src_extent=extent, dst_extent=extent),
        dma_engines=md.dma_engines_per_gpu,
    )


def plan_collective(c: CollectiveOp, md: MachineDescriptor) -> TransferPlan:
    """Plans a CollectiveOp; payload_bytes/n_ranks becomes the chunk size."""
    if c.payload_bytes == 0:
        raise InvariantViolationError("payload_bytes", "cannot plan an empty collective")
    if c.kind == CollectiveKind.ALL_GATHER:
        return plan_all_gather(c.n_ranks, c.per_peer_bytes, md)
    return plan_all_to_all(c.n_ranks, c.per_peer_bytes, md)
