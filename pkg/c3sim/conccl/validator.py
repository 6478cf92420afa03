"""
Correctness oracle for transfer plans.

validate_plan executes a plan against a byte-level model of every rank's
destination buffer and compares the result with the collective's
definition. Buffers are tracked as runs of bytes with a common origin
(source rank, source offset) instead of one entry per byte, so plans for
multi-GiB payloads validate as quickly as tiny ones.

Checks run in this order, and the first failure is raised:
    1. per-transfer structure (ranks, engine, lengths, buffer bounds)
    2. overlapping writes while executing the plan
    3. coverage and content of each (rank, slot), ranks then slots ascending
    4. plan-level structure (transfer count, contiguous per-engine seq)
"""

import bisect
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List

from ..utils.exceptions import (
    DataMismatchError,
    IncompleteCoverageError,
    InvalidTransferError,
    OverlappingWriteError,
)
from ..workload.kernels import CollectiveKind
from .plan import Transfer, TransferPlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Run:
    """Destination bytes [start, end) copied from src_rank at src_start."""
    start: int
    end: int
    src_rank: int
    src_start: int


class _RankBuffer:
    """Destination buffer of one rank as sorted, non-overlapping runs."""

    def __init__(self, rank: int, slot_bytes: int):
        self.rank = rank
        self.slot_bytes = slot_bytes
        self.runs: List[_Run] = []
        self._starts: List[int] = []

    def write(self, run: _Run) -> None:
        i = bisect.bisect_left(self._starts, run.start)
        if i > 0 and self.runs[i - 1].end > run.start:
            self._overlap(run.start)
        if i < len(self.runs) and self.runs[i].start < run.end:
            self._overlap(max(run.start, self.runs[i].start))
        self.runs.insert(i, run)
        self._starts.insert(i, run.start)

    def _overlap(self, offset: int) -> None:
        raise OverlappingWriteError(self.rank, offset // self.slot_bytes, offset)

    def check_slot(self, slot: int, src_rank: int, src_base: int) -> None:
        """Checks slot bytes are exactly src_rank's bytes from src_base on."""
        slot_start = slot * self.slot_bytes
        slot_end = slot_start + self.slot_bytes

        i = bisect.bisect_right(self._starts, slot_start) - 1
        if i < 0 or self.runs[i].end <= slot_start:
            i += 1

        pos = slot_start
        while pos < slot_end:
            if i >= len(self.runs) or self.runs[i].start > pos:
                raise IncompleteCoverageError(self.rank, slot)
            run = self.runs[i]
            if run.src_rank != src_rank or run.src_start - run.start != src_base - slot_start:
                raise DataMismatchError(self.rank, slot)
            pos = run.end
            i += 1


def _check_transfer(index: int, t: Transfer, plan: TransferPlan) -> None:
    n = plan.n_ranks
    if not (0 <= t.src_gpu < n and 0 <= t.dst_gpu < n):
        raise InvalidTransferError(index, f"rank out of range for {n} ranks ({t.src_gpu}->{t.dst_gpu})")
    if t.src_gpu == t.dst_gpu:
        raise InvalidTransferError(index, f"source and destination are both rank {t.src_gpu}")
    if t.length <= 0:
        raise InvalidTransferError(index, f"length must be > 0, got {t.length}")
    if not 0 <= t.engine_id < plan.dma_engines:
        raise InvalidTransferError(index, f"engine {t.engine_id} outside 0..{plan.dma_engines - 1}")
    if t.src_offset < 0 or t.src_offset + t.length > plan.layout.src_extent:
        raise InvalidTransferError(index, "source range outside the source buffer")
    if t.dst_offset < 0 or t.dst_offset + t.length > plan.layout.dst_extent:
        raise InvalidTransferError(index, "destination range outside the destination buffer")


def _expected_source(plan: TransferPlan, rank: int, slot: int) -> int:
    """Source offset on rank `slot` of the bytes rank `rank` must hold in `slot`."""
    if plan.kind == CollectiveKind.ALL_GATHER:
        return 0
    return rank * plan.slot_bytes


def validate_plan(plan: TransferPlan) -> None:
    """
    Executes a plan and verifies the collective's post-state.

    All-gather: every rank holds all n chunks in rank order.
    All-to-all: slot g of rank p holds send slot p of rank g.

    Raises:
        InvalidTransferError: On a structurally broken transfer or plan
        OverlappingWriteError: When two writes hit the same destination bytes
        IncompleteCoverageError: When a slot is not fully written
        DataMismatchError: When a slot holds the wrong bytes
    """
    n = plan.n_ranks
    slot = plan.slot_bytes
    buffers = [_RankBuffer(rank, slot) for rank in range(n)]

    for rank in range(n):
        src_base = _expected_source(plan, rank, rank)
        buffers[rank].write(_Run(rank * slot, (rank + 1) * slot, rank, src_base))

    for index, t in enumerate(plan.transfers):
        _check_transfer(index, t, plan)
        buffers[t.dst_gpu].write(_Run(t.dst_offset, t.dst_offset + t.length, t.src_gpu, t.src_offset))

    for rank in range(n):
        for s in range(n):
            buffers[rank].check_slot(s, s, _expected_source(plan, rank, s))

    expected_count = n * (n - 1) if n >= 2 else 0
    if len(plan.transfers) != expected_count:
        raise InvalidTransferError(-1, f"expected {expected_count} transfers, got {len(plan.transfers)}")

    seqs: Dict[tuple, List[int]] = defaultdict(list)
    for t in plan.transfers:
        seqs[(t.src_gpu, t.engine_id)].append(t.seq)
    for (gpu, engine), values in sorted(seqs.items()):
        if sorted(values) != list(range(len(values))):
            raise InvalidTransferError(-1, f"seq numbers on GPU {gpu} engine {engine} are not 0..{len(values) - 1}")

    logger.debug("Validated %s plan over %d ranks (%d transfers)", plan.kind.value, n, len(plan.transfers))
