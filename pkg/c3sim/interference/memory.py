"""Memory interference: co-running kernels share effective HBM bandwidth."""

from typing import List, Sequence

from ..utils.exceptions import InvariantViolationError


def shared_memory_factor(demands: Sequence[float], effective_peak: float) -> List[float]:
    """
    Stretch factor per kernel under proportional fair bandwidth sharing.

    When the summed demand exceeds the effective peak every co-running
    kernel is slowed by the same factor, so each still moves its full
    byte count. A kernel running alone is never stretched.

    Args:
        demands: Bytes/second each kernel draws at its isolated rate
        effective_peak: Usable bandwidth (efficiency × HBM peak)

    Returns:
        One factor >= 1 per demand
    """
    if not effective_peak > 0:
        raise InvariantViolationError("effective_peak", f"must be > 0, got {effective_peak}")
    if len(demands) <= 1:
        return [1.0] * len(demands)

    total = sum(demands)
    if total <= effective_peak:
        return [1.0] * len(demands)
    return [total / effective_peak] * len(demands)
