"""
C3 taxonomy, ideal speedup and fraction-of-ideal.

A C3 pair is G-long when the GEMM runs more than `threshold` times the
collective in isolation, C-long in the mirror case, and GC-equal
otherwise. The boundary itself is never the longer class.
"""

from dataclasses import dataclass
from enum import Enum

from .utils.exceptions import InvariantViolationError, NonPositiveTimeError

DEFAULT_THRESHOLD = 1.15


class C3Type(Enum):
    """Which kernel dominates a C3 pair."""
    G_LONG = "G-long"
    C_LONG = "C-long"
    GC_EQUAL = "GC-equal"


@dataclass(frozen=True)
class TaxonomyLabel:
    value: C3Type
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not self.threshold > 1:
            raise InvariantViolationError("threshold", f"must be > 1, got {self.threshold}")

    def __str__(self):
        return self.value.value


def _require_positive_times(t_gemm: float, t_comm: float) -> None:
    if not t_gemm > 0:
        raise NonPositiveTimeError("t_gemm", t_gemm)
    if not t_comm > 0:
        raise NonPositiveTimeError("t_comm", t_comm)


def classify_c3(t_gemm: float, t_comm: float, threshold: float = DEFAULT_THRESHOLD) -> TaxonomyLabel:
    """
    Classifies a pair of isolated kernel times.

    Args:
        t_gemm: Isolated GEMM time in seconds
        t_comm: Isolated collective time in seconds
        threshold: Ratio above which the longer kernel dominates

    Returns:
        TaxonomyLabel with the class and the threshold used

    Raises:
        NonPositiveTimeError: If either time is not positive
        InvariantViolationError: If threshold <= 1
    """
    _require_positive_times(t_gemm, t_comm)
    if t_gemm > threshold * t_comm:
        value = C3Type.G_LONG
    elif t_comm > threshold * t_gemm:
        value = C3Type.C_LONG
    else:
        value = C3Type.GC_EQUAL
    return TaxonomyLabel(value=value, threshold=threshold)


def ideal_speedup(t_gemm: float, t_comm: float) -> float:
    """Serial time over full-overlap time: the shorter kernel fully hidden."""
    _require_positive_times(t_gemm, t_comm)
    return (t_gemm + t_comm) / max(t_gemm, t_comm)


def fraction_of_ideal(achieved_speedup: float, ideal: float) -> float:
    """
    Share of the ideal excess speedup actually achieved.

    Speedups below 1 count as no gain and report 0.0.

    Raises:
        InvariantViolationError: If ideal <= 1
    """
    if not ideal > 1:
        raise InvariantViolationError("ideal_speedup", f"must be > 1, got {ideal}")
    achieved = max(achieved_speedup, 1.0)
    return (achieved - 1.0) / (ideal - 1.0)
