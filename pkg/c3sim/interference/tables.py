"""
CU-loss slowdown tables.

A SlowdownTable maps the CUs a kernel is given to its slowdown relative
to running alone on the whole GPU. Lookups interpolate linearly between
knots and clamp to the end values outside the table.

CSV format (one block per kernel class, cus strictly increasing):

    kernel_class,cus,slowdown
    gemm-compute-bound,8,38.0
    ...
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Tuple

import numpy as np

from ..hardware.machine import MachineDescriptor, machine_op_to_byte
from ..utils.exceptions import (
    EmptyTableError,
    MalformedTableError,
    MissingTableError,
    TableValidationError,
)
from ..utils.validators import PathLike, read_text
from ..workload.kernels import Boundedness, CollectiveKind, GemmKernel
from ..workload.roofline import classify_gemm_boundedness

logger = logging.getLogger(__name__)

DEFAULT_TABLES_FILE = "slowdown-tables.csv"
CSV_HEADER = ["kernel_class", "cus", "slowdown"]


class KernelClass(Enum):
    """Kernel classes that carry their own slowdown behavior."""
    GEMM_COMPUTE_BOUND = "gemm-compute-bound"
    GEMM_MEMORY_BOUND = "gemm-memory-bound"
    ALL_GATHER = "all-gather"
    ALL_TO_ALL = "all-to-all"

    @classmethod
    def for_gemm(cls, boundedness: Boundedness) -> "KernelClass":
        if boundedness == Boundedness.COMPUTE_BOUND:
            return cls.GEMM_COMPUTE_BOUND
        return cls.GEMM_MEMORY_BOUND

    @classmethod
    def for_collective(cls, kind: CollectiveKind) -> "KernelClass":
        return cls(kind.value)

    @property
    def is_communication(self) -> bool:
        return self in (KernelClass.ALL_GATHER, KernelClass.ALL_TO_ALL)


# CUs at which a CU-based collective stops speeding up.
COMM_SATURATION_CUS = {
    CollectiveKind.ALL_GATHER: 32,
    CollectiveKind.ALL_TO_ALL: 64,
}


@dataclass(frozen=True)
class SlowdownTable:
    kernel_class: KernelClass
    points: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((int(c), float(s)) for c, s in self.points))
        name = self.kernel_class.value
        previous = None
        for cus, slowdown in self.points:
            if cus < 1:
                raise TableValidationError(name, f"cus must be >= 1, got {cus}")
            if not (math.isfinite(slowdown) and slowdown > 0):
                raise TableValidationError(name, f"slowdown must be finite and > 0, got {slowdown} at {cus} CUs")
            if previous is not None and cus <= previous:
                raise TableValidationError(name, f"cus not strictly increasing at {cus}")
            previous = cus
        if self.points and self.points[-1][1] != 1.0:
            raise TableValidationError(
                name, f"slowdown at the largest CU count must be 1.0, got {self.points[-1][1]}"
            )

    @property
    def cus(self) -> List[int]:
        return [c for c, _ in self.points]

    def validate_for(self, md: MachineDescriptor) -> None:
        """Checks every knot is a grain multiple that fits the GPU."""
        for cus in self.cus:
            if cus % md.min_cu_grain != 0:
                raise TableValidationError(
                    self.kernel_class.value,
                    f"{cus} CUs is not a multiple of min_cu_grain {md.min_cu_grain}",
                )
            if cus > md.cus_per_gpu:
                raise TableValidationError(
                    self.kernel_class.value, f"{cus} CUs exceeds cus_per_gpu {md.cus_per_gpu}"
                )


SlowdownTables = Mapping[KernelClass, SlowdownTable]


# ----- Lookup -----

def slowdown_at(table: SlowdownTable, cus: int) -> float:
    """
    Slowdown of a kernel given `cus` CUs.

    Raises:
        EmptyTableError: If the table has no points
    """
    if not table.points:
        raise EmptyTableError(table.kernel_class.value)
    xs = [c for c, _ in table.points]
    ys = [s for _, s in table.points]
    return float(np.interp(cus, xs, ys))


def table_for(tables: SlowdownTables, kernel_class: KernelClass) -> SlowdownTable:
    try:
        return tables[kernel_class]
    except KeyError:
        raise MissingTableError(kernel_class.value)


# ----- Defaults -----

def comm_saturation_cus(kind: CollectiveKind) -> int:
    return COMM_SATURATION_CUS[kind]


def default_comm_table(kind: CollectiveKind, md: MachineDescriptor) -> SlowdownTable:
    """
    Bandwidth-proportional table for a CU-based collective.

    Below saturation the kernel's bandwidth scales with its CUs, so the
    slowdown is saturation/cus; at and above saturation it is 1.0. On
    GPUs smaller than the saturation point the whole GPU counts as
    saturated.
    """
    saturation = comm_saturation_cus(kind)
    knee = min(md.round_up_to_grain(saturation), md.cus_per_gpu)

    points = []
    for cus in range(md.min_cu_grain, knee, md.min_cu_grain):
        points.append((cus, max(saturation / cus, 1.0)))
    points.append((knee, 1.0))
    if md.cus_per_gpu > knee:
        points.append((md.cus_per_gpu, 1.0))
    return SlowdownTable(KernelClass.for_collective(kind), tuple(points))


def unit_table(kernel_class: KernelClass, md: MachineDescriptor) -> SlowdownTable:
    """A table with no CU-loss slowdown anywhere."""
    knots = sorted({md.min_cu_grain, md.cus_per_gpu})
    return SlowdownTable(kernel_class, tuple((c, 1.0) for c in knots))


def unit_tables(md: MachineDescriptor) -> Dict[KernelClass, SlowdownTable]:
    return {kc: unit_table(kc, md) for kc in KernelClass}


# ----- CSV I/O -----

def parse_slowdown_tables(text: str, source: str = "slowdown tables") -> Dict[KernelClass, SlowdownTable]:
    """
    Parses slowdown-table CSV text.

    Returns:
        Tables keyed by kernel class, in order of first appearance

    Raises:
        MalformedTableError: On a bad header, wrong column count or bad values
        TableValidationError: On non-monotone cus, slowdown <= 0 or a last
            knot other than 1.0
    """
    reader = csv.reader(io.StringIO(text))
    rows = [(line_no, row) for line_no, row in enumerate(reader, start=1) if row]
    if not rows:
        return {}

    header_line, header = rows[0]
    if [cell.strip() for cell in header] != CSV_HEADER:
        raise MalformedTableError(header_line, f"expected header {','.join(CSV_HEADER)}")

    grouped: Dict[KernelClass, List[Tuple[int, float]]] = {}
    for line_no, row in rows[1:]:
        if len(row) != len(CSV_HEADER):
            raise MalformedTableError(line_no, f"expected 3 columns, got {len(row)}")
        name, cus_text, slowdown_text = (cell.strip() for cell in row)
        try:
            kernel_class = KernelClass(name)
        except ValueError:
            raise MalformedTableError(line_no, f"unknown kernel class {name!r}")
        try:
            cus = int(cus_text)
            slowdown = float(slowdown_text)
        except ValueError:
            raise MalformedTableError(line_no, f"non-numeric value in {row!r}")
        grouped.setdefault(kernel_class, []).append((cus, slowdown))

    tables = {kc: SlowdownTable(kc, tuple(points)) for kc, points in grouped.items()}
    logger.debug("Loaded %d slowdown tables from %s", len(tables), source)
    return tables


def load_slowdown_tables(path: PathLike, md: MachineDescriptor = None) -> Dict[KernelClass, SlowdownTable]:
    """Loads tables from a CSV file, checking grain alignment if md is given."""
    tables = parse_slowdown_tables(read_text(path), source=str(path))
    if md is not None:
        for table in tables.values():
            table.validate_for(md)
    return tables


def save_slowdown_tables(tables: Iterable[SlowdownTable]) -> str:
    """Renders tables as CSV text; parsing the result gives equal tables."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for table in tables:
        for cus, slowdown in table.points:
            writer.writerow([table.kernel_class.value, cus, repr(slowdown)])
    return buffer.getvalue()


def default_slowdown_tables(md: MachineDescriptor = None) -> Dict[KernelClass, SlowdownTable]:
    """The shipped calibration tables for the MI300X node."""
    text = resources.files("c3sim.data").joinpath(DEFAULT_TABLES_FILE).read_text(encoding="utf-8")
    tables = parse_slowdown_tables(text, source=DEFAULT_TABLES_FILE)
    if md is not None:
        for table in tables.values():
            table.validate_for(md)
    return tables


def gemm_kernel_class(g: GemmKernel, md: MachineDescriptor) -> KernelClass:
    """Slowdown class of a GEMM on this machine."""
    return KernelClass.for_gemm(classify_gemm_boundedness(g, machine_op_to_byte(md)))
