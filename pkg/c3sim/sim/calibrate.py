"""
Least-squares fit of model parameters to measured speedups.

Measured CSV (one row per scenario × strategy run on hardware):

    scenario_id,strategy,measured_speedup[,collective]

The fit adjusts the co-run penalties of the communication kernel classes
for whichever backends the measured strategies use (c3_* runs on CUs,
conccl* on DMA engines) and, optionally, the two DMA overheads of the
machine. Residuals are simulated minus measured speedup.

Where both backends of a class are fitted, the DMA factor is carried as
1 + (CU − 1)·u with u in [0, 1], so every trial point keeps DMA ≤ CU.
"""

import csv
import dataclasses
import io
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ..hardware.machine import MachineDescriptor
from ..interference.penalty import Backend, CoRunPenalty, PenaltyKey
from ..interference.tables import KernelClass, SlowdownTables
from ..params import ModelParams
from ..utils.exceptions import C3Error, CalibrationError, UnknownScenarioError, UnknownStrategyError
from ..workload.dataset import find_scenarios
from ..workload.kernels import C3Scenario
from .engine import StrategyName, simulate

logger = logging.getLogger(__name__)

MEASURED_COLUMNS = ("scenario_id", "strategy", "measured_speedup")
MIN_MEASUREMENTS = 3
PENALTY_BOUNDS = (1.0, 10.0)
OVERHEAD_BOUNDS = (0.0, 1e-3)
OVERHEAD_FIELDS = ("cpu_launch_overhead", "dma_sync_overhead")


@dataclass(frozen=True)
class Measurement:
    scenario_id: str
    strategy: StrategyName
    measured_speedup: float
    collective: Optional[str] = None


@dataclass(frozen=True)
class Residual:
    scenario_id: str
    collective: str
    strategy: str
    measured: float
    simulated: float

    @property
    def error(self) -> float:
        return self.simulated - self.measured

    def to_dict(self) -> Dict[str, object]:
        return {
            "scenario_id": self.scenario_id,
            "collective": self.collective,
            "strategy": self.strategy,
            "measured_speedup": self.measured,
            "simulated_speedup": self.simulated,
            "residual": self.error,
        }


@dataclass(frozen=True)
class CalibrationResult:
    params: ModelParams
    machine: MachineDescriptor
    fitted: Dict[str, float]
    residuals: Tuple[Residual, ...]
    rms: float
    iterations: int


# ----- Measured CSV -----

def parse_measurements(text: str, source: str = "measurements") -> List[Measurement]:
    """
    Parses a measured-speedup CSV.

    Raises:
        CalibrationError: On a missing column, an empty file, an unknown
            strategy or a non-positive speedup
    """
    reader = csv.DictReader(io.StringIO(text))
    columns = [name.strip() for name in (reader.fieldnames or [])]
    if not columns:
        raise CalibrationError(f"{source} is empty")
    missing = [name for name in MEASURED_COLUMNS if name not in columns]
    if missing:
        raise CalibrationError(f"{source} lacks column(s) {', '.join(missing)}")

    measurements = []
    for line_no, raw in enumerate(reader, start=2):
        row = {key.strip(): (value or "").strip() for key, value in raw.items() if key is not None}
        if not any(row.values()):
            continue
        try:
            strategy = StrategyName.parse(row["strategy"])
        except UnknownStrategyError as exc:
            raise CalibrationError(f"{source} line {line_no}: {exc}")
        try:
            speedup = float(row["measured_speedup"])
        except ValueError:
            raise CalibrationError(f"{source} line {line_no}: bad speedup {row['measured_speedup']!r}")
        if not speedup > 0 or math.isinf(speedup):
            raise CalibrationError(f"{source} line {line_no}: speedup must be a positive number")
        measurements.append(
            Measurement(
                scenario_id=row["scenario_id"],
                strategy=strategy,
                measured_speedup=speedup,
                collective=row.get("collective") or None,
            )
        )

    logger.debug("Read %d measurements from %s", len(measurements), source)
    return measurements


def _resolve(measurements: Sequence[Measurement], scenarios: Sequence[C3Scenario]) -> List[C3Scenario]:
    resolved = []
    for m in measurements:
        try:
            matches = find_scenarios(scenarios, m.scenario_id, m.collective)
        except UnknownScenarioError as exc:
            raise CalibrationError(str(exc))
        if len(matches) > 1:
            raise CalibrationError(
                f"scenario {m.scenario_id!r} exists under several collectives; add a collective column"
            )
        resolved.append(matches[0])
    return resolved


# ----- Parameter vector -----

@dataclass(frozen=True)
class _Slot:
    """One entry of the solver's vector and how it maps back onto the model."""
    name: str
    lower: float
    upper: float
    start: float


def _penalty_layout(
    keys: Sequence[PenaltyKey], penalties: CoRunPenalty
) -> Tuple[List[_Slot], Callable[[Sequence[float]], Dict[PenaltyKey, float]]]:
    slots: List[_Slot] = []
    decoders: List[Callable[[Sequence[float]], Dict[PenaltyKey, float]]] = []
    lo, hi = PENALTY_BOUNDS

    for kernel_class in KernelClass:
        backends = {b for kc, b in keys if kc == kernel_class}
        if not backends:
            continue
        cu_key, dma_key = (kernel_class, Backend.CU), (kernel_class, Backend.DMA)
        cu_now = penalties.factor(kernel_class, Backend.CU)
        dma_now = penalties.factor(kernel_class, Backend.DMA)

        if backends == {Backend.CU, Backend.DMA}:
            i = len(slots)
            share = (dma_now - 1.0) / (cu_now - 1.0) if cu_now > 1.0 else 0.5
            slots.append(_Slot(f"{kernel_class.value}/CU", lo, hi, cu_now))
            slots.append(_Slot(f"{kernel_class.value}/DMA share", 0.0, 1.0, min(max(share, 0.0), 1.0)))
            decoders.append(
                lambda x, i=i, cu_key=cu_key, dma_key=dma_key: {
                    cu_key: x[i],
                    dma_key: min(x[i], 1.0 + (x[i] - 1.0) * x[i + 1]),
                }
            )
            continue

        backend = backends.pop()
        if backend == Backend.CU:
            lower = max(lo, penalties.factors.get(dma_key, lo))
            upper, start, key = hi, cu_now, cu_key
        else:
            lower = lo
            upper, start, key = min(hi, penalties.factors.get(cu_key, hi)), dma_now, dma_key
        if upper <= lower:
            logger.warning("%s/%s is pinned at %.6g by its other backend", kernel_class.value, backend.value, lower)
            continue
        i = len(slots)
        slots.append(_Slot(f"{kernel_class.value}/{backend.value}", lower, upper, start))
        decoders.append(lambda x, i=i, key=key: {key: x[i]})

    def decode(x: Sequence[float]) -> Dict[PenaltyKey, float]:
        updates: Dict[PenaltyKey, float] = {}
        for decoder in decoders:
            updates.update(decoder(x))
        return updates

    return slots, decode


def _fitted_keys(scenarios: Sequence[C3Scenario], measurements: Sequence[Measurement]) -> List[PenaltyKey]:
    keys = set()
    for scenario, m in zip(scenarios, measurements):
        comm_class = KernelClass.for_collective(scenario.collective.kind)
        if m.strategy.is_c3:
            keys.add((comm_class, Backend.CU))
        elif m.strategy != StrategyName.SERIAL:
            keys.add((comm_class, Backend.DMA))
    return sorted(keys, key=lambda k: (list(KernelClass).index(k[0]), k[1].value))


# ----- Fit -----

def calibrate(
    measurements: Sequence[Measurement],
    scenarios: Sequence[C3Scenario],
    md: MachineDescriptor,
    tables: SlowdownTables,
    params: ModelParams,
    fit_overheads: bool = False,
) -> CalibrationResult:
    """
    Fits co-run penalties (and optionally DMA overheads) to measurements.

    Args:
        measurements: Measured speedups over the serial baseline
        scenarios: Dataset the measurements refer to
        md: Machine descriptor (starting overheads)
        tables: Slowdown tables
        params: Starting parameters; unfitted entries are kept
        fit_overheads: Also fit cpu_launch_overhead and dma_sync_overhead

    Returns:
        CalibrationResult with fitted params, machine and residual report

    Raises:
        CalibrationError: On fewer than three measurements, nothing to fit
            or a solver failure
    """
    if len(measurements) < MIN_MEASUREMENTS:
        raise CalibrationError(
            f"need at least {MIN_MEASUREMENTS} measurements, got {len(measurements)}"
        )
    resolved = _resolve(measurements, scenarios)

    slots, decode = _penalty_layout(_fitted_keys(resolved, measurements), params.penalties)
    n_penalty = len(slots)
    if fit_overheads:
        for name in OVERHEAD_FIELDS:
            slots.append(_Slot(name, *OVERHEAD_BOUNDS, getattr(md, name)))
    if not slots:
        raise CalibrationError("measurements only cover the serial strategy; nothing to fit")

    lower = np.array([s.lower for s in slots])
    upper = np.array([s.upper for s in slots])
    x0 = np.clip(np.array([s.start for s in slots]), lower, upper)
    measured = np.array([m.measured_speedup for m in measurements])

    def build(x: Sequence[float]) -> Tuple[MachineDescriptor, ModelParams]:
        trial_params = dataclasses.replace(params, penalties=params.penalties.with_factors(decode(x)))
        trial_md = md
        if fit_overheads:
            trial_md = dataclasses.replace(
                md, **{name: float(x[n_penalty + j]) for j, name in enumerate(OVERHEAD_FIELDS)}
            )
        return trial_md, trial_params

    def speedups(x: Sequence[float]) -> np.ndarray:
        trial_md, trial_params = build(x)
        return np.array([
            simulate(scenario, m.strategy, trial_md, tables, trial_params).speedup
            for scenario, m in zip(resolved, measurements)
        ])

    def residuals(x: np.ndarray) -> np.ndarray:
        r = speedups(x) - measured
        logger.debug("Fit step %s -> rms %.6g", np.array2string(x, precision=6), float(np.sqrt(np.mean(r ** 2))))
        return r

    try:
        fit = least_squares(
            residuals,
            x0,
            bounds=(lower, upper),
            method="trf",
            x_scale="jac",
            ftol=1e-12,
            xtol=1e-12,
            gtol=1e-12,
        )
    except C3Error as exc:
        raise CalibrationError(f"simulation failed during fit: {exc}")
    if not fit.success:
        raise CalibrationError(fit.message)

    fitted_md, fitted_params = build(fit.x)
    simulated = speedups(fit.x)

    fitted: Dict[str, float] = {}
    for (kernel_class, backend), value in decode(fit.x).items():
        fitted[f"{kernel_class.value}/{backend.value}"] = value
    for name in OVERHEAD_FIELDS if fit_overheads else ():
        fitted[name] = getattr(fitted_md, name)

    for slot, value in zip(slots, fit.x):
        if np.isclose(value, slot.lower) or np.isclose(value, slot.upper):
            logger.warning("Fitted %s sits on its bound (%.6g)", slot.name, value)

    report = tuple(
        Residual(
            scenario_id=scenario.id,
            collective=scenario.collective.kind.value,
            strategy=m.strategy.value,
            measured=m.measured_speedup,
            simulated=float(s),
        )
        for scenario, m, s in zip(resolved, measurements, simulated)
    )
    rms = float(np.sqrt(np.mean((simulated - measured) ** 2)))
    logger.info("Calibration converged after %d evaluations, rms %.6g", fit.nfev, rms)

    return CalibrationResult(
        params=fitted_params,
        machine=fitted_md,
        fitted=fitted,
        residuals=report,
        rms=rms,
        iterations=int(fit.nfev),
    )
