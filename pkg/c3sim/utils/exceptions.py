"""
Centralized exception hierarchy for the C3 model.

All custom exceptions inherit from C3Error so callers can catch every
model failure in one place. Each family carries the process exit code the
command-line front end reports for it:

    2  load / parse failures (files, CSV rows, selector text)
    3  unknown entities (scenario ids, strategies, table classes)
    4  validation failures (invariants, plans, work conservation)
    5  calibration fit failures
"""


class C3Error(Exception):
    """Base exception for all C3 model errors."""

    exit_code = 1


# ----- Load / parse (exit 2) -----

class ConfigFileError(C3Error):
    """Raised when a configuration or data file cannot be read or written."""

    exit_code = 2

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"Cannot access '{path}': {reason}")


class ConfigParseError(C3Error):
    """Raised when a structured-text document does not parse."""

    exit_code = 2

    def __init__(self, source: str, reason: str):
        self.source = source
        self.reason = reason
        super().__init__(f"Cannot parse {source}: {reason}")


class MalformedTableError(C3Error):
    """Raised when a slowdown-table CSV row is malformed."""

    exit_code = 2

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"Malformed slowdown table row at line {line}: {reason}")


class SelectorSyntaxError(C3Error):
    """Raised when a scenario selector or size literal is invalid."""

    exit_code = 2

    def __init__(self, message: str, text: str = None):
        self.message = message
        self.text = text
        msg = f"Selector syntax error: {message}"
        if text:
            msg += f"\nSelector: {text}"
        super().__init__(msg)


# ----- Unknown entities (exit 3) -----

class UnknownScenarioError(C3Error):
    """Raised when a scenario id is not in the dataset."""

    exit_code = 3

    def __init__(self, scenario_id: str, collective: str = None):
        self.scenario_id = scenario_id
        self.collective = collective
        msg = f"Scenario '{scenario_id}' does not exist"
        if collective:
            msg += f" for collective '{collective}'"
        super().__init__(msg)


class UnknownStrategyError(C3Error):
    """Raised when a strategy name is not one of the known strategies."""

    exit_code = 3

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unknown strategy '{name}'")


class MissingTableError(C3Error):
    """Raised when no slowdown table exists for a kernel class."""

    exit_code = 3

    def __init__(self, kernel_class: str):
        self.kernel_class = kernel_class
        super().__init__(f"No slowdown table for kernel class '{kernel_class}'")


# ----- Validation (exit 4) -----

class InvariantViolationError(C3Error):
    """Raised when a value violates a documented invariant."""

    exit_code = 4

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"Invariant violation on '{field}': {reason}")


class NonPositiveTimeError(C3Error):
    """Raised when a time that must be positive is not."""

    exit_code = 4

    def __init__(self, name: str, value: float):
        self.name = name
        self.value = value
        super().__init__(f"'{name}' must be positive, got {value}")


class ZeroBandwidthError(C3Error):
    """Raised when a bandwidth used as a divisor is zero."""

    exit_code = 4

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Bandwidth '{name}' is zero")


class RankLimitError(C3Error):
    """Raised when a collective spans more ranks than the node holds."""

    exit_code = 4

    def __init__(self, n_ranks: int, gpus_per_node: int):
        self.n_ranks = n_ranks
        self.gpus_per_node = gpus_per_node
        super().__init__(
            f"Collective over {n_ranks} ranks exceeds node size of {gpus_per_node} GPUs"
        )


class EmptyTableError(C3Error):
    """Raised when looking up a slowdown in a table without points."""

    exit_code = 4

    def __init__(self, kernel_class: str):
        self.kernel_class = kernel_class
        super().__init__(f"Slowdown table '{kernel_class}' has no points")


class TableValidationError(C3Error):
    """Raised when a slowdown table breaks its ordering or value rules."""

    exit_code = 4

    def __init__(self, kernel_class: str, reason: str):
        self.kernel_class = kernel_class
        self.reason = reason
        super().__init__(f"Invalid slowdown table '{kernel_class}': {reason}")


class PlanValidationError(C3Error):
    """Base for transfer plans that do not produce the collective's result."""

    exit_code = 4


class IncompleteCoverageError(PlanValidationError):
    """Raised when a destination slot is not fully written."""

    def __init__(self, rank: int, slot: int):
        self.rank = rank
        self.slot = slot
        super().__init__(f"Incomplete coverage: rank {rank} slot {slot} not fully written")


class OverlappingWriteError(PlanValidationError):
    """Raised when two writes target the same destination bytes."""

    def __init__(self, rank: int, slot: int, offset: int):
        self.rank = rank
        self.slot = slot
        self.offset = offset
        super().__init__(
            f"Overlapping writes: rank {rank} slot {slot} written twice at byte offset {offset}"
        )


class DataMismatchError(PlanValidationError):
    """Raised when a destination slot holds the wrong source bytes."""

    def __init__(self, rank: int, slot: int):
        self.rank = rank
        self.slot = slot
        super().__init__(f"Data mismatch: rank {rank} slot {slot} holds unexpected bytes")


class InvalidTransferError(PlanValidationError):
    """Raised when a single transfer breaks a structural rule."""

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"Invalid transfer #{index}: {reason}")


class WorkConservationError(C3Error):
    """Raised when a timeline does not integrate to a kernel's work."""

    exit_code = 4

    def __init__(self, kernel: str, expected: float, actual: float):
        self.kernel = kernel
        self.expected = expected
        self.actual = actual
        self.relative_error = abs(actual - expected) / expected if expected else abs(actual)
        super().__init__(
            f"Work not conserved for '{kernel}': expected {expected!r}, "
            f"integrated {actual!r} (relative error {self.relative_error:.3e})"
        )


# ----- Calibration (exit 5) -----

class CalibrationError(C3Error):
    """Raised when model parameters cannot be fitted to measurements."""

    exit_code = 5

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Calibration failed: {reason}")
