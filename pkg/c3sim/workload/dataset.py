"""
Scenario dataset loading, saving and lookup.

The dataset file is a JSON array of scenario records. A scenario is
identified by its id together with its collective kind, so the same id
may appear once per collective.
"""

import json
import logging
from importlib import resources
from typing import List, Optional, Sequence

from ..utils.exceptions import ConfigParseError, InvariantViolationError, UnknownScenarioError
from ..utils.validators import PathLike, parse_json, read_text
from .kernels import C3Scenario, CollectiveKind

logger = logging.getLogger(__name__)

DEFAULT_DATASET_FILE = "c3-scenarios.json"


def parse_dataset(text: str, source: str = "dataset") -> List[C3Scenario]:
    """
    Parses a dataset document.

    An empty or whitespace-only document is an empty dataset.

    Raises:
        ConfigParseError: If the document is not a JSON array
        InvariantViolationError: On invalid records or duplicate scenarios
    """
    if not text.strip():
        return []

    records = parse_json(text, source)
    if not isinstance(records, list):
        raise ConfigParseError(source, "expected an array of scenario records")

    scenarios = []
    seen = set()
    for record in records:
        scenario = C3Scenario.from_dict(record)
        if scenario.key in seen:
            raise InvariantViolationError(
                "id", f"duplicate scenario {scenario.id} ({scenario.collective.kind.value}) in {source}"
            )
        seen.add(scenario.key)
        scenarios.append(scenario)

    logger.debug("Loaded %d scenarios from %s", len(scenarios), source)
    return scenarios


def load_dataset(path: PathLike) -> List[C3Scenario]:
    return parse_dataset(read_text(path), source=str(path))


def default_dataset() -> List[C3Scenario]:
    """The bundled 15 × 2 scenario set."""
    text = resources.files("c3sim.data").joinpath(DEFAULT_DATASET_FILE).read_text(encoding="utf-8")
    return parse_dataset(text, source=DEFAULT_DATASET_FILE)


def save_dataset(scenarios: Sequence[C3Scenario]) -> str:
    return json.dumps([s.to_dict() for s in scenarios], indent=2) + "\n"


def find_scenarios(
    scenarios: Sequence[C3Scenario],
    scenario_id: str,
    collective: Optional[str] = None,
) -> List[C3Scenario]:
    """
    Looks up scenarios by id, optionally narrowed to one collective kind.

    Raises:
        UnknownScenarioError: If nothing matches
    """
    kind = None
    if collective:
        try:
            kind = CollectiveKind(collective)
        except ValueError:
            raise UnknownScenarioError(scenario_id, collective)

    matches = [
        s for s in scenarios
        if s.id == scenario_id and (kind is None or s.collective.kind == kind)
    ]
    if not matches:
        raise UnknownScenarioError(scenario_id, collective)
    return matches
