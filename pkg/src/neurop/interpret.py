"""Phase-1 interpretation: continuous measurements to semantic categories.

Cutoff values live in an editable threshold table, never in code. Each
variable is classified against a (mild, severe) cutoff pair whose direction
says whether low or high values are abnormal; the direction also fixes which
three-element category set the variable ranges over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .domain import (
    SegmentMeasurements,
    SegmentType,
    SemanticCategory,
    SemanticFact,
)


class Direction(str, Enum):
    LOW_IS_ABNORMAL = "low_is_abnormal"
    HIGH_IS_ABNORMAL = "high_is_abnormal"


LOW_CATEGORIES = (
    SemanticCategory.NORMAL,
    SemanticCategory.DECREASED,
    SemanticCategory.VERY_DECREASED,
)
HIGH_CATEGORIES = (
    SemanticCategory.NORMAL,
    SemanticCategory.INCREASED,
    SemanticCategory.VERY_INCREASED,
)

# Variables measured per segment type. The amplitude ratio of a sensory
# study exists only from the second segment on (it needs a predecessor).
_BASE_VARIABLES: dict[SegmentType, tuple[str, ...]] = {
    SegmentType.SENSORY_ANY: ("amplitude", "velocity"),
    SegmentType.MOTOR_FIRST: ("amplitude", "distal_latency"),
    SegmentType.MOTOR_SUBSEQUENT: ("amplitude", "amplitude_ratio", "velocity"),
}
_SENSORY_RATIO_INDEX = 2


def required_variables(segment_type: SegmentType, index: int) -> tuple[str, ...]:
    """Exact variable list a segment of this type and index must carry."""
    base = _BASE_VARIABLES[segment_type]
    if segment_type is SegmentType.SENSORY_ANY and index >= _SENSORY_RATIO_INDEX:
        return base + ("amplitude_ratio",)
    return base


def declarable_variables(segment_type: SegmentType) -> tuple[str, ...]:
    """All variables the threshold table must cover for a segment type."""
    if segment_type is SegmentType.SENSORY_ANY:
        return _BASE_VARIABLES[segment_type] + ("amplitude_ratio",)
    return _BASE_VARIABLES[segment_type]


class InterpretationError(ValueError):
    pass


@dataclass(frozen=True)
class VariableSpec:
    """Cutoff pair for one (segment type, variable) combination."""

    variable: str
    direction: Direction
    mild_cutoff: float
    severe_cutoff: float

    def __post_init__(self) -> None:
        if self.direction is Direction.LOW_IS_ABNORMAL:
            if not self.severe_cutoff < self.mild_cutoff:
                raise ValueError(
                    f"{self.variable}: low_is_abnormal needs severe_cutoff < mild_cutoff,"
                    f" got {self.severe_cutoff} >= {self.mild_cutoff}"
                )
        else:
            if not self.severe_cutoff > self.mild_cutoff:
                raise ValueError(
                    f"{self.variable}: high_is_abnormal needs severe_cutoff > mild_cutoff,"
                    f" got {self.severe_cutoff} <= {self.mild_cutoff}"
                )

    @property
    def categories(self) -> tuple[SemanticCategory, ...]:
        return LOW_CATEGORIES if self.direction is Direction.LOW_IS_ABNORMAL else HIGH_CATEGORIES

    @property
    def domain(self) -> frozenset[str]:
        return frozenset(c.value for c in self.categories)


def classify(value: float, spec: VariableSpec) -> SemanticCategory:
    """Map one measurement onto its semantic category.

    Cutoff values themselves classify toward the less-abnormal category, so
    a value exactly at the mild cutoff is still normal.
    """
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise InterpretationError(f"{spec.variable}: value must be finite, got {value!r}")
    if value <= 0:
        raise InterpretationError(f"{spec.variable}: value must be positive, got {value!r}")
    if spec.direction is Direction.LOW_IS_ABNORMAL:
        if value >= spec.mild_cutoff:
            return SemanticCategory.NORMAL
        if value >= spec.severe_cutoff:
            return SemanticCategory.DECREASED
        return SemanticCategory.VERY_DECREASED
    if value <= spec.mild_cutoff:
        return SemanticCategory.NORMAL
    if value <= spec.severe_cutoff:
        return SemanticCategory.INCREASED
    return SemanticCategory.VERY_INCREASED


@dataclass(frozen=True)
class ThresholdTable:
    """All cutoff specs, keyed by (segment type, variable)."""

    entries: Mapping[tuple[SegmentType, str], VariableSpec]

    def spec_for(self, segment_type: SegmentType, variable: str) -> VariableSpec:
        try:
            return self.entries[(segment_type, variable)]
        except KeyError:
            raise InterpretationError(
                f"no threshold spec for ({segment_type.value}, {variable})"
            ) from None

    def domains_for(self, segment_type: SegmentType) -> dict[str, frozenset[str]]:
        """Category domain of every variable declarable for a segment type."""
        return {
            variable: self.spec_for(segment_type, variable).domain
            for variable in declarable_variables(segment_type)
        }

    def check_complete(self) -> list[str]:
        """Return one message per missing or extraneous table entry."""
        problems = []
        expected = {
            (segment_type, variable)
            for segment_type in SegmentType
            for variable in declarable_variables(segment_type)
        }
        for key in sorted(expected - set(self.entries), key=lambda k: (k[0].value, k[1])):
            problems.append(f"missing threshold record for ({key[0].value}, {key[1]})")
        for key in sorted(set(self.entries) - expected, key=lambda k: (k[0].value, k[1])):
            problems.append(f"variable {key[1]!r} is not measured on {key[0].value} segments")
        return problems


def interpret_segment(
    measurements: SegmentMeasurements,
    segment_type: SegmentType,
    table: ThresholdTable,
) -> frozenset[SemanticFact]:
    """Produce exactly one semantic fact per variable required for the segment.

    A present measurement the segment type does not declare, or a missing
    required one, is an error: both indicate the exam does not match the
    standardized chart for that segment.
    """
    required = required_variables(segment_type, measurements.index)
    present = measurements.present_variables()
    for variable in present:
        if variable not in required:
            raise InterpretationError(
                f"variable {variable!r} not expected on a {segment_type.value}"
                f" segment at index {measurements.index}"
            )
    facts = []
    for variable in required:
        value = measurements.value_of(variable)
        if value is None:
            raise InterpretationError(
                f"required variable {variable!r} missing from segment {measurements.index}"
            )
        category = classify(value, table.spec_for(segment_type, variable))
        facts.append(SemanticFact(variable, category.value))
    return frozenset(facts)


class ThresholdParseError(ValueError):
    """Raised on a malformed threshold file; carries per-line messages."""

    def __init__(self, source: str, errors: list[str]):
        self.source = source
        self.errors = errors
        super().__init__(f"{source}: " + "; ".join(errors))


def parse_thresholds(text: str, source: str = "thresholds.tbl") -> ThresholdTable:
    """Parse the threshold file: one ``segment_type variable direction mild severe``
    record per line, ``#`` comments allowed."""
    entries: dict[tuple[SegmentType, str], VariableSpec] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 5:
            errors.append(f"line {lineno}: expected 5 fields, got {len(tokens)}")
            continue
        type_token, variable, direction_token, mild_token, severe_token = tokens
        try:
            segment_type = SegmentType(type_token)
        except ValueError:
            errors.append(f"line {lineno}: unknown segment type {type_token!r}")
            continue
        if variable not in declarable_variables(segment_type):
            errors.append(
                f"line {lineno}: variable {variable!r} is not measured on {segment_type.value} segments"
            )
            continue
        try:
            direction = Direction(direction_token)
        except ValueError:
            errors.append(f"line {lineno}: unknown direction {direction_token!r}")
            continue
        try:
            mild = float(mild_token)
            severe = float(severe_token)
        except ValueError:
            errors.append(f"line {lineno}: cutoffs must be numbers, got {mild_token!r} {severe_token!r}")
            continue
        key = (segment_type, variable)
        if key in entries:
            errors.append(f"line {lineno}: duplicate record for ({segment_type.value}, {variable})")
            continue
        try:
            entries[key] = VariableSpec(variable, direction, mild, severe)
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")
    table = ThresholdTable(entries)
    errors.extend(table.check_complete())
    if errors:
        raise ThresholdParseError(source, errors)
    return table
