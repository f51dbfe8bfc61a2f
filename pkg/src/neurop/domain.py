"""Shared vocabulary for electrodiagnostic neuropathy reasoning.

Everything downstream (interpretation, segment rules, the nerve automaton,
patient synthesis) speaks in these types: fibres, nerves, segments, semantic
categories, and the three diagnosis taxonomies. All values are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence


class FibreType(str, Enum):
    SENSORY = "sensory"
    MOTOR = "motor"


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def opposite(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class SemanticCategory(str, Enum):
    """Qualitative value of an interpreted electrophysiological variable.

    A given variable ranges over exactly one of the two three-element sets
    {normal, decreased, very_decreased} or {normal, increased, very_increased},
    depending on which direction of deviation is abnormal for it.
    """

    NORMAL = "normal"
    DECREASED = "decreased"
    VERY_DECREASED = "very_decreased"
    INCREASED = "increased"
    VERY_INCREASED = "very_increased"


class SegmentDx(str, Enum):
    """Diagnosis of a single nerve segment.

    ``unclassified`` is the reserved outcome for a segment no rule covered;
    it counts as pathological downstream and is flagged in reports.
    """

    NORMAL = "normal"
    MILD_AXONAL = "mild_axonal"
    SEVERE_AXONAL = "severe_axonal"
    MILD_DEMYELINATING = "mild_demyelinating"
    SEVERE_DEMYELINATING = "severe_demyelinating"
    MILD_MIXED = "mild_mixed"
    SEVERE_MIXED = "severe_mixed"
    UNCLASSIFIED = "unclassified"

    @property
    def is_pathological(self) -> bool:
        return self is not SegmentDx.NORMAL


class NerveDx(str, Enum):
    NORMAL = "normal"
    FOCAL = "focal"
    MULTIPLE_FOCAL = "multiple_focal"
    DIFFUSE = "diffuse"


class PatientDx(str, Enum):
    FOCAL_MONO_NEUROPATHY = "focal_mono_neuropathy"
    MULTIPLE_FOCAL_NEUROPATHY = "multiple_focal_neuropathy"
    DIFFUSE_MONO_NEUROPATHY = "diffuse_mono_neuropathy"
    SYMMETRICAL_POLY_NEUROPATHY = "symmetrical_poly_neuropathy"
    ASYMMETRICAL_POLY_NEUROPATHY = "asymmetrical_poly_neuropathy"
    UNCERTAIN_DIAGNOSIS = "uncertain_diagnosis"
    NORMAL_EXAMINATION = "normal_examination"


@dataclass(frozen=True)
class NerveId:
    """Identity of one studied nerve.

    Sensory and motor studies of the same anatomical nerve are distinct
    identities (the fibre type is part of the identity).
    """

    name: str
    side: Side
    fibre: FibreType

    def __post_init__(self) -> None:
        if not self.name or not self.name.isidentifier():
            raise ValueError(f"nerve name must be a non-empty identifier, got {self.name!r}")

    @property
    def selector(self) -> str:
        """Canonical ``name:side:fibre`` form used by the CLI and reports."""
        return f"{self.name}:{self.side.value}:{self.fibre.value}"

    @classmethod
    def parse(cls, text: str) -> "NerveId":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"nerve selector must look like name:side:fibre, got {text!r}")
        name, side, fibre = parts
        try:
            return cls(name, Side(side), FibreType(fibre))
        except ValueError as exc:
            raise ValueError(f"bad nerve selector {text!r}: {exc}") from exc

    def sort_key(self) -> tuple[str, str, str]:
        return (self.name, self.side.value, self.fibre.value)

    def __str__(self) -> str:
        return self.selector


def homologous(a: NerveId, b: NerveId) -> bool:
    """True iff ``a`` and ``b`` are the same nerve and fibre on opposite sides."""
    return a.name == b.name and a.fibre == b.fibre and a.side != b.side


class SegmentType(str, Enum):
    """Kind of segment, fixing which variables are measured on it."""

    SENSORY_ANY = "sensory_any"
    MOTOR_FIRST = "motor_first"
    MOTOR_SUBSEQUENT = "motor_subsequent"

    @classmethod
    def for_segment(cls, fibre: FibreType, index: int) -> "SegmentType":
        if fibre is FibreType.SENSORY:
            if not 1 <= index <= SENSORY_MAX_SEGMENTS:
                raise ValueError(f"sensory segment index must be 1..{SENSORY_MAX_SEGMENTS}, got {index}")
            return cls.SENSORY_ANY
        if not 1 <= index <= MOTOR_MAX_SEGMENTS:
            raise ValueError(f"motor segment index must be 1..{MOTOR_MAX_SEGMENTS}, got {index}")
        return cls.MOTOR_FIRST if index == 1 else cls.MOTOR_SUBSEQUENT


SENSORY_MAX_SEGMENTS = 2
MOTOR_MAX_SEGMENTS = 5

# Units are fixed per variable: amplitude in mV (motor) or uV (sensory),
# velocity in m/s, distal latency in ms, amplitude ratio dimensionless.
MEASUREMENT_VARIABLES = ("amplitude", "velocity", "distal_latency", "amplitude_ratio")


@dataclass(frozen=True)
class SegmentMeasurements:
    """Raw continuous values recorded for one nerve segment.

    Fields other than the index are optional; which of them must be present
    depends on the segment type and is enforced at interpretation time.
    """

    index: int
    amplitude: Optional[float] = None
    velocity: Optional[float] = None
    distal_latency: Optional[float] = None
    amplitude_ratio: Optional[float] = None

    def value_of(self, variable: str) -> Optional[float]:
        if variable not in MEASUREMENT_VARIABLES:
            raise KeyError(f"unknown measurement variable {variable!r}")
        return getattr(self, variable)

    def present_variables(self) -> tuple[str, ...]:
        return tuple(v for v in MEASUREMENT_VARIABLES if getattr(self, v) is not None)


@dataclass(frozen=True)
class SemanticFact:
    """A (variable, symbol) binding, the premise currency of every ruleset.

    At the segment level the symbol is a semantic category; at the patient
    level it is one of the synthesis predicates' values.
    """

    variable: str
    value: str

    def __post_init__(self) -> None:
        # Normalize enum members so facts hash and compare as plain strings.
        for name in ("variable", "value"):
            raw = getattr(self, name)
            if isinstance(raw, Enum):
                object.__setattr__(self, name, raw.value)


@dataclass(frozen=True)
class Exam:
    """One patient examination: the physician-selected nerves and their segments."""

    patient_id: str
    nerves: tuple[tuple[NerveId, tuple[SegmentMeasurements, ...]], ...]


class ExamValidationError(ValueError):
    """Raised by validate_exam; carries every violation found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def validate_exam(exam: Exam, catalogue: Optional[frozenset[str]] = None) -> Exam:
    """Check all structural exam invariants, reporting every violation at once.

    Returns the exam unchanged when it is valid. When a nerve catalogue is
    given, nerve names must appear in it. Validation is idempotent.
    """
    errors: list[str] = []
    seen: set[NerveId] = set()
    for n_idx, (nerve, segments) in enumerate(exam.nerves):
        where = f"nerves[{n_idx}] ({nerve.selector})"
        if nerve in seen:
            errors.append(f"{where}: duplicate nerve")
        seen.add(nerve)
        if catalogue is not None and nerve.name not in catalogue:
            errors.append(f"{where}: nerve name {nerve.name!r} not in catalogue")
        limit = SENSORY_MAX_SEGMENTS if nerve.fibre is FibreType.SENSORY else MOTOR_MAX_SEGMENTS
        if not 1 <= len(segments) <= limit:
            errors.append(f"{where}: segment count {len(segments)} out of range 1..{limit}")
        for s_idx, seg in enumerate(segments):
            if seg.index != s_idx + 1:
                errors.append(
                    f"{where}.segments[{s_idx}]: non-contiguous segment indices"
                    f" (index {seg.index}, expected {s_idx + 1})"
                )
            for variable in MEASUREMENT_VARIABLES:
                value = getattr(seg, variable)
                if value is None:
                    continue
                if not isinstance(value, (int, float)) or isinstance(value, bool) \
                        or not math.isfinite(value) or value <= 0:
                    errors.append(
                        f"{where}.segments[{s_idx}].{variable}:"
                        f" must be a finite positive number, got {value!r}"
                    )
    if errors:
        raise ExamValidationError(errors)
    return exam
