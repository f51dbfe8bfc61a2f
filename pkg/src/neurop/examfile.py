"""Exam ingestion from JSON, with path-addressed errors.

The document shape::

    {
      "patient_id": "case-001",
      "nerves": [
        {
          "name": "median", "side": "left", "fibre": "motor",
          "segments": [
            {"index": 1, "amplitude": 8.2, "distal_latency": 3.1},
            {"index": 2, "amplitude": 7.9, "amplitude_ratio": 0.96, "velocity": 52.0}
          ]
        }
      ]
    }

Units are fixed per variable (mV for motor amplitudes, uV for sensory ones,
m/s for velocities, ms for latencies, ratio dimensionless). Any structural
problem is reported with the JSON path of the offending element, such as
``nerves[2].segments[0].amplitude``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Union

from .domain import (
    Exam,
    FibreType,
    MEASUREMENT_VARIABLES,
    NerveId,
    SegmentMeasurements,
    Side,
)


class ExamFormatError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _require(doc: dict, key: str, path: str) -> Any:
    if key not in doc:
        raise ExamFormatError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ExamFormatError(path, f"must be a number, got {value!r}")
    return float(value)


def exam_from_dict(doc: Any) -> Exam:
    """Build an Exam from a decoded JSON document.

    Only the document structure is checked here; semantic validity (segment
    counts, positivity, catalogue membership) is the job of validate_exam.
    """
    if not isinstance(doc, dict):
        raise ExamFormatError("$", f"exam document must be an object, got {type(doc).__name__}")
    unknown = set(doc) - {"patient_id", "nerves"}
    if unknown:
        raise ExamFormatError(sorted(unknown)[0], "unknown field")
    patient_id = _require(doc, "patient_id", "")
    if not isinstance(patient_id, str) or not patient_id:
        raise ExamFormatError("patient_id", f"must be a non-empty string, got {patient_id!r}")
    nerves_doc = _require(doc, "nerves", "")
    if not isinstance(nerves_doc, list):
        raise ExamFormatError("nerves", "must be an array")

    nerves = []
    for n_idx, nerve_doc in enumerate(nerves_doc):
        npath = f"nerves[{n_idx}]"
        if not isinstance(nerve_doc, dict):
            raise ExamFormatError(npath, "must be an object")
        unknown = set(nerve_doc) - {"name", "side", "fibre", "segments"}
        if unknown:
            raise ExamFormatError(f"{npath}.{sorted(unknown)[0]}", "unknown field")
        name = _require(nerve_doc, "name", npath)
        side_token = _require(nerve_doc, "side", npath)
        fibre_token = _require(nerve_doc, "fibre", npath)
        try:
            side = Side(side_token)
        except ValueError:
            raise ExamFormatError(
                f"{npath}.side",
                f"must be one of {sorted(s.value for s in Side)}, got {side_token!r}",
            ) from None
        try:
            fibre = FibreType(fibre_token)
        except ValueError:
            raise ExamFormatError(
                f"{npath}.fibre",
                f"must be one of {sorted(f.value for f in FibreType)}, got {fibre_token!r}",
            ) from None
        try:
            nerve = NerveId(name, side, fibre)
        except (ValueError, TypeError) as exc:
            raise ExamFormatError(f"{npath}.name", str(exc)) from None

        segments_doc = _require(nerve_doc, "segments", npath)
        if not isinstance(segments_doc, list):
            raise ExamFormatError(f"{npath}.segments", "must be an array")
        segments = []
        for s_idx, seg_doc in enumerate(segments_doc):
            spath = f"{npath}.segments[{s_idx}]"
            if not isinstance(seg_doc, dict):
                raise ExamFormatError(spath, "must be an object")
            unknown = set(seg_doc) - ({"index"} | set(MEASUREMENT_VARIABLES))
            if unknown:
                raise ExamFormatError(f"{spath}.{sorted(unknown)[0]}", "unknown field")
            index = _require(seg_doc, "index", spath)
            if isinstance(index, bool) or not isinstance(index, int):
                raise ExamFormatError(f"{spath}.index", f"must be an integer, got {index!r}")
            values = {
                variable: _number(seg_doc[variable], f"{spath}.{variable}")
                for variable in MEASUREMENT_VARIABLES
                if variable in seg_doc
            }
            segments.append(SegmentMeasurements(index=index, **values))
        nerves.append((nerve, tuple(segments)))
    return Exam(patient_id, tuple(nerves))


def load_exam(path: Union[str, Path]) -> Exam:
    """Read and decode one exam file. Missing files raise FileNotFoundError."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ExamFormatError("$", f"invalid JSON: {exc}") from exc
    return exam_from_dict(doc)
