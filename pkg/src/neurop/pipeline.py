"""The supervising inference engine: four phases over a central working memory.

Phase 1 interprets every segment's measurements into semantic facts, phase 2
fires the segment rulesets, phase 3 runs the automaton per nerve, phase 4
synthesizes the patient diagnosis. Phases run strictly in order for the whole
exam and each phase reads only the stores written before it, so any earlier
store can be discarded once its successor is built.

Reports are normalized for reproducibility: nerves are processed and listed
in (name, side, fibre) order, segments by index, facts by variable name, and
the JSON rendering sorts its keys. Identical exam and knowledge base inputs
therefore produce byte-identical reports regardless of input nerve order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

from .automaton import (
    AutomatonDef,
    AutomatonState,
    TransitionTableError,
    parse_transitions,
    run,
    state_to_dx,
    to_chain,
)
from .domain import (
    Exam,
    NerveDx,
    NerveId,
    PatientDx,
    SegmentDx,
    SegmentType,
    SemanticFact,
    validate_exam,
)
from .interpret import (
    InterpretationError,
    ThresholdParseError,
    ThresholdTable,
    parse_thresholds,
    interpret_segment,
)
from .rules import RuleParseError, RuleSet, fire, parse_ruleset
from .synthesis import (
    LEVEL3_DOMAINS,
    LEVEL3_TARGET,
    NerveResult,
    PatientSelection,
    select_patient_dx,
    summarize,
)

KB_FILE_NAMES = (
    "nerves.cat",
    "thresholds.tbl",
    "level1_sensory.rules",
    "level1_motor_first.rules",
    "level1_motor_subsequent.rules",
    "automaton.tr",
    "level3.rules",
)

LEVEL1_FILES: Mapping[SegmentType, str] = {
    SegmentType.SENSORY_ANY: "level1_sensory.rules",
    SegmentType.MOTOR_FIRST: "level1_motor_first.rules",
    SegmentType.MOTOR_SUBSEQUENT: "level1_motor_subsequent.rules",
}

LEVEL1_TARGET = "lesion"
# Rules may conclude any segment diagnosis except the reserved no-match label.
LEVEL1_CONCLUSIONS = frozenset(dx.value for dx in SegmentDx if dx is not SegmentDx.UNCLASSIFIED)


# ---------------------------------------------------------------------------
# Knowledge base loading


@dataclass(frozen=True)
class KBIssue:
    kind: str  # "missing" | "parse" | "invalid"
    message: str


@dataclass
class KBFileCheck:
    name: str
    issues: list[KBIssue]

    @property
    def ok(self) -> bool:
        return not self.issues


@dataclass
class KBCheck:
    root: Path
    files: list[KBFileCheck]

    @property
    def ok(self) -> bool:
        return all(f.ok for f in self.files)

    def issues_of_kind(self, kind: str) -> list[KBIssue]:
        return [issue for f in self.files for issue in f.issues if issue.kind == kind]


class KBLoadError(ValueError):
    """Raised when the knowledge base directory fails validation."""

    def __init__(self, check: KBCheck):
        self.check = check
        lines = []
        for f in check.files:
            for issue in f.issues:
                lines.append(f"{f.name}: {issue.message}")
        super().__init__(f"knowledge base at {check.root} is invalid: " + "; ".join(lines))


@dataclass(frozen=True)
class KnowledgeBase:
    """All knowledge sources, loaded, cross-checked, and fingerprinted."""

    root: Path
    catalogue: frozenset[str]
    thresholds: ThresholdTable
    level1: Mapping[SegmentType, RuleSet]
    automaton: AutomatonDef
    level3: RuleSet
    fingerprint: str


def parse_catalogue(text: str, source: str = "nerves.cat") -> frozenset[str]:
    """One nerve name per line; ``#`` comments allowed."""
    names: list[str] = []
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.isidentifier():
            errors.append(f"line {lineno}: nerve name must be a single identifier, got {line!r}")
        elif line in names:
            errors.append(f"line {lineno}: duplicate nerve name {line!r}")
        else:
            names.append(line)
    if not names and not errors:
        errors.append("catalogue declares no nerves")
    if errors:
        raise ValueError(f"{source}: " + "; ".join(errors))
    return frozenset(names)


def _fingerprint(root: Path) -> str:
    digest = hashlib.sha256()
    for name in KB_FILE_NAMES:
        digest.update(name.encode())
        digest.update(b"\0")
        digest.update((root / name).read_bytes())
        digest.update(b"\0")
    return "sha256:" + digest.hexdigest()


def check_kb(root: Union[str, Path]) -> tuple[KBCheck, Optional[KnowledgeBase]]:
    """Check every knowledge file, collecting all problems per file.

    Returns the per-file report plus the assembled knowledge base when, and
    only when, everything passed.
    """
    root = Path(root)
    checks: dict[str, KBFileCheck] = {name: KBFileCheck(name, []) for name in KB_FILE_NAMES}

    def read(name: str) -> Optional[str]:
        path = root / name
        if not path.is_file():
            checks[name].issues.append(KBIssue("missing", "missing file"))
            return None
        return path.read_text(encoding="utf-8")

    catalogue: Optional[frozenset[str]] = None
    text = read("nerves.cat")
    if text is not None:
        try:
            catalogue = parse_catalogue(text, "nerves.cat")
        except ValueError as exc:
            checks["nerves.cat"].issues.append(KBIssue("parse", str(exc)))

    thresholds: Optional[ThresholdTable] = None
    text = read("thresholds.tbl")
    if text is not None:
        try:
            thresholds = parse_thresholds(text, "thresholds.tbl")
        except ThresholdParseError as exc:
            for message in exc.errors:
                checks["thresholds.tbl"].issues.append(KBIssue("parse", message))

    level1: dict[SegmentType, RuleSet] = {}
    for segment_type, name in LEVEL1_FILES.items():
        text = read(name)
        if text is None:
            continue
        domains = None
        if thresholds is not None:
            # Premise symbols must fit the direction-derived category sets.
            domains = dict(thresholds.domains_for(segment_type))
            domains[LEVEL1_TARGET] = LEVEL1_CONCLUSIONS
        try:
            ruleset = parse_ruleset(text, domains=domains, source=name)
        except RuleParseError as exc:
            checks[name].issues.append(KBIssue("parse", str(exc)))
            continue
        if ruleset.target_variable != LEVEL1_TARGET:
            checks[name].issues.append(
                KBIssue("invalid", f"target variable must be {LEVEL1_TARGET!r}, got {ruleset.target_variable!r}")
            )
        else:
            level1[segment_type] = ruleset

    automaton: Optional[AutomatonDef] = None
    text = read("automaton.tr")
    if text is not None:
        try:
            automaton = parse_transitions(text, "automaton.tr")
        except TransitionTableError as exc:
            invariant_markers = ("not total", "not functional", "absorbing")
            for message in exc.errors:
                kind = "invalid" if any(marker in message for marker in invariant_markers) else "parse"
                checks["automaton.tr"].issues.append(KBIssue(kind, message))

    level3: Optional[RuleSet] = None
    text = read("level3.rules")
    if text is not None:
        try:
            level3 = parse_ruleset(text, domains=LEVEL3_DOMAINS, source="level3.rules")
        except RuleParseError as exc:
            checks["level3.rules"].issues.append(KBIssue("parse", str(exc)))
        else:
            if level3.target_variable != LEVEL3_TARGET:
                checks["level3.rules"].issues.append(
                    KBIssue("invalid", f"target variable must be {LEVEL3_TARGET!r}, got {level3.target_variable!r}")
                )
                level3 = None

    check = KBCheck(root, [checks[name] for name in KB_FILE_NAMES])
    if not check.ok:
        return check, None
    assert catalogue is not None and thresholds is not None and automaton is not None and level3 is not None
    kb = KnowledgeBase(
        root=root,
        catalogue=catalogue,
        thresholds=thresholds,
        level1=dict(level1),
        automaton=automaton,
        level3=level3,
        fingerprint=_fingerprint(root),
    )
    return check, kb


def load_kb(root: Union[str, Path]) -> KnowledgeBase:
    """Load and validate the whole knowledge base directory, or fail loudly."""
    check, kb = check_kb(root)
    if kb is None:
        raise KBLoadError(check)
    return kb


# ---------------------------------------------------------------------------
# Working memory, trace events


@dataclass(frozen=True)
class RuleFired:
    """Phase-2 event; rule is None when no rule covered the fact set."""

    nerve: NerveId
    segment: int
    rule: Optional[str]
    conclusion: SegmentDx

    phase = 2

    def describe(self) -> str:
        if self.rule is None:
            return (
                f"phase 2: {self.nerve.selector} segment {self.segment}:"
                f" no rule matched, recorded as {self.conclusion.value}"
            )
        return (
            f"phase 2: {self.nerve.selector} segment {self.segment}:"
            f" rule {self.rule} concluded {self.conclusion.value}"
        )

    def to_dict(self) -> dict:
        return {
            "phase": 2,
            "event": "rule_fired",
            "nerve": self.nerve.selector,
            "segment": self.segment,
            "rule": self.rule,
            "conclusion": self.conclusion.value,
        }


@dataclass(frozen=True)
class TransitionTaken:
    nerve: NerveId
    step: int
    source: AutomatonState
    symbol: int
    target: AutomatonState

    phase = 3

    def describe(self) -> str:
        return (
            f"phase 3: {self.nerve.selector} step {self.step}:"
            f" ({self.source.value}, {self.symbol}) -> {self.target.value}"
        )

    def to_dict(self) -> dict:
        return {
            "phase": 3,
            "event": "transition",
            "nerve": self.nerve.selector,
            "step": self.step,
            "from": self.source.value,
            "symbol": self.symbol,
            "to": self.target.value,
        }


@dataclass(frozen=True)
class PatientRuleSelected:
    rule: Optional[str]
    index: Optional[int]
    conclusion: PatientDx

    phase = 4

    def describe(self) -> str:
        if self.rule is None:
            return f"phase 4: no association rule matched, falling back to {self.conclusion.value}"
        return f"phase 4: rule {self.index + 1} ({self.rule}) concluded {self.conclusion.value}"

    def to_dict(self) -> dict:
        return {
            "phase": 4,
            "event": "patient_rule",
            "rule": self.rule,
            "index": self.index,
            "conclusion": self.conclusion.value,
        }


TraceEvent = Union[RuleFired, TransitionTaken, PatientRuleSelected]

FactsStore = dict[NerveId, dict[int, frozenset[SemanticFact]]]
VerdictStore = dict[NerveId, dict[int, "SegmentVerdict"]]
ResultStore = dict[NerveId, NerveResult]


@dataclass(frozen=True)
class SegmentVerdict:
    index: int
    segment_type: SegmentType
    dx: SegmentDx
    rule: Optional[str]


@dataclass
class WorkingMemory:
    """The blackboard: one store per phase plus the ordered event trace.

    Each store is written exactly once, by its own phase; later phases only
    ever read stores of earlier phases.
    """

    facts: FactsStore
    segment_dx: VerdictStore
    nerve_results: ResultStore
    patient: Optional[PatientSelection]
    trace: list[TraceEvent]


class PipelineError(RuntimeError):
    """A phase failure, annotated with the phase and coordinates."""

    def __init__(self, phase: int, context: str, cause: Exception):
        self.phase = phase
        self.context = context
        self.cause = cause
        super().__init__(f"phase {phase}, {context}: {cause}")


# ---------------------------------------------------------------------------
# The four phases


def run_phase1(exam: Exam, kb: KnowledgeBase) -> FactsStore:
    """Interpret every segment of every nerve into semantic facts."""
    store: FactsStore = {}
    for nerve, segments in sorted(exam.nerves, key=lambda item: item[0].sort_key()):
        per_segment: dict[int, frozenset[SemanticFact]] = {}
        for seg in segments:
            segment_type = SegmentType.for_segment(nerve.fibre, seg.index)
            try:
                per_segment[seg.index] = interpret_segment(seg, segment_type, kb.thresholds)
            except InterpretationError as exc:
                raise PipelineError(1, f"nerve {nerve.selector}, segment {seg.index}", exc) from exc
        store[nerve] = per_segment
    return store


def run_phase2(facts: FactsStore, kb: KnowledgeBase, trace: list[TraceEvent]) -> VerdictStore:
    """Fire the per-segment-type rulesets on the phase-1 facts."""
    store: VerdictStore = {}
    for nerve, per_segment in facts.items():
        verdicts: dict[int, SegmentVerdict] = {}
        for index in sorted(per_segment):
            segment_type = SegmentType.for_segment(nerve.fibre, index)
            outcome = fire(kb.level1[segment_type], per_segment[index])
            if outcome is None:
                dx, rule = SegmentDx.UNCLASSIFIED, None
            else:
                dx, rule = SegmentDx(outcome.value), outcome.rule
            verdicts[index] = SegmentVerdict(index, segment_type, dx, rule)
            trace.append(RuleFired(nerve, index, rule, dx))
        store[nerve] = verdicts
    return store


def run_phase3(verdicts: VerdictStore, kb: KnowledgeBase, trace: list[TraceEvent]) -> ResultStore:
    """Run the automaton over each nerve's chain of segment states."""
    store: ResultStore = {}
    for nerve, per_segment in verdicts.items():
        chain = to_chain([per_segment[index].dx for index in sorted(per_segment)])
        steps: list[TransitionTaken] = []

        def observe(source: AutomatonState, symbol: int, target: AutomatonState) -> None:
            steps.append(TransitionTaken(nerve, len(steps) + 1, source, symbol, target))

        final = run(chain, kb.automaton, observe)
        trace.extend(steps)
        store[nerve] = NerveResult(nerve, chain, state_to_dx(final))
    return store


def run_phase4(results: ResultStore, kb: KnowledgeBase, trace: list[TraceEvent]) -> PatientSelection:
    """Synthesize the patient diagnosis from all nerve results."""
    selection = select_patient_dx(summarize(list(results.values())), kb.level3)
    trace.append(PatientRuleSelected(selection.rule, selection.index, selection.dx))
    return selection


# ---------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class SegmentReport:
    index: int
    segment_type: SegmentType
    facts: tuple[tuple[str, str], ...]  # (variable, category), sorted by variable
    dx: SegmentDx
    rule: Optional[str]


@dataclass(frozen=True)
class NerveReport:
    nerve: NerveId
    segments: tuple[SegmentReport, ...]
    chain: tuple[int, ...]
    transitions: tuple[TransitionTaken, ...]
    final_state: AutomatonState
    dx: NerveDx


@dataclass(frozen=True)
class DiagnosisReport:
    """Everything the run concluded, with the trace that supports it."""

    patient_id: str
    kb_fingerprint: str
    nerves: tuple[NerveReport, ...]
    patient_dx: PatientDx
    patient_rule: Optional[str]
    patient_rule_index: Optional[int]
    trace: tuple[TraceEvent, ...]

    def to_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "kb_fingerprint": self.kb_fingerprint,
            "nerves": [
                {
                    "nerve": nr.nerve.selector,
                    "segments": [
                        {
                            "index": sr.index,
                            "segment_type": sr.segment_type.value,
                            "facts": {variable: category for variable, category in sr.facts},
                            "dx": sr.dx.value,
                            "rule": sr.rule,
                        }
                        for sr in nr.segments
                    ],
                    "chain": list(nr.chain),
                    "transitions": [
                        {"from": t.source.value, "symbol": t.symbol, "to": t.target.value}
                        for t in nr.transitions
                    ],
                    "final_state": nr.final_state.value,
                    "dx": nr.dx.value,
                }
                for nr in self.nerves
            ],
            "patient": {
                "dx": self.patient_dx.value,
                "rule": self.patient_rule,
                "rule_index": self.patient_rule_index,
            },
            "trace": [event.to_dict() for event in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"Patient: {self.patient_id}", f"Knowledge base: {self.kb_fingerprint}", ""]
        for nr in self.nerves:
            lines.append(f"Nerve {nr.nerve.selector}")
            for sr in nr.segments:
                shown = ", ".join(f"{variable}={category}" for variable, category in sr.facts)
                rule = f"rule {sr.rule}" if sr.rule is not None else "no rule matched"
                flag = " [UNCLASSIFIED]" if sr.dx is SegmentDx.UNCLASSIFIED else ""
                lines.append(
                    f"  segment {sr.index} [{sr.segment_type.value}]: {shown} -> {sr.dx.value} ({rule}){flag}"
                )
            lines.append(f"  chain: {' '.join(str(symbol) for symbol in nr.chain)}")
            path = " -> ".join(
                [nr.transitions[0].source.value] + [t.target.value for t in nr.transitions]
            )
            lines.append(f"  states: {path}")
            lines.append(f"  nerve diagnosis: {nr.dx.value}")
            lines.append("")
        if self.patient_rule is not None:
            lines.append(
                f"Patient diagnosis: {self.patient_dx.value}"
                f" (rule {self.patient_rule_index + 1}: {self.patient_rule})"
            )
        else:
            lines.append(f"Patient diagnosis: {self.patient_dx.value} (fallback: no rule matched)")
        return "\n".join(lines) + "\n"


def evaluate(exam: Exam, kb: KnowledgeBase) -> WorkingMemory:
    """Run the four phases in order, filling one working memory."""
    validate_exam(exam, kb.catalogue)
    trace: list[TraceEvent] = []
    facts = run_phase1(exam, kb)
    verdicts = run_phase2(facts, kb, trace)
    results = run_phase3(verdicts, kb, trace)
    selection = run_phase4(results, kb, trace)
    return WorkingMemory(facts, verdicts, results, selection, trace)


def run_exam(exam: Exam, kb: KnowledgeBase) -> DiagnosisReport:
    """Run all four phases over one exam and assemble the traced report."""
    wm = evaluate(exam, kb)
    assert wm.patient is not None

    nerve_reports = []
    for nerve, per_segment in wm.facts.items():
        segment_reports = []
        for index in sorted(per_segment):
            verdict = wm.segment_dx[nerve][index]
            segment_reports.append(
                SegmentReport(
                    index=index,
                    segment_type=verdict.segment_type,
                    facts=tuple(sorted((f.variable, f.value) for f in per_segment[index])),
                    dx=verdict.dx,
                    rule=verdict.rule,
                )
            )
        transitions = tuple(
            event for event in wm.trace if isinstance(event, TransitionTaken) and event.nerve == nerve
        )
        result = wm.nerve_results[nerve]
        nerve_reports.append(
            NerveReport(
                nerve=nerve,
                segments=tuple(segment_reports),
                chain=result.chain,
                transitions=transitions,
                final_state=transitions[-1].target,
                dx=result.dx,
            )
        )

    return DiagnosisReport(
        patient_id=exam.patient_id,
        kb_fingerprint=kb.fingerprint,
        nerves=tuple(nerve_reports),
        patient_dx=wm.patient.dx,
        patient_rule=wm.patient.rule,
        patient_rule_index=wm.patient.index,
        trace=tuple(wm.trace),
    )
