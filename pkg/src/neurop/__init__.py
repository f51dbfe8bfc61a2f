"""Diagnostic inference engine for nerve conduction studies.

Four phases over a central working memory: interpretation of continuous
measurements, per-segment production rules, a per-nerve finite automaton over
the chain of segment states, and patient-level synthesis. All knowledge
(thresholds, rulesets, the transition relation, the nerve catalogue) is
loaded from editable files.
"""

from .automaton import (
    AutomatonDef,
    AutomatonState,
    all_chains,
    enumerate_all,
    oracle_dx,
    run,
    state_to_dx,
    step,
    to_chain,
)
from .domain import (
    Exam,
    ExamValidationError,
    FibreType,
    NerveDx,
    NerveId,
    PatientDx,
    SegmentDx,
    SegmentMeasurements,
    SegmentType,
    SemanticCategory,
    SemanticFact,
    Side,
    homologous,
    validate_exam,
)
from .examfile import ExamFormatError, exam_from_dict, load_exam
from .interpret import (
    Direction,
    ThresholdTable,
    VariableSpec,
    classify,
    interpret_segment,
    parse_thresholds,
)
from .pipeline import (
    DiagnosisReport,
    KBLoadError,
    KnowledgeBase,
    check_kb,
    load_kb,
    run_exam,
)
from .rules import Firing, Premise, Rule, RuleParseError, RuleSet, diagnose_segment, fire, matches, parse_ruleset
from .synthesis import ExamSummary, NerveResult, patient_dx, summarize

__version__ = "0.1.0"
