"""Level-3 patient diagnosis: aggregate the per-nerve results and associate.

The association knowledge itself lives in the level-3 rule file; this module
computes the summary predicates those rules consume (affected-segment count
class, diffuse-nerve count class, presence of a homologous diffuse pair) and
applies the generic rule engine to them. ``uncertain_diagnosis`` is the
guaranteed fallback, so the patient diagnosis is a total function even if
the rule file is edited into a shape that matches nothing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .domain import NerveDx, NerveId, PatientDx, SemanticFact, homologous
from .rules import RuleSet, fire

LEVEL3_TARGET = "diagnosis"

_COUNT_CLASSES = frozenset({"none", "one", "several"})

# Domains of the summary predicates, used to validate the level-3 rule file.
LEVEL3_DOMAINS: dict[str, frozenset[str]] = {
    "total_affected_class": _COUNT_CLASSES,
    "affected_nerve_count_class": _COUNT_CLASSES,
    "diffuse_nerve_count_class": _COUNT_CLASSES,
    "has_diffuse_pair": frozenset({"yes", "no"}),
    LEVEL3_TARGET: frozenset(dx.value for dx in PatientDx),
}


@dataclass(frozen=True)
class NerveResult:
    """Outcome of the level-2 analysis of one nerve."""

    nerve: NerveId
    chain: tuple[int, ...]
    dx: NerveDx


@dataclass(frozen=True)
class ExamSummary:
    results: tuple[NerveResult, ...]
    total_affected: int
    affected_nerves: tuple[NerveId, ...]
    diffuse_pairs: tuple[tuple[NerveId, NerveId], ...]


def summarize(results: Sequence[NerveResult]) -> ExamSummary:
    """Compute every aggregate the association rules look at."""
    if len(results) == 0:
        raise ValueError("cannot summarize an exam with no nerve results")
    total_affected = sum(sum(result.chain) for result in results)
    affected = tuple(r.nerve for r in results if r.dx is not NerveDx.NORMAL)
    pairs = []
    for a, b in itertools.combinations(results, 2):
        if a.dx is NerveDx.DIFFUSE and b.dx is NerveDx.DIFFUSE and homologous(a.nerve, b.nerve):
            first, second = sorted((a.nerve, b.nerve), key=NerveId.sort_key)
            pairs.append((first, second))
    return ExamSummary(tuple(results), total_affected, affected, tuple(pairs))


def count_class(count: int) -> str:
    if count == 0:
        return "none"
    if count == 1:
        return "one"
    return "several"


def summary_facts(summary: ExamSummary) -> frozenset[SemanticFact]:
    """The summary as semantic facts, ready for the level-3 ruleset."""
    diffuse_count = sum(1 for r in summary.results if r.dx is NerveDx.DIFFUSE)
    return frozenset(
        {
            SemanticFact("total_affected_class", count_class(summary.total_affected)),
            SemanticFact("affected_nerve_count_class", count_class(len(summary.affected_nerves))),
            SemanticFact("diffuse_nerve_count_class", count_class(diffuse_count)),
            SemanticFact("has_diffuse_pair", "yes" if summary.diffuse_pairs else "no"),
        }
    )


@dataclass(frozen=True)
class PatientSelection:
    """A patient diagnosis together with the rule that selected it.

    ``rule`` and ``index`` are None only on the fallback path, when no rule
    in the (possibly edited) level-3 file matched.
    """

    dx: PatientDx
    rule: Optional[str]
    index: Optional[int]


def select_patient_dx(summary: ExamSummary, ruleset: RuleSet) -> PatientSelection:
    outcome = fire(ruleset, summary_facts(summary))
    if outcome is None:
        return PatientSelection(PatientDx.UNCERTAIN_DIAGNOSIS, None, None)
    return PatientSelection(PatientDx(outcome.value), outcome.rule, outcome.index)


def patient_dx(summary: ExamSummary, ruleset: RuleSet) -> PatientDx:
    """Patient-level diagnosis; total over every well-formed summary."""
    return select_patient_dx(summary, ruleset).dx
