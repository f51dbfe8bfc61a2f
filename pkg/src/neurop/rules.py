"""Production rules: the DSL parser and the forward evaluation engine.

Rule files are line oriented::

    ruleset motor_subsequent target lesion
    rule severe_axonal_1 provenance paper
      if amplitude in { very_decreased }
      if amplitude_ratio in { normal }
      if velocity in { normal, decreased }
      then lesion = severe_axonal

Premise lines of one rule are conjoined; within a premise the braced symbols
are alternatives. Conflict resolution is first match in file order, which
keeps the knowledge files self-documenting: whatever fires is the first rule
a reader finds that matches.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional

from .domain import SegmentDx, SegmentMeasurements, SegmentType, SemanticFact
from .interpret import interpret_segment


class RuleParseError(ValueError):
    def __init__(self, source: str, line: int, col: int, message: str):
        self.source = source
        self.line = line
        self.col = col
        super().__init__(f"{source}:{line}:{col}: {message}")


@dataclass(frozen=True)
class Premise:
    """One conjunct: the variable's value must be among the allowed symbols."""

    variable: str
    allowed: frozenset[str]


@dataclass(frozen=True)
class Rule:
    name: str
    premises: tuple[Premise, ...]
    conclusion: tuple[str, str]
    provenance: str = "unspecified"


@dataclass(frozen=True)
class RuleSet:
    """Ordered rules sharing one conclusion variable."""

    name: str
    target_variable: str
    rules: tuple[Rule, ...]

    def rule_named(self, name: str) -> Rule:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise KeyError(name)


class Firing(NamedTuple):
    value: str
    rule: str
    index: int


_RULESET_RE = re.compile(r"^ruleset\s+(?P<name>\w+)\s+target\s+(?P<target>\w+)\s*$")
_RULE_RE = re.compile(r"^rule\s+(?P<name>\w+)(?:\s+provenance\s+(?P<prov>\w+))?\s*$")
_IF_RE = re.compile(r"^if\s+(?P<var>\w+)\s+in\s*\{(?P<members>[^{}]*)\}\s*$")
_THEN_RE = re.compile(r"^then\s+(?P<var>\w+)\s*=\s*(?P<value>\w+)\s*$")


def parse_ruleset(
    text: str,
    *,
    domains: Optional[Mapping[str, frozenset[str]]] = None,
    source: str = "<string>",
) -> RuleSet:
    """Parse one rule file into a RuleSet, enforcing every structural invariant.

    When ``domains`` is given, premise variables must be declared in it, their
    allowed symbols must lie in the declared domain, and conclusions are
    checked against the target variable's domain the same way.
    """
    header: Optional[tuple[str, str]] = None
    rules: list[Rule] = []
    rule_names: set[str] = set()
    # In-progress rule: (name, provenance, line started, premises)
    pending: Optional[tuple[str, str, int, list[Premise]]] = None

    def fail(lineno: int, col: int, message: str) -> RuleParseError:
        return RuleParseError(source, lineno, col, message)

    def finish_rule(lineno: int, conclusion_var: str, conclusion_value: str, col: int) -> None:
        nonlocal pending
        assert pending is not None and header is not None
        name, provenance, _, premises = pending
        if not premises:
            raise fail(lineno, 1, f"rule {name!r} has an empty premise set")
        if conclusion_var != header[1]:
            raise fail(lineno, col, f"conclusion variable {conclusion_var!r} must be the ruleset target {header[1]!r}")
        if domains is not None and header[1] in domains and conclusion_value not in domains[header[1]]:
            raise fail(lineno, col, f"conclusion value {conclusion_value!r} not in the domain of {header[1]!r}")
        rules.append(Rule(name, tuple(premises), (conclusion_var, conclusion_value), provenance))
        pending = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(stripped) + 1
        keyword = stripped.split(None, 1)[0]

        if keyword == "ruleset":
            match = _RULESET_RE.match(stripped)
            if not match:
                raise fail(lineno, indent, "malformed ruleset header, expected: ruleset <name> target <variable>")
            if header is not None:
                raise fail(lineno, indent, "duplicate ruleset header")
            header = (match.group("name"), match.group("target"))
        elif keyword == "rule":
            if header is None:
                raise fail(lineno, indent, "rule before ruleset header")
            if pending is not None:
                raise fail(lineno, indent, f"rule {pending[0]!r} has no conclusion (missing then-line)")
            match = _RULE_RE.match(stripped)
            if not match:
                raise fail(lineno, indent, "malformed rule line, expected: rule <name> [provenance <word>]")
            name = match.group("name")
            if name in rule_names:
                raise fail(lineno, indent, f"duplicate rule name {name!r}")
            rule_names.add(name)
            pending = (name, match.group("prov") or "unspecified", lineno, [])
        elif keyword == "if":
            if pending is None:
                raise fail(lineno, indent, "premise outside a rule")
            match = _IF_RE.match(stripped)
            if not match:
                raise fail(lineno, indent, "malformed premise, expected: if <variable> in { a, b }")
            variable = match.group("var")
            var_col = indent + stripped.index(variable, 2)
            if any(p.variable == variable for p in pending[3]):
                raise fail(lineno, var_col, f"duplicate premise variable {variable!r}")
            if header is not None and variable == header[1]:
                raise fail(lineno, var_col, f"premise references the conclusion variable {variable!r}")
            if domains is not None and variable not in domains:
                raise fail(lineno, var_col, f"premise over undeclared variable {variable!r}")
            members = [m.strip() for m in match.group("members").split(",") if m.strip()]
            if not members:
                raise fail(lineno, indent, f"empty category set for variable {variable!r}")
            bad = [m for m in members if not m.isidentifier()]
            if bad:
                raise fail(lineno, indent, f"bad category symbol {bad[0]!r}")
            if domains is not None:
                outside = sorted(set(members) - domains[variable])
                if outside:
                    raise fail(lineno, var_col, f"symbol {outside[0]!r} not in the domain of {variable!r}")
            pending[3].append(Premise(variable, frozenset(members)))
        elif keyword == "then":
            if pending is None:
                raise fail(lineno, indent, "conclusion outside a rule")
            match = _THEN_RE.match(stripped)
            if not match:
                raise fail(lineno, indent, "malformed conclusion, expected: then <variable> = <value>")
            var_col = indent + stripped.index(match.group("var"), 4)
            finish_rule(lineno, match.group("var"), match.group("value"), var_col)
        else:
            raise fail(lineno, indent, f"unknown keyword {keyword!r}")

    last_line = text.count("\n") + 1
    if pending is not None:
        raise fail(last_line, 1, f"rule {pending[0]!r} has no conclusion (missing then-line)")
    if header is None:
        raise fail(last_line, 1, "missing ruleset header")
    if not rules:
        raise fail(last_line, 1, "ruleset has no rules")
    return RuleSet(header[0], header[1], tuple(rules))


def _fact_map(facts: Iterable[SemanticFact]) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for fact in facts:
        if fact.variable in mapping and mapping[fact.variable] != fact.value:
            raise ValueError(f"conflicting facts for variable {fact.variable!r}")
        mapping[fact.variable] = fact.value
    return mapping


def _satisfied(rule: Rule, mapping: Mapping[str, str]) -> bool:
    return all(
        premise.variable in mapping and mapping[premise.variable] in premise.allowed
        for premise in rule.premises
    )


def matches(rule: Rule, facts: Iterable[SemanticFact]) -> bool:
    """True iff every premise variable has a fact whose value is allowed.

    A premise over a variable with no fact at all is unsatisfied, so rules
    mentioning a variable a segment does not carry simply never fire on it.
    """
    return _satisfied(rule, _fact_map(facts))


def fire(ruleset: RuleSet, facts: Iterable[SemanticFact]) -> Optional[Firing]:
    """Conclusion of the first matching rule in file order, or None."""
    mapping = _fact_map(facts)
    for index, rule in enumerate(ruleset.rules):
        if _satisfied(rule, mapping):
            return Firing(rule.conclusion[1], rule.name, index)
    return None


def diagnose_segment(measurements: SegmentMeasurements, segment_type: SegmentType, kb) -> SegmentDx:
    """One-shot segment diagnosis: interpret, then fire the type's ruleset.

    ``kb`` needs a ``thresholds`` table and a ``level1`` mapping from segment
    type to ruleset. A fact set no rule covers yields ``unclassified``, which
    downstream treats as pathological rather than silently as normal.
    """
    facts = interpret_segment(measurements, segment_type, kb.thresholds)
    outcome = fire(kb.level1[segment_type], facts)
    if outcome is None:
        return SegmentDx.UNCLASSIFIED
    return SegmentDx(outcome.value)
