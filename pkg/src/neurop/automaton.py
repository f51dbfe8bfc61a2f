"""Level-2 nerve diagnosis: a finite automaton over the chain of segment states.

A nerve's segments collapse to a word over {0, 1} (0 normal, 1 affected);
the automaton consumes the word in one left-to-right pass and its final
state names the spatial lesion distribution. The transition relation is
data, loaded from a knowledge file, so it can be edited without touching
code. ``oracle_dx`` is a deliberately independent reimplementation of the
distribution rules, kept for equivalence testing only: a lesion pattern is
diffuse when two affected segments are adjacent, multiple focal when two or
more affected segments are all isolated, focal for a single one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Mapping, Optional, Sequence

from .domain import NerveDx, SegmentDx

Chain = tuple[int, ...]
StepObserver = Callable[["AutomatonState", int, "AutomatonState"], None]

ALPHABET = (0, 1)
MAX_CHAIN_LENGTH = 5


class AutomatonState(str, Enum):
    START = "start"
    N = "n"
    F_A = "f_a"
    F_B = "f_b"
    M_F_A = "m_f_a"
    M_F_B = "m_f_b"
    D = "d"


# Diagnosis read off the final state. The *_b states repeat their principal
# state while steering toward the next one, so they map to the same label.
STATE_DIAGNOSIS: Mapping[AutomatonState, NerveDx] = {
    AutomatonState.N: NerveDx.NORMAL,
    AutomatonState.F_A: NerveDx.FOCAL,
    AutomatonState.F_B: NerveDx.FOCAL,
    AutomatonState.M_F_A: NerveDx.MULTIPLE_FOCAL,
    AutomatonState.M_F_B: NerveDx.MULTIPLE_FOCAL,
    AutomatonState.D: NerveDx.DIFFUSE,
}


class TransitionTableError(ValueError):
    """Raised when a transition file violates the automaton invariants."""

    def __init__(self, source: str, errors: list[str]):
        self.source = source
        self.errors = errors
        super().__init__(f"{source}: " + "; ".join(errors))


@dataclass(frozen=True)
class AutomatonDef:
    """The five-tuple: states and alphabet are fixed, the relation is data."""

    transitions: Mapping[tuple[AutomatonState, int], AutomatonState]

    def __post_init__(self) -> None:
        problems = _table_problems(self.transitions)
        if problems:
            raise TransitionTableError("<transitions>", problems)

    @property
    def states(self) -> frozenset[AutomatonState]:
        return frozenset(AutomatonState)

    @property
    def initial(self) -> AutomatonState:
        return AutomatonState.START

    @property
    def finals(self) -> frozenset[AutomatonState]:
        return frozenset(AutomatonState) - {AutomatonState.START}


def _table_problems(transitions: Mapping[tuple[AutomatonState, int], AutomatonState]) -> list[str]:
    problems = []
    for state in AutomatonState:
        for symbol in ALPHABET:
            if (state, symbol) not in transitions:
                problems.append(f"transition relation not total at ({state.value}, {symbol})")
    d = AutomatonState.D
    for symbol in ALPHABET:
        target = transitions.get((d, symbol))
        if target is not None and target is not d:
            problems.append(f"state d must be absorbing, found ({d.value}, {symbol}) -> {target.value}")
    return problems


def parse_transitions(text: str, source: str = "automaton.tr") -> AutomatonDef:
    """Parse the transition file: one ``<state> <symbol> <state>`` line each.

    The loader enforces the automaton invariants in full: the relation must
    be functional (no duplicate left-hand side) and total over all states and
    both symbols, and the d state must be absorbing.
    """
    transitions: dict[tuple[AutomatonState, int], AutomatonState] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 3:
            errors.append(f"line {lineno}: expected '<state> <symbol> <state>', got {len(tokens)} fields")
            continue
        source_token, symbol_token, target_token = tokens
        try:
            state = AutomatonState(source_token)
        except ValueError:
            errors.append(f"line {lineno}: unknown state {source_token!r}")
            continue
        if symbol_token not in ("0", "1"):
            errors.append(f"line {lineno}: invalid symbol {symbol_token!r}, alphabet is {{0, 1}}")
            continue
        symbol = int(symbol_token)
        try:
            target = AutomatonState(target_token)
        except ValueError:
            errors.append(f"line {lineno}: unknown state {target_token!r}")
            continue
        if (state, symbol) in transitions:
            errors.append(
                f"line {lineno}: transition relation not functional at ({state.value}, {symbol})"
            )
            continue
        transitions[(state, symbol)] = target
    errors.extend(_table_problems(transitions))
    if errors:
        raise TransitionTableError(source, errors)
    return AutomatonDef(transitions)


def check_chain(chain: Sequence[int]) -> Chain:
    if len(chain) == 0:
        raise ValueError("chain of segment states must not be empty")
    if len(chain) > MAX_CHAIN_LENGTH:
        raise ValueError(f"chain length {len(chain)} exceeds {MAX_CHAIN_LENGTH}")
    if any(symbol not in ALPHABET for symbol in chain):
        raise ValueError(f"chain symbols must be 0 or 1, got {tuple(chain)}")
    return tuple(chain)


def to_chain(diagnoses: Sequence[SegmentDx]) -> Chain:
    """Collapse segment diagnoses to the 0/1 word the automaton consumes.

    The kind of lesion is dropped here on purpose: spatial reasoning only
    cares whether a segment is affected. ``unclassified`` counts as affected.
    """
    if len(diagnoses) == 0:
        raise ValueError("cannot build a chain from zero segment diagnoses")
    if len(diagnoses) > MAX_CHAIN_LENGTH:
        raise ValueError(f"{len(diagnoses)} segment diagnoses exceed the {MAX_CHAIN_LENGTH}-segment limit")
    return tuple(1 if dx.is_pathological else 0 for dx in diagnoses)


def step(state: AutomatonState, symbol: int, defn: AutomatonDef) -> AutomatonState:
    """One transition lookup."""
    if symbol not in ALPHABET:
        raise ValueError(f"symbol must be 0 or 1, got {symbol!r}")
    return defn.transitions[(state, symbol)]


def run(chain: Sequence[int], defn: AutomatonDef, on_step: Optional[StepObserver] = None) -> AutomatonState:
    """Consume the whole chain from the start state; one lookup per symbol.

    Every transition is reported to ``on_step``, including the self-loops in
    the absorbing d state, so observers always see the full trajectory.
    """
    chain = check_chain(chain)
    state = defn.initial
    for symbol in chain:
        nxt = step(state, symbol, defn)
        if on_step is not None:
            on_step(state, symbol, nxt)
        state = nxt
    return state


def state_to_dx(state: AutomatonState) -> NerveDx:
    if state is AutomatonState.START:
        raise ValueError("the start state carries no diagnosis (empty chains are rejected upstream)")
    return STATE_DIAGNOSIS[state]


def oracle_dx(chain: Sequence[int]) -> NerveDx:
    """Direct statement of the distribution rules, independent of the automaton."""
    chain = check_chain(chain)
    if any(a == 1 and b == 1 for a, b in zip(chain, chain[1:])):
        return NerveDx.DIFFUSE
    affected = sum(chain)
    if affected >= 2:
        return NerveDx.MULTIPLE_FOCAL
    if affected == 1:
        return NerveDx.FOCAL
    return NerveDx.NORMAL


def all_chains(max_length: int = MAX_CHAIN_LENGTH) -> Iterator[Chain]:
    """Every chain of length 1..max_length, shortest first, lexicographic."""
    for length in range(1, max_length + 1):
        yield from itertools.product(ALPHABET, repeat=length)


def enumerate_all(defn: AutomatonDef) -> list[tuple[Chain, NerveDx]]:
    """The full 62-row chain-to-diagnosis table the automaton stands in for."""
    return [(chain, state_to_dx(run(chain, defn))) for chain in all_chains()]
