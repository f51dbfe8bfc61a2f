"""Command-line front end.

Subcommands: ``diagnose`` runs the full pipeline over one exam file,
``validate-kb`` checks every knowledge file and reports per-file results,
``enumerate`` prints the 62-row chain table with the independent-oracle
agreement column, and ``trace`` narrates rule firings and state transitions
for a single nerve. The interface is strictly batch: nothing ever prompts.
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .automaton import all_chains, oracle_dx, run, state_to_dx
from .domain import ExamValidationError, NerveId, validate_exam
from .examfile import ExamFormatError, load_exam
from .pipeline import KBLoadError, check_kb, load_kb, run_exam

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_PARSE = 4
EXIT_INVALID = 5
EXIT_DISAGREEMENT = 6

_EXIT_HELP = """\
exit codes:
  0  success
  2  bad command line
  3  input or knowledge file not found
  4  file could not be parsed (exam JSON or knowledge file syntax)
  5  validation failed (exam invariants, knowledge invariants, unknown nerve)
  6  enumerate found automaton/oracle disagreement
"""


def default_kb_path() -> Path:
    """The knowledge base bundled with the package."""
    return Path(str(importlib.resources.files("neurop") / "kb"))


def resolve_kb_path(option: Optional[str]) -> Path:
    """Precedence: --kb flag, then NEUROP_KB, then the bundled default."""
    if option:
        return Path(option)
    env = os.environ.get("NEUROP_KB")
    if env:
        return Path(env)
    return default_kb_path()


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _kb_error_code(error: KBLoadError) -> int:
    if error.check.issues_of_kind("missing"):
        return EXIT_NOT_FOUND
    if error.check.issues_of_kind("parse"):
        return EXIT_PARSE
    return EXIT_INVALID


def cmd_diagnose(args: argparse.Namespace) -> int:
    try:
        kb = load_kb(resolve_kb_path(args.kb))
    except KBLoadError as exc:
        return _fail(str(exc), _kb_error_code(exc))
    try:
        exam = load_exam(args.exam)
    except FileNotFoundError:
        return _fail(f"exam file not found: {args.exam}", EXIT_NOT_FOUND)
    except ExamFormatError as exc:
        return _fail(f"{args.exam}: {exc}", EXIT_PARSE)
    try:
        report = run_exam(exam, kb)
    except ExamValidationError as exc:
        for problem in exc.errors:
            print(f"error: {args.exam}: {problem}", file=sys.stderr)
        return EXIT_INVALID
    if args.format == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_validate_kb(args: argparse.Namespace) -> int:
    root = resolve_kb_path(args.kb)
    check, _ = check_kb(root)
    print(f"knowledge base: {root}")
    for file_check in check.files:
        status = "pass" if file_check.ok else "FAIL"
        print(f"  {file_check.name}: {status}")
        for issue in file_check.issues:
            print(f"    - {issue.message}")
    if check.ok:
        print("all knowledge files pass")
        return EXIT_OK
    if check.issues_of_kind("missing"):
        return EXIT_NOT_FOUND
    if check.issues_of_kind("parse"):
        return EXIT_PARSE
    return EXIT_INVALID


def cmd_enumerate(args: argparse.Namespace) -> int:
    try:
        kb = load_kb(resolve_kb_path(args.kb))
    except KBLoadError as exc:
        return _fail(str(exc), _kb_error_code(exc))
    print(f"{'chain':<12}{'final':<8}{'automaton':<16}{'oracle':<16}agree")
    disagreements = 0
    for chain in all_chains():
        final = run(chain, kb.automaton)
        dx = state_to_dx(final)
        oracle = oracle_dx(chain)
        agree = dx is oracle
        if not agree:
            disagreements += 1
        chain_text = "".join(str(symbol) for symbol in chain)
        print(f"{chain_text:<12}{final.value:<8}{dx.value:<16}{oracle.value:<16}{'true' if agree else 'FALSE'}")
    if disagreements:
        print(f"{disagreements} chains disagree with the oracle", file=sys.stderr)
        return EXIT_DISAGREEMENT
    return EXIT_OK


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        kb = load_kb(resolve_kb_path(args.kb))
    except KBLoadError as exc:
        return _fail(str(exc), _kb_error_code(exc))
    try:
        selector = NerveId.parse(args.nerve)
    except ValueError as exc:
        return _fail(str(exc), EXIT_INVALID)
    try:
        exam = load_exam(args.exam)
    except FileNotFoundError:
        return _fail(f"exam file not found: {args.exam}", EXIT_NOT_FOUND)
    except ExamFormatError as exc:
        return _fail(f"{args.exam}: {exc}", EXIT_PARSE)
    try:
        validate_exam(exam, kb.catalogue)
    except ExamValidationError as exc:
        for problem in exc.errors:
            print(f"error: {args.exam}: {problem}", file=sys.stderr)
        return EXIT_INVALID
    report = run_exam(exam, kb)
    for nerve_report in report.nerves:
        if nerve_report.nerve == selector:
            print(f"Nerve {nerve_report.nerve.selector}")
            for sr in nerve_report.segments:
                shown = ", ".join(f"{variable}={category}" for variable, category in sr.facts)
                rule = f"rule {sr.rule}" if sr.rule is not None else "no rule matched"
                print(f"  segment {sr.index}: {shown} -> {sr.dx.value} ({rule})")
            chain_text = " ".join(str(symbol) for symbol in nerve_report.chain)
            print(f"  chain: {chain_text}")
            for t in nerve_report.transitions:
                print(f"  step {t.step}: ({t.source.value}, {t.symbol}) -> {t.target.value}")
            print(f"  final state: {nerve_report.final_state.value}")
            print(f"  nerve diagnosis: {nerve_report.dx.value}")
            return EXIT_OK
    available = ", ".join(nr.nerve.selector for nr in report.nerves)
    return _fail(f"nerve {args.nerve!r} not in exam; available: {available}", EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurop",
        description="Nerve conduction study diagnosis from an editable knowledge base.",
        epilog=_EXIT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_kb_option(p: argparse.ArgumentParser) -> None:
        p.add_argument("--kb", metavar="DIR", default=None,
                       help="knowledge base directory (default: $NEUROP_KB, else the bundled KB)")

    p = sub.add_parser("diagnose", help="run the full diagnosis over one exam file")
    p.add_argument("exam", help="exam file (JSON)")
    add_kb_option(p)
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="report format (default: text)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("validate-kb", help="check every knowledge file and report pass/fail")
    add_kb_option(p)
    p.set_defaults(func=cmd_validate_kb)

    p = sub.add_parser("enumerate",
                       help="print all 62 segment-state chains with automaton and oracle diagnoses")
    add_kb_option(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("trace", help="narrate rule firings and state transitions for one nerve")
    p.add_argument("exam", help="exam file (JSON)")
    p.add_argument("--nerve", required=True, metavar="NAME:SIDE:FIBRE",
                   help="nerve selector, e.g. median:left:motor")
    add_kb_option(p)
    p.set_defaults(func=cmd_trace)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
