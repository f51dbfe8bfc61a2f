import json

import pytest

from neurop.domain import (
    Exam,
    ExamValidationError,
    FibreType,
    NerveId,
    PatientDx,
    SegmentDx,
    SegmentMeasurements,
    Side,
)
from neurop.domain import SegmentType
from neurop.pipeline import (
    KBLoadError,
    PipelineError,
    RuleFired,
    load_kb,
    run_exam,
    run_phase1,
    run_phase2,
    run_phase3,
    run_phase4,
)


def motor_segment(index, amplitude, latency=None, ratio=None, velocity=None):
    if index == 1:
        return SegmentMeasurements(index=index, amplitude=amplitude, distal_latency=latency)
    return SegmentMeasurements(index=index, amplitude=amplitude, amplitude_ratio=ratio, velocity=velocity)


def normal_motor(index):
    if index == 1:
        return motor_segment(1, 8.0, latency=3.2)
    return motor_segment(index, 7.5, ratio=0.95, velocity=50.0)


def affected_motor(index):
    # Beyond the first segment this interprets to (very_decreased, normal,
    # decreased): the published severe-axonal picture.
    if index == 1:
        return motor_segment(1, 1.5, latency=3.2)
    return motor_segment(index, 1.5, ratio=0.95, velocity=40.0)


def motor_nerve(name, side, pattern):
    """pattern is a 0/1 string; 1 segments get severe-axonal values."""
    segments = tuple(
        affected_motor(i + 1) if flag == "1" else normal_motor(i + 1)
        for i, flag in enumerate(pattern)
    )
    return (NerveId(name, side, FibreType.MOTOR), segments)


def exam_of(*nerves, patient_id="case"):
    return Exam(patient_id, tuple(nerves))


class TestLoadKB:
    def test_shipped_kb(self, kb):
        assert len(kb.automaton.transitions) == 14
        assert kb.fingerprint.startswith("sha256:")
        assert set(kb.level1) == set(SegmentType)
        assert kb.level3.target_variable == "diagnosis"
        assert "median" in kb.catalogue

    def test_missing_file(self, kb_copy):
        (kb_copy / "level3.rules").unlink()
        with pytest.raises(KBLoadError, match="missing file"):
            load_kb(kb_copy)

    def test_transition_totality_checked(self, kb_copy):
        path = kb_copy / "automaton.tr"
        lines = [l for l in path.read_text().splitlines() if l.strip() != "d 1 d"]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(KBLoadError, match=r"not total at \(d, 1\)"):
            load_kb(kb_copy)

    def test_empty_ruleset_rejected(self, kb_copy):
        (kb_copy / "level1_motor_first.rules").write_text("ruleset motor_first target lesion\n")
        with pytest.raises(KBLoadError, match="ruleset has no rules"):
            load_kb(kb_copy)

    def test_rule_domain_cross_check(self, kb_copy):
        path = kb_copy / "level1_motor_first.rules"
        path.write_text(
            "ruleset motor_first target lesion\n"
            "rule r1\n"
            "  if amplitude in { very_increased }\n"  # amplitude is low_is_abnormal
            "  then lesion = normal\n"
        )
        with pytest.raises(KBLoadError, match="not in the domain"):
            load_kb(kb_copy)

    def test_wrong_target_variable(self, kb_copy):
        path = kb_copy / "level1_motor_first.rules"
        path.write_text(
            "ruleset motor_first target verdict\n"
            "rule r1\n  if amplitude in { normal }\n  then verdict = normal\n"
        )
        with pytest.raises(KBLoadError, match="target variable must be 'lesion'"):
            load_kb(kb_copy)

    def test_fingerprint_tracks_content(self, kb, kb_copy):
        same = load_kb(kb_copy)
        assert same.fingerprint == kb.fingerprint
        (kb_copy / "nerves.cat").write_text("median\n")
        assert load_kb(kb_copy).fingerprint != kb.fingerprint


class TestRunExam:
    def test_all_normal_exam(self, kb):
        exam = exam_of(
            motor_nerve("median", Side.LEFT, "000"),
            motor_nerve("median", Side.RIGHT, "000"),
        )
        report = run_exam(exam, kb)
        assert report.patient_dx is PatientDx.NORMAL_EXAMINATION
        for nerve_report in report.nerves:
            assert nerve_report.chain == (0, 0, 0)
            assert nerve_report.dx.value == "normal"

    def test_single_lesion_composes_to_focal_mono(self, kb):
        exam = exam_of(motor_nerve("median", Side.LEFT, "010"))
        report = run_exam(exam, kb)
        (nerve_report,) = report.nerves
        assert nerve_report.segments[1].dx is SegmentDx.SEVERE_AXONAL
        assert nerve_report.segments[1].rule == "severe_axonal_1"
        assert nerve_report.chain == (0, 1, 0)
        assert nerve_report.dx.value == "focal"
        assert report.patient_dx is PatientDx.FOCAL_MONO_NEUROPATHY

    def test_homologous_diffuse_pair_is_symmetrical_poly(self, kb):
        exam = exam_of(
            motor_nerve("median", Side.LEFT, "0110"),
            motor_nerve("median", Side.RIGHT, "0011"),
        )
        report = run_exam(exam, kb)
        assert report.patient_dx is PatientDx.SYMMETRICAL_POLY_NEUROPATHY

    def test_validation_runs_first(self, kb):
        exam = exam_of(motor_nerve("brachial_plexus", Side.LEFT, "000"))
        with pytest.raises(ExamValidationError, match="not in catalogue"):
            run_exam(exam, kb)

    def test_phase1_errors_are_annotated(self, kb):
        bad = (NerveId("median", Side.LEFT, FibreType.MOTOR),
               (SegmentMeasurements(index=1, amplitude=8.0),))
        with pytest.raises(PipelineError, match=r"phase 1, nerve median:left:motor, segment 1"):
            run_exam(exam_of(bad), kb)


class TestTrace:
    def test_every_segment_names_its_rule(self, kb):
        exam = exam_of(motor_nerve("median", Side.LEFT, "010"))
        report = run_exam(exam, kb)
        fired = [e for e in report.trace if isinstance(e, RuleFired)]
        assert len(fired) == 3
        assert all(e.rule is not None for e in fired)
        # Report conclusions are exactly the traced firings.
        by_segment = {(e.nerve, e.segment): e for e in fired}
        for nerve_report in report.nerves:
            for sr in nerve_report.segments:
                event = by_segment[(nerve_report.nerve, sr.index)]
                assert (sr.rule, sr.dx) == (event.rule, event.conclusion)

    def test_transitions_cover_every_chain_symbol(self, kb):
        exam = exam_of(
            motor_nerve("median", Side.LEFT, "01010"),
            motor_nerve("ulnar", Side.RIGHT, "00"),
        )
        report = run_exam(exam, kb)
        for nerve_report in report.nerves:
            assert len(nerve_report.transitions) == len(nerve_report.chain)
            assert nerve_report.transitions[0].source.value == "start"
            assert nerve_report.transitions[-1].target is nerve_report.final_state

    def test_patient_rule_recorded(self, kb):
        exam = exam_of(motor_nerve("median", Side.LEFT, "010"))
        report = run_exam(exam, kb)
        assert report.patient_rule == "focal_mono_neuropathy"
        assert report.patient_rule_index == 1

    def test_phase_order_in_trace(self, kb):
        exam = exam_of(motor_nerve("median", Side.LEFT, "010"))
        report = run_exam(exam, kb)
        phases = [e.phase for e in report.trace]
        assert phases == sorted(phases)

    def test_events_render_as_one_liners(self, kb):
        exam = exam_of(motor_nerve("median", Side.LEFT, "010"))
        report = run_exam(exam, kb)
        lines = [e.describe() for e in report.trace]
        assert any(l.startswith("phase 2:") and "severe_axonal_1" in l for l in lines)
        assert any(l.startswith("phase 3:") and "(n, 1) -> f_a" in l for l in lines)
        assert lines[-1].startswith("phase 4: rule 2 (focal_mono_neuropathy)")
        # Serialized events mirror the same content.
        dicts = [e.to_dict() for e in report.trace]
        assert dicts[-1]["conclusion"] == "focal_mono_neuropathy"


class TestUnclassifiedSegments:
    def test_kb_coverage_gap_is_flagged_not_hidden(self, kb_copy):
        """With a gappy ruleset the segment reads unclassified, counts as
        affected, and the report says so loudly."""
        (kb_copy / "level1_motor_subsequent.rules").write_text(
            "ruleset motor_subsequent target lesion\n"
            "rule all_normal\n"
            "  if amplitude in { normal }\n"
            "  if amplitude_ratio in { normal }\n"
            "  if velocity in { normal }\n"
            "  then lesion = normal\n"
        )
        gappy = load_kb(kb_copy)
        exam = exam_of((
            NerveId("median", Side.LEFT, FibreType.MOTOR),
            (normal_motor(1), motor_segment(2, 3.0, ratio=0.6, velocity=40.0)),
        ))
        report = run_exam(exam, gappy)
        (nerve_report,) = report.nerves
        assert nerve_report.segments[1].dx is SegmentDx.UNCLASSIFIED
        assert nerve_report.segments[1].rule is None
        assert nerve_report.chain == (0, 1)
        assert report.patient_dx is PatientDx.FOCAL_MONO_NEUROPATHY
        assert "[UNCLASSIFIED]" in report.to_text()


class TestPhaseDiscipline:
    def test_phase_isolation(self, kb):
        """Earlier stores can be destroyed once the next phase has run."""
        exam = exam_of(
            motor_nerve("median", Side.LEFT, "010"),
            motor_nerve("median", Side.RIGHT, "000"),
        )
        trace = []
        facts = run_phase1(exam, kb)
        verdicts = run_phase2(facts, kb, trace)
        facts.clear()
        results = run_phase3(verdicts, kb, trace)
        verdicts.clear()
        selection = run_phase4(results, kb, trace)
        assert selection.dx is PatientDx.FOCAL_MONO_NEUROPATHY

    def test_per_nerve_independence(self, kb):
        nerves = [
            motor_nerve("median", Side.LEFT, "010"),
            motor_nerve("ulnar", Side.RIGHT, "110"),
            motor_nerve("tibial", Side.LEFT, "000"),
        ]
        def phase3_store(order):
            trace = []
            facts = run_phase1(exam_of(*order), kb)
            return run_phase3(run_phase2(facts, kb, trace), kb, trace)

        baseline = phase3_store(nerves)
        assert phase3_store(nerves[::-1]) == baseline
        assert phase3_store([nerves[1], nerves[0], nerves[2]]) == baseline


class TestReproducibility:
    def test_byte_identical_reports(self, kb):
        exam = exam_of(
            motor_nerve("median", Side.LEFT, "010"),
            motor_nerve("ulnar", Side.RIGHT, "00110"),
        )
        first = run_exam(exam, kb).to_json()
        second = run_exam(exam, kb).to_json()
        assert first == second

    def test_nerve_order_does_not_matter(self, kb):
        nerves = [
            motor_nerve("median", Side.LEFT, "010"),
            motor_nerve("ulnar", Side.RIGHT, "00110"),
            motor_nerve("tibial", Side.LEFT, "0"),
        ]
        baseline = run_exam(exam_of(*nerves), kb).to_json()
        permuted = run_exam(exam_of(*nerves[::-1]), kb).to_json()
        assert baseline == permuted

    def test_json_is_valid_and_ordered(self, kb):
        exam = exam_of(
            motor_nerve("ulnar", Side.RIGHT, "010"),
            motor_nerve("median", Side.LEFT, "000"),
        )
        doc = json.loads(run_exam(exam, kb).to_json())
        assert [n["nerve"] for n in doc["nerves"]] == ["median:left:motor", "ulnar:right:motor"]
        assert doc["patient"]["dx"] == "focal_mono_neuropathy"
