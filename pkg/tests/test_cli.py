import json

import pytest

from neurop.cli import (
    EXIT_DISAGREEMENT,
    EXIT_INVALID,
    EXIT_NOT_FOUND,
    EXIT_OK,
    EXIT_PARSE,
    main,
    resolve_kb_path,
)


@pytest.fixture
def demo_exam(samples_dir):
    return str(samples_dir / "demo_exam.json")


@pytest.fixture
def multifocal_exam(samples_dir):
    return str(samples_dir / "multifocal_exam.json")


class TestDiagnose:
    def test_text_report_ends_with_patient_dx(self, demo_exam, capsys):
        assert main(["diagnose", demo_exam]) == EXIT_OK
        out = capsys.readouterr().out
        last = [line for line in out.splitlines() if line][-1]
        assert last.startswith("Patient diagnosis: focal_mono_neuropathy")

    def test_json_report_parses_and_carries_trace(self, demo_exam, capsys):
        assert main(["diagnose", demo_exam, "--format", "json"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["patient"]["dx"] == "focal_mono_neuropathy"
        assert doc["trace"]
        assert {event["phase"] for event in doc["trace"]} == {2, 3, 4}

    def test_json_and_text_agree(self, demo_exam, capsys):
        main(["diagnose", demo_exam, "--format", "json"])
        doc = json.loads(capsys.readouterr().out)
        main(["diagnose", demo_exam])
        text = capsys.readouterr().out
        assert doc["patient"]["dx"] in text
        for nerve in doc["nerves"]:
            assert f"Nerve {nerve['nerve']}" in text
            assert f"nerve diagnosis: {nerve['dx']}" in text

    def test_missing_exam_file(self, tmp_path, capsys):
        code = main(["diagnose", str(tmp_path / "none.json")])
        assert code == EXIT_NOT_FOUND
        assert "not found" in capsys.readouterr().err

    def test_malformed_exam_names_path(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "patient_id": "p",
            "nerves": [{"name": "median", "side": "left", "fibre": "motor",
                        "segments": [{"index": 1, "amplitude": "x", "distal_latency": 3.0}]}],
        }))
        code = main(["diagnose", str(path)])
        assert code == EXIT_PARSE
        assert "nerves[0].segments[0].amplitude" in capsys.readouterr().err

    def test_invalid_exam_semantics(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "patient_id": "p",
            "nerves": [{"name": "median", "side": "left", "fibre": "sensory",
                        "segments": [{"index": i, "amplitude": 20.0, "velocity": 50.0}
                                      for i in (1, 2, 3)]}],
        }))
        code = main(["diagnose", str(path)])
        assert code == EXIT_INVALID
        assert "out of range" in capsys.readouterr().err

    def test_broken_kb_reported(self, kb_copy, demo_exam, capsys):
        (kb_copy / "automaton.tr").write_text("start 0 n\n")
        code = main(["diagnose", demo_exam, "--kb", str(kb_copy)])
        assert code == EXIT_INVALID
        assert "not total" in capsys.readouterr().err

    def test_neurop_kb_env_var(self, kb_copy, demo_exam, monkeypatch, capsys):
        monkeypatch.setenv("NEUROP_KB", str(kb_copy))
        assert resolve_kb_path(None) == kb_copy
        assert main(["diagnose", demo_exam]) == EXIT_OK
        capsys.readouterr()


class TestValidateKb:
    def test_default_kb_passes(self, capsys):
        assert main(["validate-kb"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count(": pass") == 7
        assert "all knowledge files pass" in out

    def test_duplicate_transition_line(self, kb_copy, capsys):
        path = kb_copy / "automaton.tr"
        path.write_text(path.read_text() + "n 0 n\n")
        code = main(["validate-kb", "--kb", str(kb_copy)])
        assert code == EXIT_INVALID
        out = capsys.readouterr().out
        assert "automaton.tr: FAIL" in out
        assert "not functional at (n, 0)" in out

    def test_missing_file_listed(self, kb_copy, capsys):
        (kb_copy / "level3.rules").unlink()
        code = main(["validate-kb", "--kb", str(kb_copy)])
        assert code == EXIT_NOT_FOUND
        out = capsys.readouterr().out
        assert "level3.rules: FAIL" in out
        assert "missing file" in out

    def test_other_files_still_checked(self, kb_copy, capsys):
        (kb_copy / "level3.rules").unlink()
        (kb_copy / "thresholds.tbl").write_text("garbage line\n")
        main(["validate-kb", "--kb", str(kb_copy)])
        out = capsys.readouterr().out
        assert "thresholds.tbl: FAIL" in out
        assert "nerves.cat: pass" in out


class TestEnumerate:
    def test_62_rows_all_agree(self, capsys):
        assert main(["enumerate"]) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l]
        header, rows = lines[0], lines[1:]
        assert "agree" in header
        assert len(rows) == 62
        assert all(row.endswith("true") for row in rows)

    def test_known_rows_present(self, capsys):
        main(["enumerate"])
        out = capsys.readouterr().out
        assert any(l.startswith("01000") and "f_b" in l and "focal" in l for l in out.splitlines())
        assert any(l.startswith("10110") and l.count("diffuse") == 2 for l in out.splitlines())

    def test_disagreement_detected(self, kb_copy, capsys):
        # Redirect (n, 1) to d: single isolated lesions now read diffuse.
        path = kb_copy / "automaton.tr"
        path.write_text(path.read_text().replace("n 1 f_a", "n 1 d"))
        code = main(["enumerate", "--kb", str(kb_copy)])
        assert code == EXIT_DISAGREEMENT
        assert "FALSE" in capsys.readouterr().out


class TestTrace:
    def test_multifocal_narrative(self, multifocal_exam, capsys):
        code = main(["trace", multifocal_exam, "--nerve", "median:left:motor"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "chain: 0 1 0 1 0" in out
        steps = [l for l in out.splitlines() if l.strip().startswith("step ")]
        assert len(steps) == 5
        assert "final state: m_f_b" in out
        assert "nerve diagnosis: multiple_focal" in out

    def test_single_segment_nerve(self, tmp_path, capsys):
        path = tmp_path / "exam.json"
        path.write_text(json.dumps({
            "patient_id": "p",
            "nerves": [{"name": "tibial", "side": "left", "fibre": "motor",
                        "segments": [{"index": 1, "amplitude": 8.0, "distal_latency": 3.0}]}],
        }))
        assert main(["trace", str(path), "--nerve", "tibial:left:motor"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "step 1: (start, 0) -> n" in out
        assert "nerve diagnosis: normal" in out

    def test_unknown_selector_lists_available(self, multifocal_exam, capsys):
        code = main(["trace", multifocal_exam, "--nerve", "ulnar:left:motor"])
        assert code == EXIT_INVALID
        err = capsys.readouterr().err
        assert "available: median:left:motor" in err

    def test_bad_selector_syntax(self, multifocal_exam, capsys):
        code = main(["trace", multifocal_exam, "--nerve", "median"])
        assert code == EXIT_INVALID
        assert "name:side:fibre" in capsys.readouterr().err


class TestHelp:
    def test_exit_codes_documented(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--help"])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        assert "exit codes" in out
        assert "knowledge file not found" in out


def test_default_kb_is_bundled_and_loadable(tmp_path, monkeypatch):
    monkeypatch.delenv("NEUROP_KB", raising=False)
    path = resolve_kb_path(None)
    assert (path / "automaton.tr").is_file()
    override = tmp_path / "elsewhere"
    assert resolve_kb_path(str(override)) == override
