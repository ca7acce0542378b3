"""
Tests for the command-line surface (cli.py)

Commands run in-process through main(argv, stream); the working
directory is a temporary one so no config.json is picked up.
"""

import io
import json
from pathlib import Path

import pytest

from src.cli import (
    EXIT_DOMAIN,
    EXIT_OK,
    EXIT_PROOF,
    build_parser,
    float_list,
    main,
    monomial_power,
    vanhove_indices,
)
from src.exceptions import DomainError

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("KMS_FIELD_MASS", "KMS_FIELD_BETA", "KMS_OUTPUT_FORMAT", "KMS_REPRODUCIBLE"):
        monkeypatch.delenv(name, raising=False)
    return tmp_path


def run(*argv):
    stream = io.StringIO()
    code = main(list(argv), stream=stream)
    return code, stream.getvalue()


class TestParsingHelpers:
    """Flag value parsers."""

    def test_monomial_power(self):
        assert monomial_power("phi4") == 4
        assert monomial_power("phi^2") == 2
        assert monomial_power("1") == 0
        with pytest.raises(DomainError):
            monomial_power("psi4")

    def test_lists(self):
        assert float_list("-0.3,-0.2") == [-0.3, -0.2]
        with pytest.raises(DomainError):
            float_list("a,b")

    def test_vanhove_indices(self):
        assert vanhove_indices("3") == [3]
        assert vanhove_indices("2..4") == [2, 3, 4]

    @pytest.mark.parametrize("argv,flag,value", [
        (["verify", "--t", "-1/4", "--s", "-1/8"], "s", "-1/8"),
        (["verify", "--t", "-1/4", "--s", "1/8"], "t", "-1/4"),
        (["propagator", "--t", "-0.5,.25"], "t", "-0.5,.25"),
        (["kms", "check", "shift", "--shifts", "-.3,-0.2"], "shifts", "-.3,-0.2"),
    ])
    def test_leading_minus_values(self, argv, flag, value):
        """Negative rationals and lists are flag values in every subcommand."""
        args = build_parser().parse_args(argv)
        assert getattr(args, flag) == value

    def test_unknown_flag_still_rejected(self):
        """Only number-like strings are taken as values."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["verify", "--t", "1/4", "--s", "-x"])


class TestPropagatorCommand:
    """The propagator grid."""

    def test_csv_header(self):
        code, text = run("propagator", "--grid", "small", "--beta", "inf", "--format", "csv", "--reproducible")
        assert code == EXIT_OK
        lines = text.splitlines()
        assert lines[0] == (FIXTURES / "propagator_header.csv").read_text().strip()
        assert len(lines) == 3

    def test_reproducible_output(self):
        first = run("propagator", "--grid", "small", "--format", "json", "--reproducible")[1]
        second = run("propagator", "--grid", "small", "--format", "json", "--reproducible")[1]
        assert first == second
        assert "metadata" not in json.loads(first)

    def test_massless_is_domain_error(self, capsys):
        code, _ = run("propagator", "--mass", "0")
        assert code == EXIT_DOMAIN
        assert "positive mass" in capsys.readouterr().err

    def test_thermal_skips_outside_strip(self):
        code, text = run("propagator", "--beta", "2", "--u", "0.5,2.5", "--r", "1", "--format", "json",
                         "--reproducible")
        assert code == EXIT_OK
        rows = json.loads(text)["rows"]
        assert [row["u"] for row in rows] == [0.5]
        assert rows[0]["delta"] < 1e-8

    def test_output_file(self, isolated):
        code, text = run("propagator", "--grid", "small", "--output", "out/grid.csv")
        assert code == EXIT_OK
        assert text == ""
        assert (isolated / "out" / "grid.csv").read_text().startswith("u,r,t")


class TestKmsCommands:
    """kms thermal-mass and kms check."""

    def test_thermal_mass(self):
        code, text = run("kms", "thermal-mass", "--mass", "0", "--beta", "2", "--format", "json",
                         "--reproducible")
        assert code == EXIT_OK
        document = json.loads(text)
        assert document["value"] == pytest.approx(1.0 / 48.0, rel=1e-9)
        assert document["massless_value"] == pytest.approx(1.0 / 48.0)

    def test_reorder_check(self):
        code, text = run("kms", "check", "reorder", "--beta", "2", "--format", "json", "--reproducible")
        assert code == EXIT_OK
        document = json.loads(text)
        assert document["check"] == "reorder"
        assert document["passed"] is True

    def test_shift_needs_thermal_state(self):
        code, _ = run("kms", "check", "shift", "--shifts=-0.3,-0.2")
        assert code == EXIT_DOMAIN

    def test_shift_list_as_separate_argument(self):
        """A comma list of negative shifts parses without the = spelling."""
        code, _ = run("kms", "check", "shift", "--shifts", "-0.3,-0.2,-0.15")
        assert code == EXIT_DOMAIN

    def test_correct_without_graphs(self):
        code, text = run("kms", "correct", "--obs", "1", "--beta", "2", "--format", "json", "--reproducible")
        assert code == EXIT_OK
        assert json.loads(text)["value"] == 0.0

    def test_bad_interaction(self):
        code, _ = run("kms", "correct", "--int", "phi3", "--beta", "2")
        assert code == EXIT_DOMAIN


class TestClusterCommand:
    """Scan, fit and bound."""

    def test_vacuum_scan_passes(self):
        code, text = run("cluster", "--powers", "2,2", "--u", "0.5", "--format", "json", "--reproducible")
        assert code == EXIT_OK
        document = json.loads(text)
        assert document["bound"]["passed"] is True
        assert len(document["samples"]) == 6

    def test_negative_control_fails(self):
        code, _ = run("cluster", "--powers", "2,2", "--u", "0.5", "--negative-control")
        assert code == EXIT_PROOF

    def test_csv_writes_fit_next_to_output(self, isolated):
        code, _ = run("cluster", "--powers", "2,2", "--u", "0.5", "--output", "scan.csv")
        assert code == EXIT_OK
        assert "fit" in json.loads((isolated / "scan.fit.json").read_text())


class TestVerifyCommand:
    """The identity prover."""

    def test_corpus_passes(self):
        code, text = run("verify", "--format", "json", "--reproducible")
        assert code == EXIT_OK
        assert json.loads(text)["all_passed"] is True

    def test_corrupted_rules_fail(self):
        code, _ = run("verify", "--corrupt-rules")
        assert code == EXIT_PROOF

    def test_trace_dir(self, isolated):
        code, _ = run("verify", "--trace-dir", "traces")
        assert code == EXIT_OK
        traces = sorted((isolated / "traces").glob("*.trace"))
        assert traces
        for path in traces:
            assert path.read_text().startswith("# start")

    def test_cocycle(self):
        code, text = run("verify", "--t", "1/4", "--s=-1/8")
        assert code == EXIT_OK
        assert text.startswith("# start")

    def test_cocycle_negative_time_as_separate_argument(self):
        """--s -1/8 is read as a value, not as an unknown flag."""
        code, text = run("verify", "--t", "1/4", "--s", "-1/8")
        assert code == EXIT_OK
        assert text.startswith("# start")

    def test_cocycle_needs_both_times(self):
        code, _ = run("verify", "--t", "1/4")
        assert code == EXIT_DOMAIN

    def test_cocycle_precondition(self):
        code, _ = run("verify", "--t", "2", "--s", "1/4")
        assert code == EXIT_DOMAIN


class TestConfigLayering:
    """Config file run section and validation."""

    def test_run_section_fills_flags(self, isolated):
        (isolated / "config.json").write_text(json.dumps(
            {"run": {"mass": 0.0, "beta": 2, "format": "json", "reproducible": True}}))
        code, text = run("kms", "thermal-mass")
        assert code == EXIT_OK
        assert json.loads(text)["value"] == pytest.approx(1.0 / 48.0, rel=1e-9)

    def test_flags_override_run_section(self, isolated):
        (isolated / "config.json").write_text(json.dumps({"run": {"beta": 2, "format": "json"}}))
        code, text = run("kms", "thermal-mass", "--mass", "0", "--beta", "1", "--reproducible")
        assert code == EXIT_OK
        assert json.loads(text)["value"] == pytest.approx(1.0 / 12.0, rel=1e-9)

    def test_invalid_config(self, isolated):
        (isolated / "bad.json").write_text(json.dumps({"field": {"mass": -1}}))
        code, _ = run("kms", "thermal-mass", "--config", "bad.json")
        assert code == EXIT_DOMAIN
