"""Command-line interface: exit codes, output bundles, environment
overrides, and byte-level determinism of repeated runs."""

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from switchcert import SwitchingSignal, save_library
from switchcert.cli import (
    EXIT_INFEASIBLE,
    EXIT_INPUT,
    EXIT_INVALID_SIGNAL,
    EXIT_OK,
    main,
)

from conftest import make_pair_library, make_primitive
from switchcert import PrimitiveLibrary

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "examples"


def read_outputs(out_dir: Path) -> dict:
    """Map file name to bytes, with manifest timing fields masked out."""
    result = {}
    for path in sorted(out_dir.iterdir()):
        data = path.read_bytes()
        if path.name == "run_manifest.json":
            doc = json.loads(data)
            doc.pop("duration_seconds", None)
            data = json.dumps(doc, sort_keys=True).encode()
        result[path.name] = data
    return result


@pytest.fixture(scope="module")
def pair_library_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("library") / "pair.json"
    save_library(make_pair_library(), path)
    return path


@pytest.fixture(scope="module")
def single_library_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("library") / "single.json"
    save_library(PrimitiveLibrary((make_primitive(0, basin_level=2.0),)), path)
    return path


class TestCertify:
    def test_shipped_library_produces_a_feasible_certificate(self, tmp_path):
        code = main(
            ["certify", "--library", "shipped-walker", "--out-dir", str(tmp_path)]
        )
        assert code == EXIT_OK
        certificate = json.loads((tmp_path / "certificate.json").read_text())
        assert certificate["n0_bar"] == 2
        assert certificate["na_bar"] <= 1.0
        report = (tmp_path / "certify_report.txt").read_text()
        assert "FEASIBLE" in report
        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert manifest["subcommand"] == "certify"
        assert "sha256" in manifest["inputs"]["library"]

    def test_small_library_certifies_from_a_file(self, tmp_path, single_library_path):
        code = main(
            ["certify", "--library", str(single_library_path), "--out-dir", str(tmp_path)]
        )
        assert code == EXIT_OK
        assert (tmp_path / "certificate.json").exists()

    def test_offset_pair_geometry_is_reported_infeasible(self, tmp_path, pair_library_path):
        # the jump factor near the excluded core grows much faster than the
        # basins can absorb for this two-center geometry
        code = main(
            ["certify", "--library", str(pair_library_path), "--out-dir", str(tmp_path)]
        )
        assert code == EXIT_INFEASIBLE

    def test_analytic_method_on_the_shipped_library_is_infeasible(self, tmp_path):
        code = main(
            [
                "certify",
                "--library",
                "shipped-walker",
                "--method",
                "analytic",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == EXIT_INFEASIBLE
        assert not (tmp_path / "certificate.json").exists()
        report = (tmp_path / "certify_report.txt").read_text()
        assert "INFEASIBLE" in report

    def test_missing_library_file_is_an_input_error(self, tmp_path):
        code = main(
            ["certify", "--library", str(tmp_path / "absent.json"), "--out-dir", str(tmp_path)]
        )
        assert code == EXIT_INPUT

    def test_malformed_library_file_is_an_input_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{]")
        code = main(["certify", "--library", str(bad), "--out-dir", str(tmp_path)])
        assert code == EXIT_INPUT


class TestValidate:
    def write_signal(self, tmp_path, assignments):
        path = tmp_path / "signal.csv"
        SwitchingSignal(assignments).to_csv(path)
        return path

    def test_constant_signal_is_valid(self, tmp_path):
        path = self.write_signal(tmp_path, (1,) * 20)
        code = main(["validate", "--signal", str(path), "--n0", "1", "--na", "2"])
        assert code == EXIT_OK

    def test_burst_overrun_exits_with_signal_code(self, tmp_path):
        path = self.write_signal(tmp_path, (0, 1, 0, 1, 0, 1, 0, 1))
        out = tmp_path / "out"
        code = main(
            [
                "validate",
                "--signal",
                str(path),
                "--n0",
                "1",
                "--na",
                "2",
                "--out-dir",
                str(out),
            ]
        )
        assert code == EXIT_INVALID_SIGNAL
        report = json.loads((out / "validation_report.json").read_text())
        assert report["valid"] is False
        assert report["worst_slack"] < 0.0
        assert (out / "validation_report.txt").exists()

    def test_missing_signal_file_is_an_input_error(self, tmp_path):
        code = main(
            ["validate", "--signal", str(tmp_path / "none.csv"), "--n0", "1", "--na", "1"]
        )
        assert code == EXIT_INPUT

    def test_malformed_signal_file_is_an_input_error(self, tmp_path):
        path = tmp_path / "signal.csv"
        path.write_text("not,a\nsignal,file\n")
        code = main(["validate", "--signal", str(path), "--n0", "1", "--na", "1"])
        assert code == EXIT_INPUT


class TestSimulate:
    def test_campaign_summary_and_traces(self, tmp_path):
        code = main(
            [
                "simulate",
                "--library",
                "shipped-walker",
                "--certificate",
                "shipped",
                "--episodes",
                "20",
                "--horizon",
                "50",
                "--seed",
                "7",
                "--keep-traces",
                "3",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "campaign_summary.json").read_text())
        assert summary["episodes"] == 20
        assert summary["violation_count"] == 0
        for index in range(3):
            assert (tmp_path / f"trace_{index:04d}.csv").exists()

    def test_certificate_fingerprint_mismatch_is_an_input_error(
        self, tmp_path, pair_library_path
    ):
        code = main(
            [
                "simulate",
                "--library",
                str(pair_library_path),
                "--certificate",
                "shipped",
                "--episodes",
                "2",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == EXIT_INPUT


class TestScenario:
    def test_straight_leader_bundle(self, tmp_path):
        code = main(
            [
                "scenario",
                "--config",
                str(EXAMPLES / "straight_leader.json"),
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["mode"] == "adaptive"
        assert summary["reduced_in_all_basins"] is True
        for name in (
            "poses.csv",
            "forces.csv",
            "sigma.csv",
            "reduced.csv",
            "plot_walker_path.csv",
            "plot_leader_path.csv",
            "plot_basin_ellipses.csv",
            "run_manifest.json",
        ):
            assert (tmp_path / name).exists(), name

    def test_mode_override_runs_the_ablation(self, tmp_path):
        code = main(
            [
                "scenario",
                "--config",
                str(EXAMPLES / "straight_leader.json"),
                "--mode",
                "fixed:0",
                "--out-dir",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["mode"] == "fixed:0"
        assert summary["usage_counts"]["0"] == summary["strides"]

    def test_missing_config_is_an_input_error(self, tmp_path):
        code = main(
            ["scenario", "--config", str(tmp_path / "nope.json"), "--out-dir", str(tmp_path)]
        )
        assert code == EXIT_INPUT

    def test_config_can_come_from_the_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SWITCHCERT_CONFIG", str(EXAMPLES / "straight_leader.json"))
        monkeypatch.setenv("SWITCHCERT_OUT_DIR", str(tmp_path))
        code = main(["scenario"])
        assert code == EXIT_OK
        assert (tmp_path / "summary.json").exists()


class TestArgumentErrors:
    def test_unknown_subcommand_is_an_input_error(self):
        assert main(["frobnicate"]) == EXIT_INPUT

    def test_missing_required_argument_is_an_input_error(self):
        assert main(["certify"]) == EXIT_INPUT

    def test_console_entry_point_reports_usage(self):
        proc = subprocess.run(
            [sys.executable, "-m", "switchcert.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        for name in ("certify", "validate", "simulate", "scenario"):
            assert name in proc.stdout


class TestDeterminism:
    def run_twice(self, argv_builder, tmp_path):
        first = tmp_path / "first"
        second = tmp_path / "second"
        assert main(argv_builder(first)) == main(argv_builder(second))
        left = read_outputs(first)
        right = read_outputs(second)
        assert left.keys() == right.keys()
        for name in left:
            assert left[name] == right[name], name

    def test_certify_is_byte_deterministic(self, tmp_path, single_library_path):
        self.run_twice(
            lambda out: [
                "certify",
                "--library",
                str(single_library_path),
                "--out-dir",
                str(out),
            ],
            tmp_path,
        )

    def test_validate_is_byte_deterministic(self, tmp_path):
        signal = tmp_path / "signal.csv"
        SwitchingSignal((0, 1, 1, 0, 2, 2)).to_csv(signal)
        self.run_twice(
            lambda out: [
                "validate",
                "--signal",
                str(signal),
                "--n0",
                "2",
                "--na",
                "1.5",
                "--out-dir",
                str(out),
            ],
            tmp_path,
        )

    def test_simulate_is_byte_deterministic(self, tmp_path):
        self.run_twice(
            lambda out: [
                "simulate",
                "--library",
                "shipped-walker",
                "--certificate",
                "shipped",
                "--episodes",
                "15",
                "--horizon",
                "40",
                "--amplitude",
                "0.05",
                "--seed",
                "3",
                "--keep-traces",
                "2",
                "--out-dir",
                str(out),
            ],
            tmp_path,
        )

    def test_scenario_is_byte_deterministic(self, tmp_path):
        self.run_twice(
            lambda out: [
                "scenario",
                "--config",
                str(EXAMPLES / "curved_leader.json"),
                "--out-dir",
                str(out),
            ],
            tmp_path,
        )
