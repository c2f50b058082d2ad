"""Tests for the blowup-lab command line."""

import numpy as np
import pytest
from click.testing import CliRunner

from blowuplab import __version__
from blowuplab.main import cli
from blowuplab.schemas import RunManifest, ScalarSample, SimConfig, SnapshotEntry, VerifyReport
from blowuplab.services.storage import RunStorage, save_profile_csv, write_csv


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, ["--log-level", "warning", *args])


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


class TestArgumentErrors:
    def test_bad_beta(self, runner, output_dir):
        result = invoke(runner, "profile", "--beta", "-1")
        assert result.exit_code == 2
        assert "beta" in result.output

    def test_invalid_run_config(self, runner, output_dir):
        result = invoke(runner, "simulate", "rsv", "--eps", "0")
        assert result.exit_code == 2

    def test_unknown_model(self, runner, output_dir):
        result = invoke(runner, "simulate", "kdv")
        assert result.exit_code == 2

    def test_bad_config_file(self, runner, output_dir, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("[1, 2]", encoding="utf-8")
        result = invoke(runner, "simulate", "rb", "--config", str(path))
        assert result.exit_code == 2
        assert "JSON object" in result.output

    def test_bad_alphas(self, runner, output_dir, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{}", encoding="utf-8")
        result = invoke(runner, "analyze", str(path), "--alphas", "1.5")
        assert result.exit_code == 2

    def test_kernel_bump_keeps_depth_positive(self, runner, output_dir):
        result = invoke(runner, "verify", "kernel", "--bump", "-1")
        assert result.exit_code == 2


class TestVerify:
    def test_flat_kernel(self, runner, output_dir):
        result = invoke(runner, "verify", "kernel")
        assert result.exit_code == 0, result.output
        assert "verdict: PASS" in result.output
        (run_dir,) = output_dir.iterdir()
        assert (run_dir / "kernel_column.csv").is_file()
        assert (run_dir / "report.txt").is_file()

    def test_bumped_kernel(self, runner, output_dir):
        result = invoke(runner, "verify", "kernel", "--bump", "0.5", "--source", "1.0")
        assert result.exit_code == 0, result.output
        assert "decay_rate" in result.output

    def test_initial_data_defaults_fail_energy_bound(self, runner, output_dir):
        result = invoke(runner, "verify", "initial", "rsv")
        assert result.exit_code == 1, result.output
        assert "init_w0_dx" in result.output
        assert any(
            line.startswith("E0_bound") and "FAIL" in line for line in result.output.splitlines()
        )
        assert "verdict: FAIL" in result.output


class TestAnalyze:
    def _unflagged_run(self, base, unit_profile):
        storage = RunStorage(base)
        run_dir = storage.create_run_dir("quiet")
        save_profile_csv(unit_profile, run_dir / "profile.csv")
        x = np.linspace(-2.5, 2.5, 64)
        write_csv(
            run_dir / "snapshots/snap_00000.csv",
            {"x": x, "v": np.zeros_like(x), "p": np.zeros_like(x)},
        )
        scalars = ScalarSample(t=-0.5, energy=0.0, min_dx=0.0, argmin_x=0.0)
        entry = SnapshotEntry(
            index=0, step=0, t=-0.5, file="snapshots/snap_00000.csv", scalars=scalars
        )
        manifest = RunManifest(
            config=SimConfig(model="rb", eps=0.5, half_length=2.5, n=64),
            series=[scalars],
            snapshots=[entry],
            files=["profile.csv", entry.file],
            blowup_flagged=False,
            stop_reason="t_max",
        )
        storage.save_manifest(run_dir, manifest)
        return run_dir

    def test_run_without_blowup(self, runner, output_dir, unit_profile):
        run_dir = self._unflagged_run(output_dir, unit_profile)
        result = invoke(runner, "analyze", str(run_dir / "manifest.json"))
        assert result.exit_code == 0, result.output
        assert "no blow-up detected" in result.output
        assert (run_dir / "analysis.txt").is_file()

    def test_missing_profile_is_a_run_error(self, runner, output_dir, unit_profile):
        run_dir = self._unflagged_run(output_dir, unit_profile)
        (run_dir / "profile.csv").unlink()
        result = invoke(runner, "analyze", str(run_dir / "manifest.json"))
        assert result.exit_code == 1


@pytest.mark.slow
def test_stretched_rb_run_reaches_blowup(runner, output_dir):
    result = invoke(
        runner, "simulate", "rb", "--eps", "0.5", "--length", "2.5", "--n", "8192",
        "--stretch", "8.5", "--cadence", "50", "--label", "blowup",
    )
    # the initial-data bounds fail at eps = 0.5, so the exit code is not asserted
    assert result.exception is None or isinstance(result.exception, SystemExit)
    (manifest_path,) = output_dir.glob("blowup-*/manifest.json")
    manifest = RunManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    assert manifest.blowup_flagged
    assert manifest.stop_reason == "gradient_growth"
    assert manifest.peak_growth >= manifest.config.stop_growth_factor >= 20.0

    result = invoke(runner, "analyze", str(manifest_path), "--no-svg")
    assert result.exception is None or isinstance(result.exception, SystemExit)
    assert "Hölder rate fits" in result.output
    manifest = RunManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))

    (near,) = [
        fit for fit in manifest.slopes if fit.alpha == 1.0 and not fit.file.endswith("_far.csv")
    ]
    assert near.slope == pytest.approx(-1.0, abs=0.15)

    convergence = VerifyReport.model_validate_json(
        (manifest_path.parent / "convergence.json").read_text(encoding="utf-8")
    )
    (agreement,) = [r for r in convergence.records if r.check_id == "estimate_agreement"]
    assert agreement.passed, agreement.notes
