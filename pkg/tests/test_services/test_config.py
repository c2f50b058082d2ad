"""Tests for settings loading."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from blowuplab.config import Settings, get_settings, reload_settings


def test_defaults(monkeypatch):
    for key in ("BLOWUPLAB_OUTPUT_DIR", "BLOWUPLAB_LOG_LEVEL", "BLOWUPLAB_LOG_FILE"):
        monkeypatch.delenv(key, raising=False)
    settings = Settings(_env_file=None)
    assert settings.output_dir == Path("./runs")
    assert settings.profile_rel_tol == 1e-12
    assert settings.bootstrap_m == 1e8
    assert settings.log_file is None


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("BLOWUPLAB_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.setenv("BLOWUPLAB_LOG_LEVEL", "debug")
    monkeypatch.setenv("BLOWUPLAB_ANALYSIS_WORKERS", "2")
    settings = reload_settings()
    try:
        assert settings.output_dir == tmp_path / "out"
        assert settings.log_level == "DEBUG"
        assert settings.analysis_workers == 2
        assert get_settings() is settings
    finally:
        monkeypatch.undo()
        reload_settings()


def test_invalid_values(monkeypatch):
    with pytest.raises(ValidationError):
        Settings(_env_file=None, log_level="LOUD")
    with pytest.raises(ValidationError):
        Settings(_env_file=None, profile_rel_tol=1e-2)


def test_create_directories(tmp_path):
    settings = Settings(
        _env_file=None, output_dir=tmp_path / "runs", log_file=tmp_path / "logs" / "lab.log"
    )
    settings.create_directories()
    assert (tmp_path / "runs").is_dir()
    assert (tmp_path / "logs").is_dir()
