"""
Shared fixtures for the Blow-up Lab test suite.
"""

import pytest

from blowuplab import config
from blowuplab.core.profile import solve_profile
from blowuplab.schemas import SimConfig
from blowuplab.services import storage


@pytest.fixture(scope="session")
def unit_profile():
    """The beta = 1 profile table, integrated once per session."""
    return solve_profile(1.0, y_max=1e8, rel_tol=1e-12)


@pytest.fixture
def small_config():
    """A coarse rSV configuration that still resolves the core scale."""
    return SimConfig(model="rsv", eps=0.5, half_length=2.5, n=1024)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Point the configured output directory at a temporary path."""
    out = tmp_path / "runs"
    monkeypatch.setenv("BLOWUPLAB_OUTPUT_DIR", str(out))
    monkeypatch.setenv("BLOWUPLAB_RENDER_SVG", "false")
    config.reload_settings()
    storage._storage = None
    yield out
    storage._storage = None
    monkeypatch.delenv("BLOWUPLAB_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("BLOWUPLAB_RENDER_SVG", raising=False)
    config.reload_settings()
