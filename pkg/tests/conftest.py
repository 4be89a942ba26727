import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from features.stats_core.stats_core import CACHE_DIR_ENV, compute_statistics
from tests.builders import write_background

ROOT = Path(__file__).resolve().parent.parent

settings.register_profile("default", max_examples=100, deadline=None)
settings.register_profile("fast", max_examples=20, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def repo_root(monkeypatch, tmp_path):
    """Bundled tables resolve from the repository root; the cache stays in tmp_path."""
    monkeypatch.chdir(ROOT)
    monkeypatch.setenv(CACHE_DIR_ENV, str(tmp_path / "cache"))
    return ROOT


@pytest.fixture
def background_path(tmp_path):
    return write_background(tmp_path / "background.pcap")


@pytest.fixture
def db(background_path):
    return compute_statistics(background_path)
