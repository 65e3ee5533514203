"""Configuration pytest: chemins, profils hypothesis et réseaux fournis."""

from __future__ import annotations

import os
import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

_ROOT: Path = Path(__file__).parent.parent
_SRC: Path = _ROOT / "src"
_TESTS: Path = Path(__file__).parent
for _path in (_SRC, _TESTS):
    if str(_path) not in sys.path:
        sys.path.insert(0, str(_path))

from cli.network_io import NetworkFile  # noqa: E402
from core.network import Network  # noqa: E402

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

NETWORKS_DIR: Path = _ROOT / "networks"


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: longues simulations statistiques (désactiver avec -m 'not slow')")


def network_path(name: str) -> Path:
    """Chemin d'un réseau fourni."""
    return NETWORKS_DIR / f"{name}.json"


def load_network(name: str) -> Network:
    """Charge un réseau fourni."""
    return NetworkFile.load(network_path(name))


@pytest.fixture
def fig1() -> Network:
    return load_network("fig1")


@pytest.fixture
def npf() -> Network:
    return load_network("npf")


@pytest.fixture
def ctrl() -> Network:
    return load_network("ctrl")


@pytest.fixture
def overloaded() -> Network:
    return load_network("overloaded")


@pytest.fixture
def netproc() -> Network:
    return load_network("netproc")
