"""Shared fixtures for the test suite."""

from __future__ import annotations

from pathlib import Path

import pytest

from anchorscan.analyzer import Ruleset, default_ruleset, load_fixture
from anchorscan.coordinator import ArtifactStore
from anchorscan.ledger import ChainConfig, SimChain

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
CORPUS = FIXTURES / "corpus"
CONFIGS = REPO_ROOT / "configs"

AUDITOR = bytes.fromhex("a0dec0de" + "00" * 14 + "0001")


@pytest.fixture(scope="session")
def ruleset() -> Ruleset:
    return default_ruleset()


@pytest.fixture
def vulnbank(ruleset):
    return load_fixture(FIXTURES / "targets" / "reentrancy_vulnbank.json", ruleset)


@pytest.fixture
def safevault(ruleset):
    return load_fixture(FIXTURES / "targets" / "contract_safe_vault.json", ruleset)


@pytest.fixture
def storefront(ruleset):
    return load_fixture(FIXTURES / "targets" / "webapp_storefront.json", ruleset)


@pytest.fixture
def chain() -> SimChain:
    return SimChain(ChainConfig())


@pytest.fixture
def instant_chain() -> SimChain:
    """Chain with zero latency everywhere: submissions settle immediately."""
    return SimChain(ChainConfig(
        propagation=_dist(0.0), confirmation=_dist(0.0),
    ))


def _dist(mean: float):
    from anchorscan.ledger import LatencyDist

    return LatencyDist(mean, 0.0)


@pytest.fixture
def store(tmp_path) -> ArtifactStore:
    return ArtifactStore(tmp_path / "store")
