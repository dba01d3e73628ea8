import numpy as np
import pytest

from echochamber.constants import Normalization
from echochamber.dynamics import PlatformParams
from echochamber.graph import InfluenceGraph
from echochamber.network import SbmConfig
from echochamber.simulation import SimulationSettings


@pytest.fixture
def pair() -> InfluenceGraph:
    return InfluenceGraph.pair(1.0)


@pytest.fixture
def platform() -> PlatformParams:
    return PlatformParams.uniform(1.0, epsilon=1e-2)


@pytest.fixture
def fast_settings() -> SimulationSettings:
    return SimulationSettings(step=1e-3, horizon=40.0, tol=1e-6, window=1.0, sample_every=0.01)


@pytest.fixture
def small_sbm() -> SbmConfig:
    return SbmConfig(n=8, p=0.5, q=0.25, normalization=Normalization.row_normalized, seed=11)


@pytest.fixture
def path_graph_files(tmp_path):
    """A 4-node labeled path 0-1-2-3 with 0,1 on the left and 2,3 on the right."""
    edges = tmp_path / "edges.txt"
    labels = tmp_path / "labels.txt"
    edges.write_text("# toy path\n0 1\n1 2\n2 3\n")
    labels.write_text("0 L\n1 L\n2 R\n3 R\n")
    return edges, labels


@pytest.fixture(autouse=True)
def output_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ECHOCHAMBER_OUTPUT_DIR", str(tmp_path / "output"))
    monkeypatch.delenv("ECHOCHAMBER_LOG_LEVEL", raising=False)
    return tmp_path / "output"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
