import logging
from pathlib import Path

import numpy as np
import pytest

from careprofiles.core.corpus import CorpusStats
from careprofiles.data.synthetic_data import MixtureSimulator, two_profile_spec
from careprofiles.models.config import GeneratorProfile, GeneratorSpec
from careprofiles.models.params import MrpParams
from careprofiles.models.sequences import EventSequence, StateSpace
from careprofiles.utils.config_loader import load_mapping


PROJECT_ROOT = Path(__file__).resolve().parent.parent
TEMPLATES = PROJECT_ROOT / "configs" / "templates"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size planted-mixture experiments (deselect with -m \"not slow\")")


@pytest.fixture(autouse=True)
def _isolated_logging(monkeypatch: pytest.MonkeyPatch):
    """CLI commands reconfigure the root logger; put it back after every test."""
    monkeypatch.delenv("CP_LOG_FILE", raising=False)
    monkeypatch.delenv("CP_LOG_LEVEL", raising=False)
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def path_spec(seed: int = 42, weights: tuple[float, float] = (0.6, 0.4)) -> GeneratorSpec:
    """
    Two planted profiles with fixed paths: RX -> PO and ER -> CL.

    Every member of a profile has the same statistics row, so the planted
    partition is the only split worth making.
    """
    return GeneratorSpec(
        profiles=[
            GeneratorProfile(
                name="rx_path", weight=weights[0],
                initial={"RX": 1.0},
                transitions={"RX": {"PO": 1.0}, "PO": {"RC": 1.0}},
            ),
            GeneratorProfile(
                name="er_path", weight=weights[1],
                initial={"ER": 1.0},
                transitions={"ER": {"CL": 1.0}, "CL": {"RC": 1.0}},
            ),
        ],
        seed=seed,
    )


def disjoint_spec(seed: int = 42) -> GeneratorSpec:
    """Two stochastic profiles on disjoint alphabets (RX/PO versus ER/CL/HO)."""
    return GeneratorSpec(
        profiles=[
            GeneratorProfile(
                name="refills", weight=0.7,
                initial={"RX": 0.8, "PO": 0.2},
                transitions={
                    "RX": {"RX": 0.6, "PO": 0.3, "RC": 0.1},
                    "PO": {"RX": 0.7, "PO": 0.2, "RC": 0.1},
                },
                mean_interarrival_months={"RX": {"RX": 1.0}},
                default_mean_interarrival_months=1.5,
            ),
            GeneratorProfile(
                name="acute", weight=0.3,
                initial={"ER": 0.7, "CL": 0.3},
                transitions={
                    "ER": {"HO": 0.4, "CL": 0.4, "RC": 0.2},
                    "HO": {"ER": 0.3, "CL": 0.5, "RC": 0.2},
                    "CL": {"ER": 0.5, "CL": 0.3, "RC": 0.2},
                },
                default_mean_interarrival_months=4.0,
            ),
        ],
        seed=seed,
    )


def random_params(rng: np.random.Generator, n_states: int) -> MrpParams:
    """Strictly positive random parameters (LC -> RC excluded)."""
    s = n_states
    p = np.zeros((s + 1, s + 1))
    p[:s] = rng.dirichlet(np.ones(s + 1), size=s)
    p[s, :s] = rng.dirichlet(np.ones(s))
    rates = rng.uniform(0.2, 3.0, size=(s, s))
    return MrpParams(p, rates)


@pytest.fixture
def space() -> StateSpace:
    return StateSpace.default()


@pytest.fixture
def small_space() -> StateSpace:
    return StateSpace(("A", "B", "C"))


@pytest.fixture
def worked_sequence(space: StateSpace) -> EventSequence:
    """ER, an RX fill about a month later, then PO visits every three months with one RX refill."""
    return EventSequence.from_labels(
        "S1",
        ["ER", "RX", "PO", "PO", "RX", "PO"],
        [0.0, 0.96, 3.0, 6.0, 9.0, 12.0],
        space,
    )


@pytest.fixture
def mapping():
    return load_mapping(str(TEMPLATES / "mapping.json"))


@pytest.fixture(scope="session")
def planted_paths():
    """(sequences, labels, simulator) for 1,000 subjects of the fixed-path design."""
    simulator = MixtureSimulator(path_spec(seed=11), seed=11)
    sequences, labels = simulator.simulate_mixture(1000)
    return sequences, labels, simulator


@pytest.fixture(scope="session")
def planted_corpus(planted_paths) -> CorpusStats:
    sequences, _, simulator = planted_paths
    return CorpusStats.build(sequences, simulator.space)


@pytest.fixture(scope="session")
def planted_mixture():
    """(sequences, labels, simulator) for 2,000 subjects of the built-in two-profile design."""
    simulator = MixtureSimulator(two_profile_spec(seed=5), seed=5)
    sequences, labels = simulator.simulate_mixture(2000)
    return sequences, labels, simulator
