import pandas as pd
import pytest

from careprofiles.core.clustering import DivisiveClusterer
from careprofiles.core.corpus import CorpusStats
from careprofiles.core.metrics import RecoveryCalculator
from careprofiles.models.config import AppConfig


@pytest.fixture(scope="module")
def mixture_corpus(planted_mixture):
    sequences, _, simulator = planted_mixture
    return CorpusStats.build(sequences, simulator.space)


@pytest.fixture(scope="module")
def mixture_tree(mixture_corpus):
    return DivisiveClusterer(AppConfig()).run(mixture_corpus)


def truth_of(planted):
    sequences, labels, _ = planted
    return {seq.subject_id: label for seq, label in zip(sequences, labels)}


def test_recovery_on_planted_mixture(planted_mixture, mixture_tree):
    simulator = planted_mixture[2]

    report = RecoveryCalculator().calculate(mixture_tree, truth_of(planted_mixture), simulator.planted)

    assert report.n_profiles == report.n_planted == 2
    assert report.ari >= 0.95
    assert report.purity >= 0.98
    assert set(report.matching) == {"rx_maintenance", "office_er"}
    assert len(set(report.matching.values())) == 2
    assert all(error < 0.05 for error in report.max_abs_p_error.values())


def test_recovery_on_planted_paths(planted_paths, planted_corpus):
    simulator = planted_paths[2]
    tree = DivisiveClusterer(AppConfig()).run(planted_corpus)

    report = RecoveryCalculator().calculate(tree, truth_of(planted_paths), simulator.planted)

    assert report.ari == pytest.approx(1.0)
    assert report.purity == pytest.approx(1.0)


def test_contingency_table(planted_mixture, mixture_tree):
    table = RecoveryCalculator().contingency(mixture_tree, truth_of(planted_mixture))

    assert table.values.sum() == len(planted_mixture[0])
    assert table.shape == (2, 2)
    # each planted profile sits almost entirely in one leaf
    assert (table.max(axis=1) / table.sum(axis=1)).min() >= 0.97


def test_match_is_greedy_and_one_to_one():
    table = pd.DataFrame({1: [90, 30], 2: [10, 70]}, index=["a", "b"])
    assert RecoveryCalculator().match(table) == {"a": 1, "b": 2}

    lopsided = pd.DataFrame({1: [50, 40]}, index=["a", "b"])
    assert RecoveryCalculator().match(lopsided) == {"a": 1}


def test_merged_profiles_lower_purity(planted_mixture, mixture_corpus):
    labels, simulator = planted_mixture[1], planted_mixture[2]
    config = AppConfig.model_validate({"clustering": {"max_profiles": 1}})
    tree = DivisiveClusterer(config).run(mixture_corpus)

    report = RecoveryCalculator().calculate(tree, truth_of(planted_mixture), simulator.planted)

    assert report.ari == pytest.approx(0.0)
    assert report.purity == pytest.approx(max(labels.count(n) for n in set(labels)) / len(labels))
    assert len(report.matching) == 1
