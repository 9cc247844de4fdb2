import numpy as np
import pytest

from careprofiles.core.corpus import accumulate_stats, stats_matrix
from careprofiles.core.divergence import (
    average_kl,
    kl_exponential,
    kl_transition_distribution,
    sequence_distances,
)
from careprofiles.core.estimation import estimate_mle
from careprofiles.models.params import MrpParams
from careprofiles.models.sequences import EventSequence, StateSpace
from tests.conftest import random_params


def test_kl_exponential_values():
    assert kl_exponential(1.0, 2.0) == pytest.approx(0.3069, abs=1e-4)
    assert kl_exponential(2.0, 1.0) == pytest.approx(0.1931, abs=1e-4)
    assert kl_exponential(1.7, 1.7) == 0.0


def test_kl_exponential_rejects_non_positive_rates():
    with pytest.raises(ValueError):
        kl_exponential(0.0, 1.0)


def test_kl_transition_distribution_two_destinations():
    space = StateSpace(("A", "B"))
    # out of A: P(B) = 0.5 vs 0.8, P(RC) = 0.5 vs 0.2, equal rates
    seq_params = MrpParams.from_labeled(space, {"A": 1.0}, {"A": {"B": 0.5, "RC": 0.5}})
    profile = MrpParams.from_labeled(space, {"A": 1.0}, {"A": {"B": 0.8, "RC": 0.2}})
    expected = 0.5 * np.log(0.5 / 0.8) + 0.5 * np.log(0.5 / 0.2)

    assert expected == pytest.approx(0.2231, abs=1e-4)
    assert kl_transition_distribution(0, seq_params, profile) == pytest.approx(expected)


def test_kl_transition_distribution_adds_weighted_rate_terms():
    space = StateSpace(("A", "B"))
    seq_params = MrpParams.from_labeled(
        space, {"A": 1.0}, {"A": {"B": 0.5, "RC": 0.5}}, mean_interarrival={"A": {"B": 1.0}}
    )
    profile = MrpParams.from_labeled(
        space, {"A": 1.0}, {"A": {"B": 0.8, "RC": 0.2}}, mean_interarrival={"A": {"B": 0.5}}
    )
    expected = 0.2231 + 0.5 * kl_exponential(1.0, 2.0)

    assert expected == pytest.approx(0.3766, abs=1e-3)
    assert kl_transition_distribution(0, seq_params, profile) == pytest.approx(expected, abs=1e-3)


def test_kl_is_non_negative_and_zero_on_identity(small_space):
    rng = np.random.default_rng(123)
    for _ in range(10_000):
        a = random_params(rng, small_space.size)
        b = random_params(rng, small_space.size)
        for state in range(small_space.size):
            assert kl_transition_distribution(state, a, b) >= 0.0
            assert kl_transition_distribution(state, a, a) == pytest.approx(0.0, abs=1e-12)


def test_kl_matches_monte_carlo_estimate(small_space):
    rng = np.random.default_rng(5)
    s = small_space.size
    for pair in range(20):
        a = random_params(rng, s)
        b = random_params(rng, s)
        state = pair % s
        p_a, p_b = a.transitions[state], b.transitions[state]
        n = 1_000_000
        dest = rng.choice(s + 1, size=n, p=p_a)
        log_ratio = np.log(p_a[dest]) - np.log(p_b[dest])
        real = dest < s
        tau = rng.exponential(1.0 / a.rates[state, dest[real]])
        rate_a, rate_b = a.rates[state, dest[real]], b.rates[state, dest[real]]
        log_ratio[real] += np.log(rate_a) - rate_a * tau - (np.log(rate_b) - rate_b * tau)

        estimate = log_ratio.mean()
        stderr = log_ratio.std() / np.sqrt(n)
        exact = kl_transition_distribution(state, a, b)
        assert abs(estimate - exact) < 3 * stderr, (pair, estimate, exact, stderr)


def test_average_kl_edge_cases(small_space):
    rng = np.random.default_rng(9)
    a = random_params(rng, small_space.size)
    b = random_params(rng, small_space.size)

    assert average_kl(a, a, [0, 1, 2]) == pytest.approx(0.0, abs=1e-12)
    assert average_kl(a, b, []) == 0.0
    assert average_kl(a, b, [1]) == pytest.approx(kl_transition_distribution(1, a, b))
    assert average_kl(a, b, [0, 2, 2]) == pytest.approx(
        (kl_transition_distribution(0, a, b) + kl_transition_distribution(2, a, b)) / 2
    )


def test_sequence_distances_match_per_sequence_estimate(small_space):
    rng = np.random.default_rng(17)
    profile = random_params(rng, small_space.size)
    seqs = [
        EventSequence.from_labels("S1", ["A", "B", "A", "C", "C"], [0.0, 1.0, 2.5, 3.0, 6.0], small_space),
        EventSequence.from_labels("S2", ["B"], [4.0], small_space),
        EventSequence.from_labels("S3", ["C", "C", "C", "C"], [0.0, 0.5, 1.0, 1.0], small_space),
    ]
    distances = sequence_distances(stats_matrix(seqs, small_space.size), profile)

    for seq, distance in zip(seqs, distances):
        stats = accumulate_stats([seq], small_space)
        own = estimate_mle(stats, fallback=profile)
        active = [i for i in range(small_space.size) if stats.n_trans[i].sum() > 0]
        assert distance == pytest.approx(average_kl(own, profile, active), rel=1e-9, abs=1e-12)


def test_sequence_distances_shape_checks(small_space):
    profile = random_params(np.random.default_rng(1), small_space.size)
    assert sequence_distances(np.zeros((0, 34)), profile).shape == (0,)
    with pytest.raises(ValueError):
        sequence_distances(np.zeros((2, 7)), profile)
