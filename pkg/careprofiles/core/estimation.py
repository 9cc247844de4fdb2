# careprofiles/core/estimation.py
"""
Maximum-likelihood estimation, censoring-aware likelihoods, posterior
assignment and BIC scoring for Markov renewal process profiles.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from ..models.params import MrpParams, SufficientStats, allowed_destinations
from ..models.sequences import EventSequence
from .corpus import stats_matrix, validate_states


logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5
DEFAULT_EPSILON = 1e-9
LAMBDA_MAX = 1e4


def _estimate_rates(
    stats: SufficientStats,
    fallback: MrpParams | None,
    lambda_max: float,
) -> np.ndarray:
    n_tau, sum_tau = stats.n_tau, stats.sum_tau
    observed = n_tau > 0
    simultaneous = observed & (sum_tau <= 0)
    if simultaneous.any():
        logger.warning(
            "%d interarrival cells have only simultaneous events; rate clamped to %.0f/month",
            int(simultaneous.sum()),
            lambda_max,
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.where(sum_tau > 0, n_tau / sum_tau, lambda_max)
    rates = np.minimum(rates, lambda_max)

    if fallback is not None:
        default = fallback.rates
    else:
        total_n, total_sum = n_tau.sum(), sum_tau.sum()
        if total_sum > 0:
            global_rate = min(total_n / total_sum, lambda_max)
        else:
            global_rate = lambda_max if total_n > 0 else 1.0
        default = np.full_like(rates, global_rate)
    return np.where(observed, rates, default)


def estimate_mle(
    stats: SufficientStats,
    fallback: MrpParams | None = None,
    alpha: float = DEFAULT_ALPHA,
    lambda_max: float = LAMBDA_MAX,
) -> MrpParams:
    """
    Smoothed maximum-likelihood parameters from sufficient statistics.

    Args:
        stats: Transition counts and interarrival sums
        fallback: Parent/population parameters for cells without observations
        alpha: Additive smoothing per allowed destination
        lambda_max: Upper bound on any interarrival rate (1/month)

    Returns:
        MrpParams with row-stochastic transitions and positive rates
    """
    s = stats.n_states
    allowed = allowed_destinations(s)
    counts = np.where(allowed, stats.transitions + alpha, 0.0)
    totals = counts.sum(axis=1)

    empty = totals <= 0
    if empty.any():
        # rows with neither data nor smoothing mass
        if fallback is not None:
            counts[empty] = fallback.transitions[empty]
        else:
            counts[empty] = allowed[empty].astype(float)
        totals = counts.sum(axis=1)

    transitions = counts / totals[:, None]
    return MrpParams(transitions, _estimate_rates(stats, fallback, lambda_max))


def stats_log_likelihood(
    stats: SufficientStats,
    params: MrpParams,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Log-likelihood of every sequence summarised by `stats` under `params`."""
    return float(stats.to_vector() @ params.log_weights(epsilon))


def sequence_log_likelihood(
    seq: EventSequence,
    params: MrpParams,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """
    Censoring-adjusted log-likelihood of one sequence.

    Includes log P[LC][X_1], every observed transition, log P[X_L][RC] and the
    exponential densities of the interior interarrivals only.
    """
    validate_states([seq], params.n_states)
    row = stats_matrix([seq], params.n_states)[0]
    return float(row @ params.log_weights(epsilon))


def batch_log_likelihood(
    seqs: Sequence[EventSequence],
    params: MrpParams,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Sum of sequence log-likelihoods; 0.0 for an empty collection."""
    seqs = list(seqs)
    if not seqs:
        return 0.0
    validate_states(seqs, params.n_states)
    per_sequence = stats_matrix(seqs, params.n_states) @ params.log_weights(epsilon)
    return float(per_sequence.sum())


def posterior_assign(
    seq: EventSequence,
    profiles: Sequence[MrpParams],
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[int, np.ndarray]:
    """
    Maximum-posterior profile under equal priors.

    Returns:
        Tuple of (chosen index, per-profile log-likelihoods); ties go to the
        lowest index.
    """
    choices, logliks = assign_batch([seq], profiles, epsilon)
    return int(choices[0]), logliks[0]


def assign_batch(
    seqs: Sequence[EventSequence],
    profiles: Sequence[MrpParams],
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised posterior_assign: (choice per sequence, log-likelihood matrix n x K)."""
    if not profiles:
        raise ValueError("at least one profile is required")
    n_states = profiles[0].n_states
    if any(params.n_states != n_states for params in profiles):
        raise ValueError("profiles use different state spaces")
    seqs = list(seqs)
    validate_states(seqs, n_states)
    weights = np.stack([params.log_weights(epsilon) for params in profiles], axis=1)
    logliks = stats_matrix(seqs, n_states) @ weights
    return np.argmax(logliks, axis=1), logliks


def model_size(n_profiles: int, n_states: int) -> int:
    """
    Free parameters of a K-profile model over S states.

    Per profile: S(S+1) - 1 transition parameters and S^2 interarrival rates.
    """
    if n_profiles < 1 or n_states < 1:
        raise ValueError("model size needs K >= 1 and S >= 1")
    k, s = n_profiles, n_states
    return k * (s * (s + 1) - 1) + k * s * s


def bic_score(total_loglik: float, n_profiles: int, n_states: int, n_subjects: int) -> float:
    """Penalised log-likelihood; higher is better."""
    if n_subjects < 1:
        raise ValueError("BIC needs at least one subject")
    return total_loglik - model_size(n_profiles, n_states) * math.log(n_subjects) / 2.0


def membership_loglik(sizes: Sequence[int], n_subjects: int) -> float:
    """
    Log-probability of the profile labels under the empirical proportions,
    sum_k n_k * log(n_k / R). Zero for a single profile.
    """
    if n_subjects < 1:
        raise ValueError("membership term needs at least one subject")
    return float(sum(n * math.log(n / n_subjects) for n in sizes if n > 0))


def partition_bic(
    total_loglik: float,
    sizes: Sequence[int],
    n_states: int,
    n_subjects: int,
    label_cost: bool = True,
) -> float:
    """
    BIC of a K-profile partition with `sizes` members per profile.

    With `label_cost` the members' log-likelihood also pays for the profile
    labels (the classification likelihood with mixing proportions).
    """
    if label_cost:
        total_loglik += membership_loglik(sizes, n_subjects)
    return bic_score(total_loglik, len(sizes), n_states, n_subjects)
