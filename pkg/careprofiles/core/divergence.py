# careprofiles/core/divergence.py
"""
Kullback-Leibler distances between transition distributions.

The transition distribution out of a state is a mixture over destinations,
each destination carrying an exponential interarrival law. Two such mixtures
share the destination label as component index, so their divergence
decomposes into a categorical term plus probability-weighted exponential
terms (RC carries no interarrival).
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..models.params import MrpParams, allowed_destinations, stats_vector_size
from .estimation import DEFAULT_ALPHA, DEFAULT_EPSILON, LAMBDA_MAX


def kl_exponential(rate_a, rate_b):
    """KL(Exp(rate_a) || Exp(rate_b)) = log(a/b) + b/a - 1; works elementwise."""
    rate_a = np.asarray(rate_a, dtype=float)
    rate_b = np.asarray(rate_b, dtype=float)
    if (rate_a <= 0).any() or (rate_b <= 0).any():
        raise ValueError("exponential rates must be positive")
    value = np.log(rate_a / rate_b) + rate_b / rate_a - 1.0
    # clip round-off just below zero
    value = np.maximum(value, 0.0)
    return float(value) if value.ndim == 0 else value


def _kl_rows(
    p_a: np.ndarray,
    rates_a: np.ndarray,
    p_b: np.ndarray,
    rates_b: np.ndarray,
    epsilon: float,
) -> np.ndarray:
    """Row-wise divergence for real source states; leading axes of the `a` side broadcast."""
    s = rates_b.shape[-1]
    p_a = p_a[..., :s, :]
    p_b = np.maximum(p_b[..., :s, :], epsilon)

    rate_terms = np.zeros(p_a.shape)
    rate_terms[..., :s] = kl_exponential(rates_a, np.broadcast_to(rates_b, rates_a.shape))

    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p_a * (np.log(p_a / p_b) + rate_terms)
    terms = np.where(p_a > 0, terms, 0.0)
    return terms.sum(axis=-1)


def kl_transition_distribution(
    state: int,
    params_a: MrpParams,
    params_b: MrpParams,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Divergence of the transition distribution out of `state` under a versus b."""
    if not 0 <= state < params_a.n_states:
        raise ValueError(f"state {state} is not a real state")
    rows = _kl_rows(
        params_a.transitions, params_a.rates, params_b.transitions, params_b.rates, epsilon
    )
    return float(rows[state])


def average_kl(
    seq_params: MrpParams,
    profile_params: MrpParams,
    active_states: Iterable[int],
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Mean divergence over the states a sequence actually leaves; 0 when there are none."""
    active = sorted(set(active_states))
    if not active:
        return 0.0
    rows = _kl_rows(
        seq_params.transitions, seq_params.rates, profile_params.transitions, profile_params.rates, epsilon
    )
    return float(rows[active].mean())


def sequence_distances(
    matrix: np.ndarray,
    profile: MrpParams,
    alpha: float = DEFAULT_ALPHA,
    lambda_max: float = LAMBDA_MAX,
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """
    Average KL distance of every sequence's own MLE from a profile.

    `matrix` holds one flattened statistics row per sequence. Each row is
    turned into smoothed per-sequence parameters (profile rates fill cells the
    sequence never observes) without materialising MrpParams objects.
    """
    s = profile.n_states
    n = matrix.shape[0]
    if matrix.shape[1] != stats_vector_size(s):
        raise ValueError("statistics rows do not match the profile's state space")
    if n == 0:
        return np.zeros(0)

    t_end = (s + 1) ** 2
    counts = matrix[:, :t_end].reshape(n, s + 1, s + 1)
    n_tau = matrix[:, t_end:t_end + s * s].reshape(n, s, s)
    sum_tau = matrix[:, t_end + s * s:].reshape(n, s, s)

    allowed = allowed_destinations(s)
    smoothed = np.where(allowed, counts + alpha, 0.0)
    totals = smoothed.sum(axis=-1, keepdims=True)
    empty = np.broadcast_to(totals <= 0, smoothed.shape)
    smoothed = np.where(empty, np.broadcast_to(profile.transitions, smoothed.shape), smoothed)
    seq_p = smoothed / smoothed.sum(axis=-1, keepdims=True)

    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.where(sum_tau > 0, n_tau / sum_tau, lambda_max)
    rates = np.minimum(rates, lambda_max)
    seq_rates = np.where(n_tau > 0, rates, profile.rates)

    kl = _kl_rows(seq_p, seq_rates, profile.transitions, profile.rates, epsilon)
    active = counts[:, :s, :].sum(axis=-1) > 0
    n_active = active.sum(axis=1)
    totals = np.where(active, kl, 0.0).sum(axis=1)
    return np.where(n_active > 0, totals / np.maximum(n_active, 1), 0.0)
