# careprofiles/models/params.py
"""
Markov renewal process parameters, sufficient statistics and fitted profiles.

Matrix layout (S real states):
- transition matrices are (S+1) x (S+1): rows 0..S-1 are real sources and
  row S is LC; columns 0..S-1 are real destinations and column S is RC.
  The LC -> RC cell is structurally zero.
- rate and interarrival matrices are S x S over real (source, destination).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .sequences import LC_LABEL, RC_LABEL, StateSpace


ROW_SUM_TOLERANCE = 1e-9


def stats_vector_size(n_states: int) -> int:
    """Length of a flattened statistics / log-weight vector."""
    return (n_states + 1) ** 2 + 2 * n_states ** 2


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def allowed_destinations(n_states: int) -> np.ndarray:
    """Boolean mask of transition cells that may carry probability."""
    mask = np.ones((n_states + 1, n_states + 1), dtype=bool)
    mask[n_states, n_states] = False
    return mask


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Counts and interarrival sums that fully determine the MRP likelihood."""
    transitions: np.ndarray
    n_tau: np.ndarray
    sum_tau: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", _frozen(self.transitions, np.float64))
        object.__setattr__(self, "n_tau", _frozen(self.n_tau, np.float64))
        object.__setattr__(self, "sum_tau", _frozen(self.sum_tau, np.float64))
        s = self.n_tau.shape[0]
        if self.transitions.shape != (s + 1, s + 1) or self.sum_tau.shape != (s, s):
            raise ValueError("inconsistent statistics shapes")
        if (self.transitions < 0).any() or (self.n_tau < 0).any() or (self.sum_tau < 0).any():
            raise ValueError("sufficient statistics must be non-negative")

    @classmethod
    def zeros(cls, n_states: int) -> "SufficientStats":
        s = n_states
        return cls(np.zeros((s + 1, s + 1)), np.zeros((s, s)), np.zeros((s, s)))

    @classmethod
    def from_vector(cls, n_states: int, vector: np.ndarray) -> "SufficientStats":
        s = n_states
        t_end = (s + 1) ** 2
        n_end = t_end + s * s
        return cls(
            vector[:t_end].reshape(s + 1, s + 1),
            vector[t_end:n_end].reshape(s, s),
            vector[n_end:].reshape(s, s),
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.transitions.ravel(), self.n_tau.ravel(), self.sum_tau.ravel()])

    @property
    def n_states(self) -> int:
        return self.n_tau.shape[0]

    @property
    def n_trans(self) -> np.ndarray:
        """Counts from real sources to real destinations and RC."""
        return self.transitions[: self.n_states, :]

    @property
    def n_init(self) -> np.ndarray:
        """LC row: number of sequences starting in each state."""
        return self.transitions[self.n_states, : self.n_states]

    @property
    def n_seq(self) -> int:
        return int(round(self.n_init.sum()))

    @property
    def visits(self) -> np.ndarray:
        """Inbound visit volume per real state, LC arrivals included."""
        return self.transitions[:, : self.n_states].sum(axis=0)

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        if other.n_states != self.n_states:
            raise ValueError("cannot combine statistics over different state spaces")
        return SufficientStats(
            self.transitions + other.transitions,
            self.n_tau + other.n_tau,
            self.sum_tau + other.sum_tau,
        )


@dataclass(frozen=True, eq=False)
class MrpParams:
    """One profile's transition probabilities and exponential interarrival rates (1/month)."""
    transitions: np.ndarray
    rates: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", _frozen(self.transitions, np.float64))
        object.__setattr__(self, "rates", _frozen(self.rates, np.float64))
        s = self.rates.shape[0]
        p = self.transitions
        if p.shape != (s + 1, s + 1) or self.rates.shape != (s, s):
            raise ValueError("inconsistent parameter shapes")
        if (p < 0).any() or (p > 1).any():
            raise ValueError("transition probabilities must lie in [0, 1]")
        if p[s, s] != 0:
            raise ValueError("LC -> RC transition is not allowed")
        row_sums = p.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > ROW_SUM_TOLERANCE:
            raise ValueError(f"transition rows must sum to 1, got {row_sums.tolist()}")
        if not np.isfinite(self.rates).all() or (self.rates <= 0).any():
            raise ValueError("interarrival rates must be positive and finite")

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    @property
    def mean_interarrival(self) -> np.ndarray:
        """Mean interarrival months per real (source, destination) pair."""
        return 1.0 / self.rates

    def log_weights(self, epsilon: float = 1e-9) -> np.ndarray:
        """
        Coefficients that turn a flattened statistics vector into a log-likelihood.

        The MRP log-likelihood is linear in the sufficient statistics:
        sum(n_ij log P_ij) + sum(n_tau_ij log lambda_ij - lambda_ij sum_tau_ij).
        """
        log_p = np.log(np.maximum(self.transitions, epsilon))
        log_p[self.n_states, self.n_states] = 0.0
        return np.concatenate([log_p.ravel(), np.log(self.rates).ravel(), -self.rates.ravel()])

    def expected_visits(self) -> np.ndarray:
        """Expected number of visits to each real state over one sequence."""
        s = self.n_states
        q = self.transitions[:s, :s]
        initial = self.transitions[s, :s]
        # Fundamental matrix of the absorbing chain: initial @ (I - Q)^-1
        return np.linalg.solve((np.eye(s) - q).T, initial)

    @classmethod
    def from_labeled(
        cls,
        space: StateSpace,
        initial: Mapping[str, float],
        transitions: Mapping[str, Mapping[str, float]],
        mean_interarrival: Mapping[str, Mapping[str, float]] | None = None,
        default_mean_interarrival: float = 1.0,
    ) -> "MrpParams":
        """
        Build parameters from label-keyed mappings.

        Rows missing from `transitions` exit immediately to RC; unlisted
        interarrival cells use `default_mean_interarrival` months.
        """
        s = space.size
        p = np.zeros((s + 1, s + 1))
        for label, prob in initial.items():
            p[s, space.index(label)] = prob
        for label in space.labels:
            row = transitions.get(label)
            if not row:
                p[space.index(label), s] = 1.0
                continue
            for dst, prob in row.items():
                j = s if dst == RC_LABEL else space.index(dst)
                p[space.index(label), j] = prob

        rates = np.full((s, s), 1.0 / default_mean_interarrival)
        for src, row in (mean_interarrival or {}).items():
            for dst, months in row.items():
                rates[space.index(src), space.index(dst)] = 1.0 / months
        return cls(p, rates)

    def to_labeled(self, space: StateSpace) -> dict:
        """Label-keyed view used by fit reports."""
        s = self.n_states
        transitions = {
            space.row_label(i): {
                space.column_label(j): float(self.transitions[i, j])
                for j in range(s + 1)
                if not (i == s and j == s)
            }
            for i in list(range(s)) + [s]
        }
        mean_interarrival = {
            space.labels[i]: {space.labels[j]: float(1.0 / self.rates[i, j]) for j in range(s)}
            for i in range(s)
        }
        return {"transitions": transitions, "mean_interarrival_months": mean_interarrival}

    @classmethod
    def from_report(cls, space: StateSpace, payload: Mapping) -> "MrpParams":
        """Inverse of `to_labeled`."""
        rows = payload["transitions"]
        return cls.from_labeled(
            space,
            initial=rows[LC_LABEL],
            transitions={label: rows[label] for label in space.labels},
            mean_interarrival=payload["mean_interarrival_months"],
        )


@dataclass(frozen=True, eq=False)
class ProfileModel:
    """A fitted profile: parameters, member statistics and member log-likelihood."""
    params: MrpParams
    stats: SufficientStats
    members: tuple[str, ...]
    loglik: float

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a profile needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def size(self) -> int:
        return len(self.members)
