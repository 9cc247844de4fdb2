# careprofiles/core/corpus.py
"""
Sufficient-statistic accumulation over event sequences.

`CorpusStats` keeps one flattened statistics row per subject so that every
profile log-likelihood, split candidate and EM step becomes a matrix product
or a prefix sum over rows.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ..models.params import SufficientStats, stats_vector_size
from ..models.sequences import EventSequence, StateSpace
from .errors import EmptyCorpusError, SequenceValidationError


logger = logging.getLogger(__name__)


def validate_states(seqs: Sequence[EventSequence], n_states: int) -> None:
    for seq in seqs:
        if max(seq.events) >= n_states:
            raise SequenceValidationError(
                seq.subject_id,
                f"state index {max(seq.events)} outside state space of size {n_states}",
            )


def stats_matrix(seqs: Sequence[EventSequence], n_states: int) -> np.ndarray:
    """Per-sequence flattened statistics, shape (len(seqs), stats_vector_size(S))."""
    s = n_states
    width = stats_vector_size(s)
    matrix = np.zeros((len(seqs), width))
    if not seqs:
        return matrix

    lengths = np.fromiter((seq.length for seq in seqs), dtype=np.int64, count=len(seqs))
    events = np.fromiter((e for seq in seqs for e in seq.events), dtype=np.int64, count=int(lengths.sum()))
    times = np.fromiter((t for seq in seqs for t in seq.times), dtype=np.float64, count=int(lengths.sum()))
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    ends = starts + lengths - 1
    rows = np.arange(len(seqs))

    # LC -> first event and last event -> RC, one of each per sequence
    np.add.at(matrix, (rows, s * (s + 1) + events[starts]), 1.0)
    np.add.at(matrix, (rows, events[ends] * (s + 1) + s), 1.0)

    # consecutive pairs that stay inside one sequence
    seq_of_event = np.repeat(rows, lengths)
    pair_pos = np.flatnonzero(np.diff(seq_of_event) == 0)
    src = events[pair_pos]
    dst = events[pair_pos + 1]
    pair_seq = seq_of_event[pair_pos]
    np.add.at(matrix, (pair_seq, src * (s + 1) + dst), 1.0)

    # interarrivals: drop the first and last pair of every sequence (censored)
    pair_rank = pair_pos - starts[pair_seq]
    kept = (pair_rank >= 1) & (pair_rank <= lengths[pair_seq] - 3)
    tau = times[pair_pos + 1] - times[pair_pos]
    n_tau_base = (s + 1) ** 2
    sum_tau_base = n_tau_base + s * s
    cell = src[kept] * s + dst[kept]
    np.add.at(matrix, (pair_seq[kept], n_tau_base + cell), 1.0)
    np.add.at(matrix, (pair_seq[kept], sum_tau_base + cell), tau[kept])
    return matrix


@dataclass(frozen=True, eq=False)
class CorpusStats:
    """Event sequences together with their per-subject statistics rows."""
    space: StateSpace
    sequences: tuple[EventSequence, ...]
    matrix: np.ndarray

    @classmethod
    def build(cls, seqs: Sequence[EventSequence], space: StateSpace) -> "CorpusStats":
        seqs = tuple(seqs)
        validate_states(seqs, space.size)
        ids = [seq.subject_id for seq in seqs]
        duplicates = sorted(subject for subject, count in Counter(ids).items() if count > 1)
        if duplicates:
            raise SequenceValidationError(duplicates[0], "duplicate subject id")
        matrix = stats_matrix(seqs, space.size)
        matrix.setflags(write=False)
        logger.debug("Built statistics for %d sequences over %d states", len(seqs), space.size)
        return cls(space, seqs, matrix)

    def __len__(self) -> int:
        return len(self.sequences)

    @cached_property
    def subject_ids(self) -> np.ndarray:
        return np.array([seq.subject_id for seq in self.sequences])

    @cached_property
    def id_rank(self) -> np.ndarray:
        """Position of each row in subject-id order; breaks distance ties."""
        order = np.argsort(self.subject_ids, kind="stable")
        rank = np.empty(len(order), dtype=np.int64)
        rank[order] = np.arange(len(order))
        return rank

    @cached_property
    def row_of(self) -> dict[str, int]:
        return {seq.subject_id: i for i, seq in enumerate(self.sequences)}

    def rows_for(self, subject_ids) -> np.ndarray:
        """Sorted corpus rows of the given subjects."""
        try:
            rows = [self.row_of[subject] for subject in subject_ids]
        except KeyError as e:
            raise SequenceValidationError(str(e.args[0]), "subject not present in the corpus") from None
        return np.sort(np.array(rows, dtype=np.int64))

    def total(self, indices: np.ndarray | None = None) -> SufficientStats:
        rows = self.matrix if indices is None else self.matrix[indices]
        return SufficientStats.from_vector(self.space.size, rows.sum(axis=0))

    def row(self, index: int) -> SufficientStats:
        return SufficientStats.from_vector(self.space.size, self.matrix[index])

    def transitions_processed(self) -> int:
        """Work accounting: every counted transition, LC and RC included."""
        s = self.space.size
        return int(round(self.matrix[:, : (s + 1) ** 2].sum()))

    def subset(self, indices: np.ndarray) -> "CorpusStats":
        indices = np.asarray(indices, dtype=np.int64)
        matrix = self.matrix[indices]
        matrix.setflags(write=False)
        return CorpusStats(self.space, tuple(self.sequences[i] for i in indices), matrix)


def accumulate_stats(
    seqs: Sequence[EventSequence],
    space: StateSpace,
    threads: int = 1,
    chunk_size: int = 4096,
) -> SufficientStats:
    """
    Sufficient statistics of a collection of sequences.

    With threads > 1 the sequences are split into fixed chunks whose partial
    statistics are combined in chunk order, so the result does not depend on
    scheduling.
    """
    seqs = list(seqs)
    validate_states(seqs, space.size)
    if threads <= 1 or len(seqs) <= chunk_size:
        return SufficientStats.from_vector(space.size, stats_matrix(seqs, space.size).sum(axis=0))

    chunks = [seqs[i:i + chunk_size] for i in range(0, len(seqs), chunk_size)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        partials = list(pool.map(lambda chunk: stats_matrix(chunk, space.size).sum(axis=0), chunks))
    total = SufficientStats.zeros(space.size)
    for partial in partials:
        total = total + SufficientStats.from_vector(space.size, partial)
    return total


def require_nonempty(seqs: Sequence[EventSequence]) -> None:
    if not seqs:
        raise EmptyCorpusError("at least one sequence is required")
