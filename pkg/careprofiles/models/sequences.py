# careprofiles/models/sequences.py
"""
Event alphabet and per-subject event sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..core.errors import SequenceValidationError, UnknownLabelError


DEFAULT_LABELS = ("CL", "ER", "HO", "NP", "PO", "RX")
LC_LABEL = "LC"
RC_LABEL = "RC"


@dataclass(frozen=True)
class StateSpace:
    """
    Ordered event alphabet plus the two virtual censor states.

    Real states occupy indices 0..S-1. Index S is reused for both virtual
    states: as a transition-matrix row it is LC (left censor, virtual source)
    and as a column it is RC (right censor, virtual destination).
    """
    labels: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if not labels:
            raise ValueError("state space needs at least one label")
        if any(not label for label in labels):
            raise ValueError("state labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise ValueError(f"state labels must be unique: {labels}")
        reserved = {LC_LABEL, RC_LABEL} & set(labels)
        if reserved:
            raise ValueError(f"labels {sorted(reserved)} are reserved for censor states")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(labels)})

    @classmethod
    def default(cls) -> "StateSpace":
        return cls(DEFAULT_LABELS)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def lc_index(self) -> int:
        return len(self.labels)

    @property
    def rc_index(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabelError([label]) from None

    def encode(self, labels: Iterable[str]) -> tuple[int, ...]:
        """Map labels to indices, reporting every unknown label at once."""
        labels = list(labels)
        unknown = [label for label in labels if label not in self._index]
        if unknown:
            raise UnknownLabelError(unknown)
        return tuple(self._index[label] for label in labels)

    def row_label(self, i: int) -> str:
        return LC_LABEL if i == self.lc_index else self.labels[i]

    def column_label(self, j: int) -> str:
        return RC_LABEL if j == self.rc_index else self.labels[j]


@dataclass(frozen=True)
class EventSequence:
    """One subject's ordered (event, arrival time) pairs, times in months."""
    subject_id: str
    events: tuple[int, ...]
    times: tuple[float, ...]

    def __post_init__(self) -> None:
        events = tuple(int(e) for e in self.events)
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "times", times)

        if not events:
            raise SequenceValidationError(self.subject_id, "sequence is empty")
        if len(events) != len(times):
            raise SequenceValidationError(
                self.subject_id,
                f"{len(events)} events but {len(times)} arrival times",
            )
        if any(e < 0 for e in events):
            raise SequenceValidationError(self.subject_id, "negative state index")
        if not all(math.isfinite(t) for t in times):
            raise SequenceValidationError(self.subject_id, "non-finite arrival time")
        for earlier, later in zip(times, times[1:]):
            if later < earlier:
                raise SequenceValidationError(
                    self.subject_id,
                    f"arrival times decrease ({earlier} -> {later})",
                )

    @property
    def length(self) -> int:
        return len(self.events)

    @classmethod
    def from_labels(
        cls,
        subject_id: str,
        labels: Sequence[str],
        times: Sequence[float],
        space: StateSpace,
    ) -> "EventSequence":
        return cls(subject_id, space.encode(labels), tuple(times))

    def labels(self, space: StateSpace) -> list[str]:
        return [space.labels[e] for e in self.events]

    def check_window(self, study_months: float) -> None:
        """Reject arrival times outside [0, study_months]."""
        if self.times[0] < 0 or self.times[-1] > study_months:
            raise SequenceValidationError(
                self.subject_id,
                f"arrival times outside the study window [0, {study_months:.4f}] months",
            )
