# careprofiles/data/synthetic_data.py
"""
Synthetic data generator for planted MRP mixtures.

Produces event sequences with ground-truth profile labels, and claim records
that translate back into exactly those sequences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..core.errors import ConfigError, UnknownLabelError
from ..models.config import GeneratorProfile, GeneratorSpec, MappingConfig
from ..models.params import MrpParams
from ..models.sequences import EventSequence, StateSpace
from ..utils.time_helpers import (
    DAYS_PER_MONTH,
    day_offset,
    days_to_months,
    months_to_days,
    offset_to_date,
    study_length_months,
)
from .records import ClaimRecord


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecordNoise:
    """Per-record injection rates for off-allowlist copies and exact duplicates."""
    off_allowlist_rate: float = 0.0
    duplicate_rate: float = 0.0


@dataclass(frozen=True)
class SimulatedRecords:
    records: List[ClaimRecord]
    sequences: List[EventSequence]
    labels: List[str]
    injected: Dict[str, int]


class MixtureSimulator:
    """
    Draws subjects from a planted mixture of Markov renewal processes.

    Each subject picks a profile by weight, starts uniformly within the first
    `first_event_window_months`, then walks the embedded chain until it draws
    RC, reaches `max_events` or passes the study end.
    """

    def __init__(self, spec: GeneratorSpec, seed: Optional[int] = None):
        """
        Args:
            spec: Planted mixture
            seed: Overrides spec.seed when given
        """
        self.spec = spec
        self.seed = spec.seed if seed is None else seed
        self.space = StateSpace(tuple(spec.labels))
        self.names = [profile.name for profile in spec.profiles]
        self.params = [self._profile_params(profile) for profile in spec.profiles]
        self.study_months = study_length_months(spec.study_start, spec.study_end)
        self.study_days = day_offset(spec.study_end, spec.study_start)

    def _profile_params(self, profile: GeneratorProfile) -> MrpParams:
        try:
            return MrpParams.from_labeled(
                self.space,
                profile.initial,
                profile.transitions,
                profile.mean_interarrival_months,
                profile.default_mean_interarrival_months,
            )
        except (ValueError, UnknownLabelError) as e:
            raise ConfigError(f"generator profile {profile.name!r}: {e}") from e

    @property
    def planted(self) -> Dict[str, MrpParams]:
        return dict(zip(self.names, self.params))

    def subject_ids(self, n_subjects: int) -> List[str]:
        width = max(6, len(str(n_subjects)))
        return [f"S{i:0{width}d}" for i in range(1, n_subjects + 1)]

    def _walk(self, rng: np.random.Generator, params: MrpParams, cumulative: np.ndarray) -> Tuple[List[int], List[float]]:
        s = params.n_states
        spec = self.spec
        state = min(int(np.searchsorted(cumulative[s], rng.random(), side="right")), s - 1)

        if spec.day_resolution:
            window = min(months_to_days(spec.first_event_window_months), self.study_days)
            day = int(rng.integers(0, window + 1))
            events, times = [state], [days_to_months(day)]
        else:
            t = float(rng.uniform(0.0, min(spec.first_event_window_months, self.study_months)))
            events, times = [state], [t]

        while spec.max_events is None or len(events) < spec.max_events:
            nxt = min(int(np.searchsorted(cumulative[state], rng.random(), side="right")), s)
            if nxt == s:
                break
            tau = rng.exponential(1.0 / params.rates[state, nxt])
            if spec.day_resolution:
                day += max(1, int(round(tau * DAYS_PER_MONTH)))
                if day > self.study_days:
                    break
                arrival = days_to_months(day)
            else:
                arrival = times[-1] + tau
                if arrival > self.study_months:
                    break
            state = nxt
            events.append(state)
            times.append(arrival)
        return events, times

    def simulate_mixture(self, n_subjects: int, progress: bool = False) -> Tuple[List[EventSequence], List[str]]:
        """
        Simulate `n_subjects` sequences.

        Returns:
            Tuple of (sequences, planted profile name per sequence); identical
            for identical (spec, seed, n_subjects)
        """
        rng = np.random.default_rng(self.seed)
        weights = np.array([p.weight for p in self.spec.profiles])
        choices = rng.choice(len(self.params), size=n_subjects, p=weights / weights.sum())
        cumulative = [np.cumsum(params.transitions, axis=1) for params in self.params]

        sequences, labels = [], []
        ids = self.subject_ids(n_subjects)
        for subject, k in tqdm(
            zip(ids, choices), total=n_subjects, desc="Simulating", disable=not progress
        ):
            events, times = self._walk(rng, self.params[k], cumulative[k])
            sequences.append(EventSequence(subject, tuple(events), tuple(times)))
            labels.append(self.names[k])

        logger.debug("Simulated %d subjects from %d profiles (seed=%d)", n_subjects, len(self.params), self.seed)
        return sequences, labels

    def _templates(self, mapping: MappingConfig) -> Dict[str, dict]:
        """One representative claim per label: the first rule targeting it, RX via the drug allowlist."""
        templates: Dict[str, dict] = {}
        diagnosis = mapping.diagnosis_allowlist[0]
        for rule in mapping.event_map:
            if rule.label not in templates:
                templates[rule.label] = {
                    "record_kind": rule.record_kind,
                    "place_code": rule.place_codes[0] if rule.place_codes else "",
                    "type_code": rule.type_codes[0] if rule.type_codes else "",
                    "diagnosis_code": diagnosis,
                }
        templates[mapping.rx_label] = {"record_kind": "RX", "drug_code": mapping.rx_drug_allowlist[0]}
        missing = [label for label in self.space.labels if label not in templates]
        if missing:
            raise ConfigError(f"mapping cannot produce labels {missing}")
        return templates

    @staticmethod
    def _off_code(allowed: List[str], prefix_match: bool) -> str:
        for i in range(1000):
            code = f"ZZ{i:03d}"
            hit = any(code.startswith(p) for p in allowed) if prefix_match else code in allowed
            if not hit:
                return code
        raise ConfigError("could not find a code outside the allowlist")

    def simulate_records(
        self,
        n_subjects: int,
        mapping: MappingConfig,
        noise: RecordNoise = RecordNoise(),
    ) -> SimulatedRecords:
        """
        Simulate sequences and emit the claim records that produce them.

        Off-allowlist noise adds a copy of a record with a diagnosis (or drug)
        code outside the allowlist; duplicate noise adds an exact copy.
        """
        if not self.spec.day_resolution:
            raise ConfigError("record simulation needs day_resolution arrival times")
        if (mapping.study_start, mapping.study_end) != (self.spec.study_start, self.spec.study_end):
            raise ConfigError("mapping and generator study windows differ")
        if tuple(mapping.labels) != self.space.labels:
            raise ConfigError("mapping and generator label sets differ")

        sequences, labels = self.simulate_mixture(n_subjects)
        templates = self._templates(mapping)
        off_diagnosis = self._off_code(mapping.diagnosis_allowlist, prefix_match=True)
        off_drug = self._off_code(mapping.rx_drug_allowlist, prefix_match=False)
        noise_rng = np.random.default_rng([self.seed, 1])

        records: List[ClaimRecord] = []
        injected = {"off_allowlist": 0, "duplicate": 0}
        for seq in sequences:
            for event, months in zip(seq.events, seq.times):
                day = months_to_days(months)
                record = ClaimRecord(
                    subject_id=seq.subject_id,
                    service_date=offset_to_date(self.spec.study_start, day),
                    **templates[self.space.labels[event]],
                )
                records.append(record)
                if noise.duplicate_rate and noise_rng.random() < noise.duplicate_rate:
                    records.append(record.model_copy())
                    injected["duplicate"] += 1
                if noise.off_allowlist_rate and noise_rng.random() < noise.off_allowlist_rate:
                    column = "drug_code" if record.record_kind == "RX" else "diagnosis_code"
                    code = off_drug if record.record_kind == "RX" else off_diagnosis
                    records.append(record.model_copy(update={column: code}))
                    injected["off_allowlist"] += 1

        logger.info(
            "Simulated %d records for %d subjects (injected %s)", len(records), n_subjects, injected
        )
        return SimulatedRecords(records, sequences, labels, injected)


def _profile(name, weight, initial, transitions, mean_interarrival=None, default_mean=2.0) -> GeneratorProfile:
    return GeneratorProfile(
        name=name,
        weight=weight,
        initial=initial,
        transitions=transitions,
        mean_interarrival_months=mean_interarrival or {},
        default_mean_interarrival_months=default_mean,
    )


def two_profile_spec(seed: int = 42) -> GeneratorSpec:
    """Majority refill-driven profile and a minority office/ER profile."""
    return GeneratorSpec(
        profiles=[
            _profile(
                "rx_maintenance", 0.6,
                initial={"RX": 0.99, "PO": 0.01},
                transitions={
                    "RX": {"RX": 0.85, "PO": 0.05, "RC": 0.1},
                    "PO": {"RX": 0.85, "PO": 0.05, "RC": 0.1},
                },
                mean_interarrival={"RX": {"RX": 1.0}},
                default_mean=1.5,
            ),
            _profile(
                "office_er", 0.4,
                initial={"PO": 0.99, "RX": 0.01},
                transitions={
                    "PO": {"PO": 0.6, "ER": 0.15, "RX": 0.15, "RC": 0.1},
                    "RX": {"PO": 0.8, "RX": 0.1, "RC": 0.1},
                    "ER": {"PO": 0.8, "RC": 0.2},
                },
                default_mean=1.5,
            ),
        ],
        seed=seed,
    )


def four_profile_spec(seed: int = 42) -> GeneratorSpec:
    """Refill-heavy, office plus refill, clinic/ER-touched and high-variation acute profiles."""
    return GeneratorSpec(
        profiles=[
            _profile(
                "rx_heavy", 0.3,
                initial={"RX": 0.98, "PO": 0.02},
                transitions={
                    "RX": {"RX": 0.85, "PO": 0.05, "RC": 0.1},
                    "PO": {"RX": 0.85, "RC": 0.15},
                },
                mean_interarrival={"RX": {"RX": 1.0}},
                default_mean=1.5,
            ),
            _profile(
                "po_rx", 0.3,
                initial={"PO": 0.98, "RX": 0.02},
                transitions={
                    "PO": {"RX": 0.75, "PO": 0.15, "RC": 0.1},
                    "RX": {"PO": 0.85, "RX": 0.05, "RC": 0.1},
                },
                default_mean=1.5,
            ),
            _profile(
                "clinic_er", 0.2,
                initial={"CL": 0.98, "ER": 0.02},
                transitions={
                    "CL": {"CL": 0.6, "ER": 0.2, "RX": 0.1, "RC": 0.1},
                    "ER": {"CL": 0.8, "RC": 0.2},
                    "RX": {"CL": 0.85, "RC": 0.15},
                },
                default_mean=1.5,
            ),
            _profile(
                "acute", 0.2,
                initial={"ER": 0.5, "HO": 0.5},
                transitions={
                    "ER": {"HO": 0.45, "ER": 0.2, "NP": 0.2, "RC": 0.15},
                    "HO": {"ER": 0.55, "HO": 0.2, "NP": 0.1, "RC": 0.15},
                    "NP": {"ER": 0.5, "HO": 0.35, "RC": 0.15},
                },
                mean_interarrival={"ER": {"HO": 0.5}},
                default_mean=1.0,
            ),
        ],
        seed=seed,
    )
