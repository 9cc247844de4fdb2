# careprofiles/data/records.py
"""
Claim records and their translation into event sequences.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from datetime import date
from typing import Any, Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from ..models.config import MappingConfig, RecordKind
from ..models.sequences import EventSequence, StateSpace
from ..utils.time_helpers import age_in_years, day_offset, days_to_months


logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "subject_id", "service_date", "record_kind", "place_code",
    "type_code", "diagnosis_code", "drug_code",
]
OPTIONAL_RECORD_COLUMNS = ["birth_date", "eligible_years"]

DROP_REASONS = ("out_of_window", "ineligible", "age", "off_allowlist", "unmapped", "duplicate")


class ClaimRecord(BaseModel):
    """One claim line: a dated service of a given kind for one subject."""
    subject_id: str = Field(..., min_length=1, description="Subject identifier")
    service_date: date = Field(..., description="Date of service")
    record_kind: RecordKind = Field(..., description="IP, OT or RX file")
    place_code: str = Field(default="", description="Place-of-service code")
    type_code: str = Field(default="", description="Type-of-service code")
    diagnosis_code: str = Field(default="", description="Primary diagnosis code")
    drug_code: str = Field(default="", description="Drug code (RX only)")
    birth_date: Optional[date] = Field(default=None, description="Enables the age filter when present")
    eligible_years: Optional[int] = Field(default=None, ge=0, description="Enables the eligibility filter when present")

    @field_validator("birth_date", "eligible_years", mode="before")
    @classmethod
    def blank_to_none(cls, v):
        return None if v == "" else v

    def to_row(self) -> Dict[str, str]:
        row = {
            "subject_id": self.subject_id,
            "service_date": self.service_date.isoformat(),
            "record_kind": self.record_kind,
            "place_code": self.place_code,
            "type_code": self.type_code,
            "diagnosis_code": self.diagnosis_code,
            "drug_code": self.drug_code,
        }
        if self.birth_date is not None or self.eligible_years is not None:
            row["birth_date"] = self.birth_date.isoformat() if self.birth_date else ""
            row["eligible_years"] = "" if self.eligible_years is None else str(self.eligible_years)
        return row


class DropReport(BaseModel):
    """Where every input record went."""
    records_in: int = 0
    records_mapped: int = 0
    records_dropped: int = 0
    subjects: int = 0
    dropped: Dict[str, int] = Field(default_factory=lambda: {reason: 0 for reason in DROP_REASONS})

    def drop(self, reason: str) -> None:
        self.dropped[reason] += 1
        self.records_dropped += 1

    def merge(self, other: "DropReport") -> "DropReport":
        return DropReport(
            records_in=self.records_in + other.records_in,
            records_mapped=self.records_mapped + other.records_mapped,
            records_dropped=self.records_dropped + other.records_dropped,
            subjects=self.subjects + other.subjects,
            dropped={r: self.dropped.get(r, 0) + other.dropped.get(r, 0) for r in DROP_REASONS},
        )

    def to_dict(self) -> dict:
        return self.model_dump()

    def save_to_json(self, filepath: str, run: Optional[Dict[str, Any]] = None) -> None:
        """Save the counts, led by a `run` block with the effective configuration when given."""
        payload = self.to_dict() if run is None else {"run": run, **self.to_dict()}
        with open(filepath, "w") as f:
            json.dump(payload, f, indent=2)


class ClaimTranslator:
    """
    Turn claim records into per-subject event sequences.

    Filters run in a fixed order (window, eligibility, age, allowlist, event
    map) and the first failing filter names the drop reason. Records mapping
    to the same (subject, label, date) collapse to one event; distinct labels
    on one date are ordered by `same_day_priority`.
    """

    def __init__(self, mapping: MappingConfig):
        self.mapping = mapping
        self.space = StateSpace(tuple(mapping.labels))
        self._priority = {label: i for i, label in enumerate(mapping.same_day_priority)}

    def _label(self, record: ClaimRecord) -> Tuple[Optional[str], Optional[str]]:
        """(label, None) for a kept record, (None, reason) for a dropped one."""
        m = self.mapping
        if not m.study_start <= record.service_date <= m.study_end:
            return None, "out_of_window"
        if record.eligible_years is not None and record.eligible_years < m.min_eligible_years:
            return None, "ineligible"
        if record.birth_date is not None:
            age = age_in_years(record.birth_date, record.service_date)
            if not m.min_age <= age <= m.max_age:
                return None, "age"

        if record.record_kind == "RX":
            if record.drug_code not in m.rx_drug_allowlist:
                return None, "off_allowlist"
            return m.rx_label, None

        if not any(record.diagnosis_code.startswith(prefix) for prefix in m.diagnosis_allowlist):
            return None, "off_allowlist"
        label = m.label_for(record.record_kind, record.place_code, record.type_code)
        if label is None:
            return None, "unmapped"
        return label, None

    def _order_key(self, item: Tuple[int, str]) -> Tuple[int, int, str]:
        day, label = item
        return day, self._priority.get(label, len(self._priority)), label

    def translate(self, records: Iterable[ClaimRecord]) -> Tuple[List[EventSequence], DropReport]:
        report = DropReport()
        events: Dict[str, set] = defaultdict(set)
        for record in records:
            report.records_in += 1
            label, reason = self._label(record)
            if label is None:
                report.drop(reason)
                continue
            key = (day_offset(record.service_date, self.mapping.study_start), label)
            if key in events[record.subject_id]:
                report.drop("duplicate")
                continue
            events[record.subject_id].add(key)
            report.records_mapped += 1

        sequences = []
        for subject in sorted(events):
            items = sorted(events[subject], key=self._order_key)
            sequences.append(
                EventSequence.from_labels(
                    subject,
                    [label for _, label in items],
                    [days_to_months(day) for day, _ in items],
                    self.space,
                )
            )
        report.subjects = len(sequences)

        reasons = {r: n for r, n in sorted(report.dropped.items()) if n}
        logger.info(
            "Translated %d records: mapped=%d dropped=%d subjects=%d %s",
            report.records_in, report.records_mapped, report.records_dropped, report.subjects,
            reasons,
        )
        return sequences, report


def translate(records: Iterable[ClaimRecord], mapping: MappingConfig) -> Tuple[List[EventSequence], DropReport]:
    return ClaimTranslator(mapping).translate(records)
