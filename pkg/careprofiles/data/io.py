# careprofiles/data/io.py
"""
Sequence, label and record file formats.

Readers validate every line and report all problems at once with 1-based
line numbers (CSV line numbers count the header as line 1).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from ..core.errors import InputFormatError, SequenceValidationError, UnknownLabelError
from ..models.sequences import EventSequence, StateSpace
from .records import OPTIONAL_RECORD_COLUMNS, RECORD_COLUMNS, ClaimRecord


logger = logging.getLogger(__name__)


class SequenceLine(BaseModel):
    """One JSON Lines entry of the canonical sequence format."""
    id: str = Field(..., min_length=1)
    events: List[str] = Field(..., min_length=1)
    times_months: List[float] = Field(..., min_length=1)


def _format_validation(e: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
    )


def write_sequences_jsonl(path: str, sequences: Iterable[EventSequence], space: StateSpace) -> int:
    """Write one subject per line; returns the number of lines written."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for seq in sequences:
            line = {"id": seq.subject_id, "events": seq.labels(space), "times_months": list(seq.times)}
            f.write(json.dumps(line) + "\n")
            count += 1
    return count


def read_sequences_jsonl(
    path: str,
    space: StateSpace,
    study_months: Optional[float] = None,
) -> List[EventSequence]:
    """
    Parse a sequence file against a state space.

    With `study_months`, every sequence must also lie inside [0, study_months];
    all subjects outside the window are reported together.

    Raises:
        InputFormatError: malformed JSON, missing fields, invalid sequences or duplicate ids
        UnknownLabelError: every label outside the state space, listed once
    """
    problems: List[Tuple[int, str]] = []
    unknown: set[str] = set()
    parsed: List[Tuple[int, SequenceLine]] = []
    seen: dict[str, int] = {}

    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                line = SequenceLine.model_validate_json(raw)
            except ValidationError as e:
                problems.append((lineno, _format_validation(e)))
                continue
            if line.id in seen:
                problems.append((lineno, f"duplicate id {line.id!r} (first on line {seen[line.id]})"))
                continue
            seen[line.id] = lineno
            unknown.update(label for label in line.events if label not in space.labels)
            parsed.append((lineno, line))

    sequences = []
    if not unknown:
        for lineno, line in parsed:
            try:
                seq = EventSequence.from_labels(line.id, line.events, line.times_months, space)
                if study_months is not None:
                    seq.check_window(study_months)
                sequences.append(seq)
            except SequenceValidationError as e:
                problems.append((lineno, str(e)))

    if problems:
        raise InputFormatError(path, problems)
    if unknown:
        raise UnknownLabelError(sorted(unknown))
    logger.debug("Read %d sequences from %s", len(sequences), path)
    return sequences


def write_labels_csv(path: str, subject_ids: Sequence[str], labels: Sequence[str]) -> None:
    pd.DataFrame({"subject_id": list(subject_ids), "label": list(labels)}).to_csv(path, index=False)


def read_labels_csv(path: str) -> dict[str, str]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = {"subject_id", "label"} - set(frame.columns)
    if missing:
        raise InputFormatError(path, [(1, f"missing columns {sorted(missing)}")])
    return dict(zip(frame["subject_id"], frame["label"]))


def write_records_csv(path: str, records: Iterable[ClaimRecord]) -> int:
    rows = [record.to_row() for record in records]
    columns = list(RECORD_COLUMNS)
    if any("birth_date" in row for row in rows):
        columns += OPTIONAL_RECORD_COLUMNS
    pd.DataFrame(rows, columns=columns).fillna("").to_csv(path, index=False)
    return len(rows)


def read_records_csv(path: str) -> List[ClaimRecord]:
    """Parse a claim CSV; an empty file with only a header yields no records."""
    if not Path(path).exists():
        raise InputFormatError(path, [(0, "file not found")])
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise InputFormatError(path, [(1, "missing header")]) from None
    except pd.errors.ParserError as e:
        raise InputFormatError(path, [(0, str(e))]) from None

    missing = [column for column in RECORD_COLUMNS if column not in frame.columns]
    if missing:
        raise InputFormatError(path, [(1, f"missing columns {missing}")])

    keep = [c for c in RECORD_COLUMNS + OPTIONAL_RECORD_COLUMNS if c in frame.columns]
    records: List[ClaimRecord] = []
    problems: List[Tuple[int, str]] = []
    for offset, row in enumerate(frame[keep].to_dict(orient="records")):
        try:
            records.append(ClaimRecord.model_validate(row))
        except ValidationError as e:
            problems.append((offset + 2, _format_validation(e)))
    if problems:
        raise InputFormatError(path, problems)
    return records


def write_run_comment(handle: TextIO, run: Optional[Dict[str, Any]]) -> None:
    """Leading `# run: {...}` line carrying the effective configuration of tabular artifacts."""
    if run is not None:
        handle.write("# run: " + json.dumps(run, sort_keys=True) + "\n")


def read_run_comment(path: str) -> Optional[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith("# run: "):
        return None
    return json.loads(first[len("# run: "):])
