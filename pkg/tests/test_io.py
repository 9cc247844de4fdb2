import json

import pytest

from careprofiles.core.errors import InputFormatError, UnknownLabelError
from careprofiles.data.io import (
    read_labels_csv,
    read_records_csv,
    read_run_comment,
    read_sequences_jsonl,
    write_labels_csv,
    write_records_csv,
    write_run_comment,
    write_sequences_jsonl,
)
from careprofiles.data.records import ClaimRecord


def write_lines(path, payloads):
    path.write_text("".join((p if isinstance(p, str) else json.dumps(p)) + "\n" for p in payloads))
    return str(path)


def test_sequences_survive_a_file_round_trip(tmp_path, worked_sequence, space):
    path = str(tmp_path / "sequences.jsonl")
    assert write_sequences_jsonl(path, [worked_sequence], space) == 1
    assert read_sequences_jsonl(path, space) == [worked_sequence]


def test_malformed_lines_are_reported_with_line_numbers(tmp_path, space):
    path = write_lines(
        tmp_path / "bad.jsonl",
        [
            {"id": "S1", "events": ["RX"], "times_months": [0.0]},
            "{not json",
            {"id": "S3", "events": ["RX", "PO"], "times_months": [2.0, 1.0]},
            {"id": "S1", "events": ["PO"], "times_months": [0.0]},
            {"id": "S5", "events": []},
        ],
    )

    with pytest.raises(InputFormatError) as excinfo:
        read_sequences_jsonl(path, space)

    lines = [line for line, _ in excinfo.value.problems]
    assert lines == [2, 4, 5, 3]
    assert "decrease" in str(excinfo.value)
    assert "duplicate id" in str(excinfo.value)


def test_unknown_labels_are_listed_once(tmp_path, space):
    path = write_lines(
        tmp_path / "labels.jsonl",
        [
            {"id": "S1", "events": ["RX", "ZZ"], "times_months": [0.0, 1.0]},
            {"id": "S2", "events": ["AA", "ZZ"], "times_months": [0.0, 1.0]},
        ],
    )
    with pytest.raises(UnknownLabelError) as excinfo:
        read_sequences_jsonl(path, space)
    assert excinfo.value.labels == ["AA", "ZZ"]


def test_blank_lines_are_skipped(tmp_path, space):
    path = write_lines(tmp_path / "gaps.jsonl", ["", {"id": "S1", "events": ["ER"], "times_months": [3.0]}, "  "])
    assert [seq.subject_id for seq in read_sequences_jsonl(path, space)] == ["S1"]


def test_every_sequence_outside_the_window_is_reported(tmp_path, space):
    path = write_lines(
        tmp_path / "window.jsonl",
        [
            {"id": "S1", "events": ["RX"], "times_months": [-1.0]},
            {"id": "S2", "events": ["RX", "PO"], "times_months": [10.0, 20.0]},
            {"id": "S3", "events": ["RX", "PO"], "times_months": [50.0, 60.5]},
        ],
    )
    assert len(read_sequences_jsonl(path, space)) == 3

    with pytest.raises(InputFormatError) as excinfo:
        read_sequences_jsonl(path, space, study_months=60.0)

    assert [line for line, _ in excinfo.value.problems] == [1, 3]
    assert "subject S1" in str(excinfo.value)
    assert "subject S3" in str(excinfo.value)
    assert "S2" not in str(excinfo.value)


def test_run_comment_leads_tabular_files(tmp_path):
    path = tmp_path / "table.csv"
    with open(path, "w") as f:
        write_run_comment(f, {"subcommand": "fit", "app": {"seed": 9}})
        f.write("a,b\n1,2\n")

    assert path.read_text().startswith("# run: ")
    assert read_run_comment(str(path)) == {"subcommand": "fit", "app": {"seed": 9}}

    plain = tmp_path / "plain.csv"
    plain.write_text("a,b\n")
    assert read_run_comment(str(plain)) is None


def test_labels_csv(tmp_path):
    path = str(tmp_path / "labels.csv")
    write_labels_csv(path, ["S1", "S2"], ["a", "b"])
    assert read_labels_csv(path) == {"S1": "a", "S2": "b"}


def test_records_csv_keeps_leading_zeros(tmp_path):
    records = [
        ClaimRecord(subject_id="S1", service_date="2006-01-05", record_kind="RX", drug_code="00173068220"),
        ClaimRecord(subject_id="S1", service_date="2006-02-05", record_kind="OT", place_code="23",
                    diagnosis_code="49390", birth_date="1999-04-01", eligible_years=5),
    ]
    path = str(tmp_path / "records.csv")
    assert write_records_csv(path, records) == 2
    assert read_records_csv(path) == records


def test_records_csv_missing_columns(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text("subject_id,service_date\nS1,2006-01-01\n")
    with pytest.raises(InputFormatError, match="missing columns"):
        read_records_csv(str(path))


def test_records_csv_bad_rows(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text(
        "subject_id,service_date,record_kind,place_code,type_code,diagnosis_code,drug_code\n"
        "S1,2006-01-01,OT,23,,49390,\n"
        "S2,not-a-date,XX,,,,\n"
    )
    with pytest.raises(InputFormatError) as excinfo:
        read_records_csv(str(path))
    assert [line for line, _ in excinfo.value.problems] == [3]
