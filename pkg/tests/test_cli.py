import json

import pandas as pd
import pytest
from click.testing import CliRunner
from sklearn.metrics import adjusted_rand_score

from careprofiles.cli import cli
from careprofiles.data.io import read_labels_csv, read_run_comment
from careprofiles.data.records import RECORD_COLUMNS
from tests.conftest import FIXTURES, TEMPLATES


MAPPING = str(TEMPLATES / "mapping.json")
TWO_PROFILES = FIXTURES / "two_profiles.jsonl"
TWO_PROFILE_LABELS = FIXTURES / "two_profiles_labels.csv"


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def simulated(runner, tmp_path):
    """Sequences for 300 subjects of the built-in two-profile design."""
    out = tmp_path / "sim"
    result = runner.invoke(cli, ["simulate", "--design", "two", "--subjects", "300", "--seed", "11", "-o", str(out)])
    assert result.exit_code == 0, result.stderr
    return out


@pytest.fixture
def fitted(runner, tmp_path):
    out = tmp_path / "fit"
    result = fit(runner, TWO_PROFILES, out, "--seed", "7")
    assert result.exit_code == 0, result.stderr
    return out, result


def fit(runner, sequences, out, *extra):
    return runner.invoke(cli, ["fit", "-i", str(sequences), "-o", str(out), *extra])


def test_simulate_writes_sequences_and_labels(simulated):
    lines = (simulated / "sequences.jsonl").read_text().splitlines()
    assert len(lines) == 300
    first = json.loads(lines[0])
    assert set(first) == {"id", "events", "times_months"}
    assert set(first["events"]) <= {"RX", "PO", "ER"}
    labels = (simulated / "labels.csv").read_text().splitlines()
    assert labels[0] == "subject_id,label"
    assert len(labels) == 301
    assert {line.split(",")[1] for line in labels[1:]} == {"rx_maintenance", "office_er"}
    meta = json.loads((simulated / "simulation.json").read_text())
    assert meta["run"]["subcommand"] == "simulate"
    assert meta["run"]["app"]["seed"] == 11


def test_fit_finds_two_profiles_in_fixture(fitted):
    out, result = fitted
    report = json.loads((out / "fit_report.json").read_text())
    assert report["schema_version"] == "careprofiles/fit-report/v1"
    assert report["n_profiles"] == 2
    assert report["n_subjects"] == 1000
    assert report["seed"] == 7
    for name in ("profile_P1.dot", "profile_P2.dot", "volumes.csv", "summary.txt"):
        assert (out / name).exists()
    assert not (out / "profile_P3.dot").exists()
    assert (out / "profile_P1.dot").read_text().startswith("// P1 coverage=")
    assert "Fitted 2 profiles" in result.output


def test_assign_agrees_with_fixture_labels(runner, fitted):
    out, _ = fitted
    result = runner.invoke(cli, ["assign", "-i", str(TWO_PROFILES), "-r", str(out / "fit_report.json"), "-o", str(out)])
    assert result.exit_code == 0, result.stderr

    assigned = pd.read_csv(out / "assignments.tsv", sep="\t", comment="#")
    assert list(assigned.columns) == ["subject_id", "profile", "ll_P1", "ll_P2"]
    truth = read_labels_csv(str(TWO_PROFILE_LABELS))
    ari = adjusted_rand_score([truth[s] for s in assigned["subject_id"]], assigned["profile"])
    assert ari >= 0.95


def test_fit_artifacts_carry_seed_and_config(runner, fitted):
    out, _ = fitted
    run = read_run_comment(str(out / "volumes.csv"))
    assert run["subcommand"] == "fit"
    assert run["app"]["seed"] == 7
    assert run["app"]["clustering"]["label_cost"] is True
    volumes = pd.read_csv(out / "volumes.csv", comment="#")
    assert len(volumes) > 0

    assert "seed: 7" in (out / "summary.txt").read_text()
    assert "seed=7" in (out / "profile_P1.dot").read_text()

    result = runner.invoke(cli, ["assign", "-i", str(TWO_PROFILES), "-r", str(out / "fit_report.json"), "-o", str(out)])
    assert result.exit_code == 0, result.stderr
    run = read_run_comment(str(out / "assignments.tsv"))
    assert run["subcommand"] == "assign"
    assert run["report_seed"] == 7
    assert (out / "assignments.tsv").read_text().splitlines()[1] == "subject_id\tprofile\tll_P1\tll_P2"


def test_fit_is_byte_stable(runner, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert fit(runner, TWO_PROFILES, first).exit_code == 0
    assert fit(runner, TWO_PROFILES, second).exit_code == 0
    for name in ("fit_report.json", "profile_P1.dot", "profile_P2.dot", "volumes.csv", "summary.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_assign_prints_one_line_per_sequence(runner, fitted, tmp_path):
    out, _ = fitted
    query = tmp_path / "query.jsonl"
    query.write_text(json.dumps({"id": "Q1", "events": ["RX", "PO"], "times_months": [0.0, 1.0]}) + "\n")

    result = runner.invoke(cli, ["assign", "-i", str(query), "-r", str(out / "fit_report.json")])

    assert result.exit_code == 0, result.stderr
    lines = result.output.strip().splitlines()
    assert len(lines) == 1
    fields = lines[0].split("\t")
    assert fields[0] == "Q1"
    assert fields[1] in ("P1", "P2")
    assert len(fields) == 4


def test_fit_lists_every_sequence_outside_the_window(runner, tmp_path):
    sequences = tmp_path / "late.jsonl"
    sequences.write_text(
        json.dumps({"id": "S1", "events": ["RX", "RX"], "times_months": [58.0, 61.0]}) + "\n"
        + json.dumps({"id": "S2", "events": ["RX"], "times_months": [1.0]}) + "\n"
        + json.dumps({"id": "S3", "events": ["PO"], "times_months": [-0.5]}) + "\n"
    )

    result = fit(runner, sequences, tmp_path / "out")

    assert result.exit_code == 2
    assert "line 1: subject S1" in result.stderr
    assert "line 3: subject S3" in result.stderr
    assert "S2" not in result.stderr
    assert not (tmp_path / "out" / "fit_report.json").exists()


def test_assign_rejects_unknown_report_schema(runner, tmp_path):
    report = tmp_path / "report.json"
    report.write_text(json.dumps({"schema_version": "careprofiles/fit-report/v0"}))
    query = tmp_path / "query.jsonl"
    query.write_text(json.dumps({"id": "Q1", "events": ["RX"], "times_months": [0.0]}) + "\n")

    result = runner.invoke(cli, ["assign", "-i", str(query), "-r", str(report)])

    assert result.exit_code == 2
    assert "schema" in result.stderr


def test_fit_rejects_unknown_labels(runner, tmp_path):
    sequences = tmp_path / "bad.jsonl"
    sequences.write_text(
        json.dumps({"id": "S1", "events": ["RX", "XX"], "times_months": [0.0, 1.0]}) + "\n"
        + json.dumps({"id": "S2", "events": ["YY"], "times_months": [0.0]}) + "\n"
    )

    result = fit(runner, sequences, tmp_path / "out")

    assert result.exit_code == 2
    assert "XX" in result.stderr and "YY" in result.stderr


def test_fit_rejects_bad_overrides(runner, simulated, tmp_path):
    result = runner.invoke(
        cli, ["fit", "-i", str(simulated / "sequences.jsonl"), "-o", str(tmp_path / "out"), "--coverage", "1.5"]
    )
    assert result.exit_code == 2
    assert "coverage" in result.stderr


def test_translate_header_only_file(runner, tmp_path):
    records = tmp_path / "records.csv"
    records.write_text(",".join(RECORD_COLUMNS) + "\n")

    result = runner.invoke(cli, ["translate", "-i", str(records), "--mapping", MAPPING, "-o", str(tmp_path / "out")])

    assert result.exit_code == 0, result.stderr
    assert "0 subjects" in result.output
    assert (tmp_path / "out" / "sequences.jsonl").read_text() == ""
    drop_report = json.loads((tmp_path / "out" / "drop_report.json").read_text())
    assert drop_report["records_in"] == 0
    assert drop_report["run"]["subcommand"] == "translate"
    assert drop_report["run"]["input"] == str(records)
    assert isinstance(drop_report["run"]["app"]["seed"], int)


def test_simulated_records_translate_to_simulated_sequences(runner, tmp_path):
    sim = tmp_path / "sim"
    result = runner.invoke(
        cli,
        ["simulate", "--design", "two", "--subjects", "200", "--records", "--mapping", MAPPING,
         "--duplicate-rate", "0.1", "-o", str(sim)],
    )
    assert result.exit_code == 0, result.stderr

    out = tmp_path / "translated"
    result = runner.invoke(cli, ["translate", "-i", str(sim / "records.csv"), "--mapping", MAPPING, "-o", str(out)])

    assert result.exit_code == 0, result.stderr
    assert (out / "sequences.jsonl").read_text() == (sim / "sequences.jsonl").read_text()
    assert json.loads((out / "drop_report.json").read_text())["dropped"]["duplicate"] > 0
