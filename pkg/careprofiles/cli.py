# careprofiles/cli.py
"""
Command line interface: simulate, translate, fit, assign and bench.

Exit codes: 0 on success, 2 when input or configuration is rejected,
1 on any other failure.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import click
from pydantic import ValidationError

from .bench.scaling import run_scaling
from .core.clustering import DivisiveClusterer
from .core.corpus import CorpusStats
from .core.errors import ConfigError, ProfilerError
from .core.estimation import DEFAULT_EPSILON, assign_batch
from .data.io import (
    read_records_csv,
    read_sequences_jsonl,
    write_labels_csv,
    write_records_csv,
    write_run_comment,
    write_sequences_jsonl,
)
from .data.records import translate
from .data.synthetic_data import MixtureSimulator, RecordNoise, four_profile_spec, two_profile_spec
from .models.config import AppConfig, RunConfig
from .models.results import ClusterTree, FitReport
from .models.sequences import StateSpace
from .utils.config_loader import load_config, load_generator_spec, load_mapping
from .utils.logging_config import setup_logging
from .utils.time_helpers import study_length_months
from .viz.network import build_network, emit_dot, volume_table


logger = logging.getLogger(__name__)

DEFAULT_MAPPING_PATH = "configs/templates/mapping.json"
BUILT_IN_DESIGNS = {"two": two_profile_spec, "four": four_profile_spec}


def handle_errors(command):
    """Map failures to exit codes and print them to stderr."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (ProfilerError, ValidationError) as e:
            click.echo(f"ERROR: {e}", err=True)
            sys.exit(2)
        except Exception as e:
            logger.debug("Unhandled failure", exc_info=True)
            click.echo(f"ERROR: {e}", err=True)
            sys.exit(1)

    return wrapper


def _overrides(**flags: Any) -> Dict[str, Any]:
    """Nested config overrides from CLI flags that were actually given."""
    sections = {
        "seed": (None, "seed"),
        "threads": ("clustering", "threads"),
        "n_thresholds": ("clustering", "n_thresholds"),
        "min_leaf": ("clustering", "min_leaf"),
        "max_profiles": ("clustering", "max_profiles"),
        "coverage": ("network", "coverage"),
    }
    result: Dict[str, Any] = {}
    for flag, value in flags.items():
        if value is None:
            continue
        section, key = sections[flag]
        if section is None:
            result[key] = value
        else:
            result.setdefault(section, {})[key] = value
    return result


def _setup(
    subcommand: str,
    config_path: Optional[str],
    input_path: Optional[str] = None,
    output_dir: Optional[str] = None,
    **flags: Any,
) -> RunConfig:
    app = load_config(config_path, overrides=_overrides(**flags))
    setup_logging(level=app.logging.level, format_str=app.logging.format, log_file=app.logging.file)
    run = RunConfig(
        subcommand=subcommand, input=input_path, output_dir=output_dir, config_path=config_path, app=app
    )
    logger.debug("Effective run configuration: %s", run.to_dict())
    return run


def _output_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


config_option = click.option('--config', '-c', 'config_path', default=None, help='Configuration file path')
seed_option = click.option('--seed', type=int, default=None, help='Random seed (overrides config)')
output_option = click.option('--output-dir', '-o', default='output', show_default=True, help='Directory for artifacts')


@click.group()
def cli():
    """Fit utilization profiles to event sequences."""


@cli.command()
@config_option
@seed_option
@output_option
@click.option('--subjects', '-n', type=int, default=2000, show_default=True, help='Number of subjects')
@click.option('--design', type=click.Choice(sorted(BUILT_IN_DESIGNS)), default='two', show_default=True,
              help='Built-in planted design')
@click.option('--spec', 'spec_path', default=None, help='Generator document (overrides --design)')
@click.option('--records', is_flag=True, help='Also emit claim records through a mapping')
@click.option('--mapping', 'mapping_path', default=DEFAULT_MAPPING_PATH, show_default=True, help='Mapping document')
@click.option('--duplicate-rate', type=float, default=0.0, help='Duplicate record injection rate')
@click.option('--off-allowlist-rate', type=float, default=0.0, help='Off-allowlist record injection rate')
@handle_errors
def simulate(config_path, seed, output_dir, subjects, design, spec_path, records, mapping_path,
             duplicate_rate, off_allowlist_rate):
    """Simulate a planted mixture: sequences, labels and optionally records."""
    run = _setup("simulate", config_path, output_dir=output_dir, seed=seed)
    app = run.app
    spec = load_generator_spec(spec_path) if spec_path else BUILT_IN_DESIGNS[design](seed=app.seed)
    simulator = MixtureSimulator(spec, seed=app.seed)
    out = _output_dir(output_dir)

    if records:
        mapping = load_mapping(mapping_path)
        result = simulator.simulate_records(subjects, mapping, RecordNoise(off_allowlist_rate, duplicate_rate))
        sequences, labels = result.sequences, result.labels
        write_records_csv(str(out / "records.csv"), result.records)
        click.echo(f"Wrote {len(result.records)} records (injected {result.injected})")
    else:
        sequences, labels = simulator.simulate_mixture(subjects, progress=True)

    write_sequences_jsonl(str(out / "sequences.jsonl"), sequences, simulator.space)
    write_labels_csv(str(out / "labels.csv"), [seq.subject_id for seq in sequences], labels)
    with open(out / "simulation.json", "w") as f:
        json.dump(
            {"run": run.to_dict(), "subjects": subjects, "spec": spec.model_dump(mode="json", by_alias=True)},
            f,
            indent=2,
        )
    click.echo(f"Simulated {len(sequences)} subjects from {len(spec.profiles)} profiles into {out}")


@cli.command(name="translate")
@config_option
@output_option
@click.option('--input', '-i', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Claim records CSV')
@click.option('--mapping', 'mapping_path', default=DEFAULT_MAPPING_PATH, show_default=True, help='Mapping document')
@handle_errors
def translate_command(config_path, output_dir, input_path, mapping_path):
    """Translate claim records into event sequences."""
    run = _setup("translate", config_path, input_path=input_path, output_dir=output_dir)
    mapping = load_mapping(mapping_path)
    records = read_records_csv(input_path)
    sequences, report = translate(records, mapping)
    out = _output_dir(output_dir)
    write_sequences_jsonl(str(out / "sequences.jsonl"), sequences, StateSpace(tuple(mapping.labels)))
    report.save_to_json(str(out / "drop_report.json"), run=run.to_dict())
    click.echo(
        f"{report.subjects} subjects, {report.records_mapped} events from {report.records_in} records "
        f"({report.records_dropped} dropped)"
    )


def _write_summary(path: Path, tree: ClusterTree, app: AppConfig) -> None:
    names = tree.profile_names()
    lines = [
        f"seed: {app.seed}",
        f"subjects: {tree.n_subjects}",
        f"profiles: {tree.n_profiles}",
        f"global BIC: {tree.global_bic:.4f}",
        f"split attempts: {len(tree.history)}",
        "",
    ]
    for node in tree.ordered_nodes():
        profile = node.profile
        visits = profile.params.expected_visits()
        top = sorted(zip(tree.space.labels, visits), key=lambda item: -item[1])[:3]
        described = ", ".join(f"{label} {v:.2f}" for label, v in top)
        lines.append(
            f"{names[node.leaf_id]}: members={profile.size} loglik={profile.loglik:.4f} "
            f"expected visits: {described}"
        )
    lines += ["", "config: " + json.dumps(app.to_dict(), sort_keys=True)]
    path.write_text("\n".join(lines) + "\n")


@cli.command()
@config_option
@seed_option
@output_option
@click.option('--input', '-i', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Sequences JSONL')
@click.option('--threads', type=int, default=None, help='Worker threads for split search')
@click.option('--coverage', type=float, default=None, help='Visit volume kept in networks')
@click.option('--n-thresholds', type=int, default=None, help='Split positions tried per leaf')
@click.option('--min-leaf', type=int, default=None, help='Minimum profile size')
@click.option('--max-profiles', type=int, default=None, help='Profile cap')
@handle_errors
def fit(config_path, seed, output_dir, input_path, threads, coverage, n_thresholds, min_leaf, max_profiles):
    """Fit profiles and write the report, networks, volumes and summary."""
    run = _setup(
        "fit", config_path, input_path=input_path, output_dir=output_dir,
        seed=seed, threads=threads, coverage=coverage,
        n_thresholds=n_thresholds, min_leaf=min_leaf, max_profiles=max_profiles,
    )
    app = run.app
    space = StateSpace(tuple(app.study.labels))
    window = study_length_months(app.study.start, app.study.end)
    sequences = read_sequences_jsonl(input_path, space, study_months=window)

    corpus = CorpusStats.build(sequences, space)
    tree = DivisiveClusterer(app).run(corpus)

    out = _output_dir(output_dir)
    tree.to_report(app.to_dict()).save_to_json(str(out / "fit_report.json"))
    names = tree.profile_names()
    for node in tree.ordered_nodes():
        name = names[node.leaf_id]
        graph = build_network(node.profile, space, app.network, name=name)
        (out / f"profile_{name}.dot").write_text(emit_dot(graph, note=f"seed={app.seed}"))
    with open(out / "volumes.csv", "w") as f:
        write_run_comment(f, run.to_dict())
        volume_table(tree).to_csv(f, index=False)
    _write_summary(out / "summary.txt", tree, app)

    click.echo(f"Fitted {tree.n_profiles} profiles to {tree.n_subjects} subjects (BIC {tree.global_bic:.4f})")
    for node in tree.ordered_nodes():
        click.echo(f"  {names[node.leaf_id]}: {node.profile.size} members")


@cli.command()
@config_option
@click.option('--input', '-i', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Sequences JSONL')
@click.option('--report', '-r', 'report_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='fit_report.json from a previous fit')
@click.option('--output-dir', '-o', default=None, help='Also write assignments.tsv here')
@handle_errors
def assign(config_path, input_path, report_path, output_dir):
    """Assign sequences to the profiles of a saved fit report."""
    run = _setup("assign", config_path, input_path=input_path, output_dir=output_dir)
    report = FitReport.load_json(report_path)
    space = report.space
    sequences = read_sequences_jsonl(input_path, space)
    named = report.named_params()
    epsilon = report.config.get("model", {}).get("epsilon", DEFAULT_EPSILON)
    choices, logliks = assign_batch(sequences, [params for _, params in named], epsilon)

    lines = [
        "\t".join([seq.subject_id, named[k][0]] + [f"{ll:.6f}" for ll in row])
        for seq, k, row in zip(sequences, choices, logliks)
    ]
    for line in lines:
        click.echo(line)
    if output_dir:
        out = _output_dir(output_dir)
        header = "\t".join(["subject_id", "profile"] + [f"ll_{name}" for name, _ in named])
        with open(out / "assignments.tsv", "w") as f:
            write_run_comment(f, {**run.to_dict(), "report": report_path, "report_seed": report.seed})
            f.write("\n".join([header] + lines) + "\n")


@cli.command()
@config_option
@seed_option
@output_option
@click.option('--sizes', default=None, help='Comma-separated corpus sizes (default: configured desk sizes)')
@click.option('--full-grid', is_flag=True, help='Use the configured large-size grid')
@click.option('--threads', type=int, default=None, help='Worker threads for split search')
@handle_errors
def bench(config_path, seed, output_dir, sizes, full_grid, threads):
    """Time one divisive iteration across corpus sizes."""
    run = _setup("bench", config_path, output_dir=output_dir, seed=seed, threads=threads)
    app = run.app
    try:
        size_list = [int(s) for s in sizes.split(",")] if sizes else None
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {sizes!r}") from None
    report = run_scaling(size_list, config=app, full_grid=full_grid)
    out = _output_dir(output_dir)
    report.save_to_csv(str(out / "bench.csv"), run=run.to_dict())
    report.save_summary_json(str(out / "bench_summary.json"), run=run.to_dict())
    slope = "n/a" if report.slope is None else f"{report.slope:.3f}"
    click.echo(f"Benchmarked sizes {report.sizes}: log-log slope {slope}")


def main():
    cli()


if __name__ == '__main__':
    main()
