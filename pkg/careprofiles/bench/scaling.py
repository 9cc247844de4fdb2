# careprofiles/bench/scaling.py
"""
Scaling harness: wall time of one outer divisive iteration versus corpus size.
"""

from __future__ import annotations

import logging
import os
import platform
import time
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..core.clustering import fit_profile, kl_distances, refine_split, score_cuts, sort_by_distance
from ..core.corpus import CorpusStats
from ..core.errors import ConfigError
from ..data.synthetic_data import MixtureSimulator, two_profile_spec
from ..models.config import AppConfig, GeneratorSpec
from ..models.results import BenchReport, SplitCandidate, StageTiming
from ..models.sequences import EventSequence, StateSpace


logger = logging.getLogger(__name__)

STAGES = ("null_fit", "kl_rank", "sort", "split_search", "em_refine", "total")
MIN_SECONDS = 1e-9


def machine_descriptor() -> Dict[str, object]:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
    }


class ScalingBenchmark:
    """
    Times null fit, KL ranking, sorting, split search and EM refinement of the
    root leaf for nested corpora (prefixes of one seeded simulation).
    """

    def __init__(self, config: Optional[AppConfig] = None, spec: Optional[GeneratorSpec] = None):
        self.config = config or AppConfig()
        self.spec = spec or two_profile_spec(seed=self.config.seed)

    def time_iteration(self, sequences: Sequence[EventSequence], space: StateSpace) -> tuple[Dict[str, float], int]:
        """Stage seconds for one outer iteration, and the transitions processed."""
        model, clustering = self.config.model, self.config.clustering
        timings: Dict[str, float] = {}

        start = time.perf_counter()
        corpus = CorpusStats.build(sequences, space)
        indices = np.arange(len(corpus))
        root = fit_profile(corpus, indices, model)
        timings["null_fit"] = time.perf_counter() - start

        start = time.perf_counter()
        distances = kl_distances(corpus, indices, root.params, model)
        timings["kl_rank"] = time.perf_counter() - start

        start = time.perf_counter()
        ranked, ranked_distances = sort_by_distance(corpus, indices, distances)
        timings["sort"] = time.perf_counter() - start

        start = time.perf_counter()
        cuts, scores = score_cuts(
            corpus, ranked, root, model,
            n_thresholds=clustering.n_thresholds,
            min_leaf=clustering.resolve_min_leaf(len(corpus)),
            distances=ranked_distances,
            threads=clustering.threads,
            label_cost=clustering.label_cost,
        )
        timings["split_search"] = time.perf_counter() - start

        start = time.perf_counter()
        for j in np.argsort(-scores, kind="stable")[: clustering.em_starts]:
            rank, cut = cuts[j]
            candidate = SplitCandidate(
                rank, cut, np.sort(ranked[:cut]), np.sort(ranked[cut:]), (), (), float(scores[j])
            )
            refine_split(
                corpus, candidate, root, model,
                max_iter=clustering.em_max_iter,
                tol=clustering.em_tol,
                label_cost=clustering.label_cost,
            )
        timings["em_refine"] = time.perf_counter() - start

        timings = {stage: max(seconds, MIN_SECONDS) for stage, seconds in timings.items()}
        timings["total"] = sum(timings.values())
        return timings, corpus.transitions_processed()

    def run(self, sizes: Sequence[int], repeats: Optional[int] = None, progress: bool = True) -> BenchReport:
        sizes = list(sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 1:
            raise ConfigError("sizes must be positive and strictly increasing")
        repeats = repeats or self.config.bench.repeats

        simulator = MixtureSimulator(self.spec, seed=self.config.seed)
        sequences, _ = simulator.simulate_mixture(sizes[-1], progress=progress)

        timings: List[StageTiming] = []
        work: Dict[int, int] = {}
        totals: List[float] = []
        for size in tqdm(sizes, desc="Benchmarking", disable=not progress):
            samples: Dict[str, List[float]] = {stage: [] for stage in STAGES}
            for _ in range(repeats):
                stage_seconds, processed = self.time_iteration(sequences[:size], simulator.space)
                for stage, seconds in stage_seconds.items():
                    samples[stage].append(seconds)
            work[size] = processed
            for stage in STAGES:
                timings.append(
                    StageTiming(
                        subjects=size,
                        stage=stage,
                        median_seconds=float(np.median(samples[stage])),
                        samples=samples[stage],
                    )
                )
            totals.append(float(np.median(samples["total"])))
            logger.info("Bench R=%d transitions=%d total=%.4fs", size, processed, totals[-1])

        stage_slopes: Dict[str, float] = {}
        if len(sizes) >= 2:
            for stage in STAGES:
                medians = [t.median_seconds for t in timings if t.stage == stage]
                stage_slopes[stage] = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])
            logger.info(
                "Bench log-log slopes: %s",
                " ".join(f"{stage}={value:.3f}" for stage, value in stage_slopes.items()),
            )
        ratios = [b / a for a, b in zip(totals, totals[1:])]

        return BenchReport(
            sizes=sizes,
            seed=self.config.seed,
            repeats=repeats,
            transitions_processed=work,
            timings=timings,
            slope=stage_slopes.get("total"),
            stage_slopes=stage_slopes,
            doubling_ratios=ratios,
            machine=machine_descriptor(),
        )


def run_scaling(
    sizes: Optional[Sequence[int]] = None,
    spec: Optional[GeneratorSpec] = None,
    config: Optional[AppConfig] = None,
    full_grid: bool = False,
    progress: bool = True,
) -> BenchReport:
    """Desk-scale sizes by default; `full_grid` switches to the configured large grid."""
    config = config or AppConfig()
    if sizes is None:
        sizes = config.bench.full_grid if full_grid else config.bench.sizes
    return ScalingBenchmark(config, spec).run(sizes, progress=progress)
