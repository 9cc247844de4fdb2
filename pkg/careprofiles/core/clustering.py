# careprofiles/core/clustering.py
"""
Divisive profile search.

Starting from one population profile, every leaf is ranked by the average
KL distance of its members from the leaf's parameters and cut at equally
spaced order statistics of that ranking. The best-scoring cuts are refined
with classification EM, and the best refined split is kept only if it
raises the global BIC.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..models.config import AppConfig, ClusteringConfig, ModelConfig
from ..models.params import MrpParams, ProfileModel, SufficientStats
from ..models.results import ClusterTree, SplitCandidate, SplitRecord, TreeLeaf
from ..models.sequences import EventSequence, StateSpace
from .corpus import CorpusStats, require_nonempty, stats_matrix, validate_states
from .divergence import sequence_distances
from .errors import ProfilerError
from .estimation import estimate_mle, partition_bic


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EmResult:
    """Refined two-way partition; `trace` is the accepted total log-likelihood per iteration."""
    children: tuple[ProfileModel, ProfileModel]
    indices: tuple[np.ndarray, np.ndarray]
    bic: float
    trace: tuple[float, ...]
    iterations: int


def fit_profile(
    corpus: CorpusStats,
    indices: np.ndarray,
    model: ModelConfig,
    fallback: Optional[MrpParams] = None,
) -> ProfileModel:
    """Fit one profile to the given corpus rows."""
    stats = corpus.total(indices)
    params = estimate_mle(stats, fallback, alpha=model.alpha, lambda_max=model.lambda_max)
    loglik = float(stats.to_vector() @ params.log_weights(model.epsilon))
    return ProfileModel(params, stats, tuple(corpus.subject_ids[indices].tolist()), loglik)


def _fit_vector(
    n_states: int,
    vector: np.ndarray,
    model: ModelConfig,
    fallback: Optional[MrpParams],
) -> tuple[MrpParams, float]:
    params = estimate_mle(
        SufficientStats.from_vector(n_states, vector),
        fallback,
        alpha=model.alpha,
        lambda_max=model.lambda_max,
    )
    return params, float(vector @ params.log_weights(model.epsilon))


def kl_distances(
    corpus: CorpusStats,
    indices: np.ndarray,
    params: MrpParams,
    model: ModelConfig,
) -> np.ndarray:
    return sequence_distances(
        corpus.matrix[indices],
        params,
        alpha=model.alpha,
        lambda_max=model.lambda_max,
        epsilon=model.epsilon,
    )


def sort_by_distance(
    corpus: CorpusStats,
    indices: np.ndarray,
    distances: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Ascending distance, ties by subject id."""
    order = np.lexsort((corpus.id_rank[indices], distances))
    return indices[order], distances[order]


def split_cuts(
    n_members: int,
    n_thresholds: int,
    min_leaf: int,
    distances: Optional[np.ndarray] = None,
) -> list[tuple[int, int]]:
    """
    (threshold_rank, cut) pairs: cut = floor(i * n / T) for i = 1..T, keeping
    the first rank of each distinct cut that leaves min_leaf on both sides.

    With the ascending `distances`, a cut is moved down to the first member
    tied with the threshold value, so the lower side is exactly the members
    strictly closer than it and tied members never straddle a cut.
    """
    cuts: list[tuple[int, int]] = []
    seen: set[int] = set()
    for i in range(1, n_thresholds + 1):
        cut = (i * n_members) // n_thresholds
        if distances is not None and cut < n_members:
            cut = int(np.searchsorted(distances, distances[cut], side="left"))
        if cut in seen or cut < min_leaf or cut > n_members - min_leaf:
            continue
        seen.add(cut)
        cuts.append((i, cut))
    return cuts


def _candidate(corpus: CorpusStats, ranked: np.ndarray, rank: int, cut: int, score: float) -> SplitCandidate:
    below_idx, above_idx = np.sort(ranked[:cut]), np.sort(ranked[cut:])
    return SplitCandidate(
        threshold_rank=rank,
        cut=cut,
        below=below_idx,
        above=above_idx,
        below_ids=tuple(corpus.subject_ids[below_idx].tolist()),
        above_ids=tuple(corpus.subject_ids[above_idx].tolist()),
        bic_alternative=float(score),
    )


def score_cuts(
    corpus: CorpusStats,
    ranked: np.ndarray,
    parent: ProfileModel,
    model: ModelConfig,
    n_thresholds: int,
    min_leaf: int,
    distances: Optional[np.ndarray] = None,
    other_loglik: float = 0.0,
    other_sizes: Sequence[int] = (),
    n_subjects: Optional[int] = None,
    threads: int = 1,
    label_cost: bool = True,
) -> tuple[list[tuple[int, int]], np.ndarray]:
    """
    Global BIC of every admissible cut of a ranked leaf, in cut order.

    `other_loglik` and `other_sizes` describe every other leaf, so each score
    is the whole-model BIC with the leaf replaced by its two sides.
    """
    n = len(ranked)
    n_subjects = n_subjects or len(corpus)
    if n < 2 * min_leaf:
        return [], np.empty(0)
    cuts = split_cuts(n, n_thresholds, min_leaf, distances)
    if not cuts:
        return [], np.empty(0)

    s = corpus.space.size
    bounds = np.array([0] + [cut for _, cut in cuts])
    # block sums between consecutive cuts, accumulated from both ends so that
    # neither side is obtained by subtraction
    blocks = np.add.reduceat(corpus.matrix[ranked], bounds, axis=0)
    below_sums = np.cumsum(blocks, axis=0)[:-1]
    above_sums = np.cumsum(blocks[::-1], axis=0)[::-1][1:]
    sizes = list(other_sizes)

    def score(k: int) -> float:
        _, ll_below = _fit_vector(s, below_sums[k], model, parent.params)
        _, ll_above = _fit_vector(s, above_sums[k], model, parent.params)
        cut = cuts[k][1]
        return partition_bic(
            other_loglik + ll_below + ll_above, sizes + [cut, n - cut], s, n_subjects, label_cost
        )

    if threads > 1 and len(cuts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, range(len(cuts))))
    else:
        scores = [score(k) for k in range(len(cuts))]
    return cuts, np.array(scores)


def evaluate_splits(
    corpus: CorpusStats,
    ranked: np.ndarray,
    parent: ProfileModel,
    model: ModelConfig,
    n_thresholds: int,
    min_leaf: int,
    distances: Optional[np.ndarray] = None,
    other_loglik: float = 0.0,
    other_sizes: Sequence[int] = (),
    n_subjects: Optional[int] = None,
    threads: int = 1,
    label_cost: bool = True,
) -> Optional[SplitCandidate]:
    """Best cut of a ranked leaf by global BIC; None if no cut satisfies min_leaf."""
    cuts, scores = score_cuts(
        corpus, ranked, parent, model, n_thresholds, min_leaf,
        distances=distances,
        other_loglik=other_loglik,
        other_sizes=other_sizes,
        n_subjects=n_subjects,
        threads=threads,
        label_cost=label_cost,
    )
    if not cuts:
        return None
    # first maximum: ties go to the smaller cut
    best = int(np.argmax(scores))
    rank, cut = cuts[best]
    return _candidate(corpus, ranked, rank, cut, scores[best])


def refine_split(
    corpus: CorpusStats,
    candidate: SplitCandidate,
    parent: ProfileModel,
    model: ModelConfig,
    other_loglik: float = 0.0,
    other_sizes: Sequence[int] = (),
    n_subjects: Optional[int] = None,
    max_iter: int = 100,
    tol: float = 1e-6,
    label_cost: bool = True,
) -> EmResult:
    """
    Classification EM from a candidate partition.

    Each iteration assigns every member to the child with the higher
    log-likelihood (ties to the first child) and re-fits both children with
    the parent as fallback. An iteration that empties a child or lowers the
    total log-likelihood is reverted and EM stops.
    """
    s = corpus.space.size
    n_subjects = n_subjects or len(corpus)
    members = np.sort(np.concatenate([candidate.below, candidate.above]))
    x = corpus.matrix[members]
    assign = np.isin(members, candidate.above).astype(np.int64)

    def fit_children(labels: np.ndarray) -> tuple[list[MrpParams], float]:
        fitted = [_fit_vector(s, x[labels == side].sum(axis=0), model, parent.params) for side in (0, 1)]
        return [params for params, _ in fitted], fitted[0][1] + fitted[1][1]

    params, loglik = fit_children(assign)
    trace = [loglik]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        weights = np.stack([p.log_weights(model.epsilon) for p in params], axis=1)
        proposed = np.argmax(x @ weights, axis=1)
        if np.array_equal(proposed, assign):
            break
        counts = np.bincount(proposed, minlength=2)
        if counts.min() == 0:
            logger.warning("EM iteration %d emptied a child; reverting and stopping", iterations)
            break
        new_params, new_loglik = fit_children(proposed)
        if new_loglik < loglik:
            logger.warning(
                "EM iteration %d lowered log-likelihood (%.6f -> %.6f); reverting and stopping",
                iterations, loglik, new_loglik,
            )
            break
        gain = new_loglik - loglik
        assign, params, loglik = proposed, new_params, new_loglik
        trace.append(loglik)
        if gain < tol:
            break

    sides = (members[assign == 0], members[assign == 1])
    children = tuple(fit_profile(corpus, side, model, parent.params) for side in sides)
    sizes = list(other_sizes) + [len(side) for side in sides]
    return EmResult(
        children=children,
        indices=sides,
        bic=partition_bic(other_loglik + loglik, sizes, s, n_subjects, label_cost),
        trace=tuple(trace),
        iterations=iterations,
    )


class DivisiveClusterer:
    """
    Owns one ClusterTree and grows it split by split.

    Leaves are examined in FIFO order; accepted children join the back of the
    queue. Split decisions are made here only, so candidate evaluation and EM
    restarts can use worker threads without affecting the result.
    """

    def __init__(self, config: Optional[AppConfig] = None):
        self.config = config or AppConfig()
        self.model: ModelConfig = self.config.model
        self.clustering: ClusteringConfig = self.config.clustering

    def _bic(self, total_loglik: float, sizes: Sequence[int], corpus: CorpusStats) -> float:
        return partition_bic(total_loglik, sizes, corpus.space.size, len(corpus), self.clustering.label_cost)

    def _start(self, corpus: CorpusStats) -> ClusterTree:
        root = fit_profile(corpus, np.arange(len(corpus)), self.model)
        node = TreeLeaf(0, root, np.arange(len(corpus)))
        tree = ClusterTree(
            space=corpus.space,
            n_subjects=len(corpus),
            nodes=[node],
            global_bic=self._bic(root.loglik, [len(corpus)], corpus),
            rng_seed=self.config.seed,
            label_cost=self.clustering.label_cost,
        )
        logger.info("Null profile fitted: members=%d bic0=%.4f", len(corpus), tree.global_bic)
        return tree

    def _resume(self, corpus: CorpusStats, initial: ClusterTree) -> ClusterTree:
        nodes = [
            TreeLeaf(node.leaf_id, node.profile, corpus.rows_for(node.profile.members))
            for node in initial.nodes
        ]
        tree = ClusterTree(
            space=corpus.space,
            n_subjects=len(corpus),
            nodes=nodes,
            global_bic=self._bic(
                sum(node.profile.loglik for node in nodes), [node.profile.size for node in nodes], corpus
            ),
            rng_seed=initial.rng_seed,
            history=list(initial.history),
            next_leaf_id=initial.next_leaf_id,
            label_cost=self.clustering.label_cost,
        )
        self._check_partition(tree)
        return tree

    @staticmethod
    def _check_partition(tree: ClusterTree) -> None:
        rows = np.concatenate([node.indices for node in tree.nodes])
        if len(rows) != tree.n_subjects or len(np.unique(rows)) != tree.n_subjects:
            raise ProfilerError("profile leaves no longer partition the subjects")

    def _refine_starts(
        self,
        corpus: CorpusStats,
        starts: list[SplitCandidate],
        leaf: ProfileModel,
        other_loglik: float,
        other_sizes: list[int],
    ) -> list[EmResult]:
        def refine(candidate: SplitCandidate) -> EmResult:
            return refine_split(
                corpus, candidate, leaf, self.model,
                other_loglik=other_loglik,
                other_sizes=other_sizes,
                n_subjects=len(corpus),
                max_iter=self.clustering.em_max_iter,
                tol=self.clustering.em_tol,
                label_cost=self.clustering.label_cost,
            )

        if self.clustering.threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=self.clustering.threads) as pool:
                return list(pool.map(refine, starts))
        return [refine(candidate) for candidate in starts]

    def attempt_split(self, corpus: CorpusStats, tree: ClusterTree, node: TreeLeaf) -> SplitRecord:
        """
        Rank, score and refine one leaf; updates `tree` when the split is accepted.

        The em_starts best cuts (by pre-EM BIC, ties to the smaller cut) each
        seed one EM run. The refined split with the highest BIC wins, ties to
        the better-scored start.
        """
        n_subjects = len(corpus)
        leaf = node.profile
        other_loglik = tree.total_loglik - leaf.loglik
        other_sizes = [n.profile.size for n in tree.nodes if n.leaf_id != node.leaf_id]
        bic0 = tree.global_bic
        min_leaf = self.clustering.resolve_min_leaf(n_subjects)

        distances = kl_distances(corpus, node.indices, leaf.params, self.model)
        ranked, ranked_distances = sort_by_distance(corpus, node.indices, distances)
        cuts, scores = score_cuts(
            corpus, ranked, leaf, self.model,
            n_thresholds=self.clustering.n_thresholds,
            min_leaf=min_leaf,
            distances=ranked_distances,
            other_loglik=other_loglik,
            other_sizes=other_sizes,
            n_subjects=n_subjects,
            threads=self.clustering.threads,
            label_cost=self.clustering.label_cost,
        )

        record = SplitRecord(
            attempt=len(tree.history) + 1,
            leaf_id=node.leaf_id,
            members=leaf.size,
            bic0=bic0,
            accepted=False,
        )
        if cuts:
            order = np.argsort(-scores, kind="stable")[: self.clustering.em_starts]
            starts = [_candidate(corpus, ranked, *cuts[j], scores[j]) for j in order]
            refined = self._refine_starts(corpus, starts, leaf, other_loglik, other_sizes)
            # first maximum: ties go to the better-scored start
            best = int(np.argmax([result.bic for result in refined]))
            winner = refined[best]
            logger.debug(
                "Leaf %d: %d EM starts, best from threshold rank %d (bic %.4f)",
                node.leaf_id, len(starts), starts[best].threshold_rank, winner.bic,
            )

            record.bic_a = starts[0].bic_alternative
            record.bic_a_star = winner.bic
            record.threshold_rank = starts[best].threshold_rank
            record.em_starts = len(starts)
            record.em_iterations = winner.iterations
            if winner.bic > bic0:
                children = [
                    TreeLeaf(tree.next_leaf_id + side, winner.children[side], winner.indices[side])
                    for side in (0, 1)
                ]
                tree.nodes = [n for n in tree.nodes if n.leaf_id != node.leaf_id] + children
                tree.next_leaf_id += 2
                tree.global_bic = winner.bic
                record.accepted = True
                record.children = [child.leaf_id for child in children]
                self._check_partition(tree)

        tree.history.append(record)
        logger.info(record.log_line())
        return record

    def run(self, corpus: CorpusStats, initial: Optional[ClusterTree] = None) -> ClusterTree:
        """
        Split leaves until none is accepted or max_profiles is reached.

        With `initial`, the search resumes from that tree's leaves; a finished
        tree therefore comes back without further splits.
        """
        require_nonempty(corpus.sequences)
        tree = self._start(corpus) if initial is None else self._resume(corpus, initial)
        queue = deque(tree.nodes)
        while queue and tree.n_profiles < self.clustering.max_profiles:
            node = queue.popleft()
            record = self.attempt_split(corpus, tree, node)
            if record.accepted:
                queue.extend(n for n in tree.nodes if n.leaf_id in record.children)

        logger.info(
            "Divisive search finished: profiles=%d global_bic=%.4f attempts=%d",
            tree.n_profiles, tree.global_bic, len(tree.history),
        )
        return tree




def _corpus(seqs: Sequence[EventSequence], space: StateSpace) -> CorpusStats:
    seqs = list(seqs)
    require_nonempty(seqs)
    return CorpusStats.build(seqs, space)


def fit_null(
    seqs: Sequence[EventSequence],
    space: StateSpace,
    model: Optional[ModelConfig] = None,
) -> ProfileModel:
    """One profile holding every sequence."""
    corpus = _corpus(seqs, space)
    return fit_profile(corpus, np.arange(len(corpus)), model or ModelConfig())


def rank_by_kl(
    profile: ProfileModel,
    seqs: Sequence[EventSequence],
    model: Optional[ModelConfig] = None,
) -> list[tuple[str, float]]:
    """(subject_id, average KL) ascending, ties by subject id."""
    model = model or ModelConfig()
    seqs = list(seqs)
    if not seqs:
        return []
    n_states = profile.params.n_states
    validate_states(seqs, n_states)
    distances = sequence_distances(
        stats_matrix(seqs, n_states),
        profile.params,
        alpha=model.alpha,
        lambda_max=model.lambda_max,
        epsilon=model.epsilon,
    )
    ids = [seq.subject_id for seq in seqs]
    order = sorted(range(len(seqs)), key=lambda i: (distances[i], ids[i]))
    return [(ids[i], float(distances[i])) for i in order]


def search_split(
    profile: ProfileModel,
    seqs: Sequence[EventSequence],
    space: StateSpace,
    n_thresholds: int = 50,
    min_leaf: Optional[int] = None,
    model: Optional[ModelConfig] = None,
) -> Optional[SplitCandidate]:
    """Best single split of `seqs` treated as the whole population."""
    model = model or ModelConfig()
    corpus = _corpus(seqs, space)
    if min_leaf is None:
        min_leaf = ClusteringConfig().resolve_min_leaf(len(corpus))
    indices = np.arange(len(corpus))
    parent = ProfileModel(profile.params, corpus.total(), profile.members, profile.loglik)
    ranked, ranked_distances = sort_by_distance(corpus, indices, kl_distances(corpus, indices, profile.params, model))
    return evaluate_splits(
        corpus, ranked, parent, model, n_thresholds=n_thresholds, min_leaf=min_leaf, distances=ranked_distances
    )


def em_refine(
    candidate: SplitCandidate,
    seqs: Sequence[EventSequence],
    space: StateSpace,
    parent: Optional[ProfileModel] = None,
    max_iter: int = 100,
    tol: float = 1e-6,
    model: Optional[ModelConfig] = None,
) -> EmResult:
    """
    Refine a candidate partition of `seqs` (matched by subject id).

    Without `parent`, the population profile of `seqs` is the fallback.
    """
    model = model or ModelConfig()
    corpus = _corpus(seqs, space)
    if parent is None:
        parent = fit_profile(corpus, np.arange(len(corpus)), model)
    below, above = corpus.rows_for(candidate.below_ids), corpus.rows_for(candidate.above_ids)
    local = SplitCandidate(
        candidate.threshold_rank, candidate.cut, below, above,
        candidate.below_ids, candidate.above_ids, candidate.bic_alternative,
    )
    return refine_split(corpus, local, parent, model, max_iter=max_iter, tol=tol)


def divisive_cluster(
    seqs: Sequence[EventSequence],
    space: StateSpace,
    config: Optional[AppConfig] = None,
) -> ClusterTree:
    return DivisiveClusterer(config).run(_corpus(seqs, space))
