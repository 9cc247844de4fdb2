# careprofiles/viz/network.py
"""
Stochastic provider networks and visit-volume tables for fitted profiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from graphviz import Digraph

from ..models.config import NetworkConfig
from ..models.params import ProfileModel
from ..models.results import ClusterTree
from ..models.sequences import LC_LABEL, RC_LABEL, StateSpace


logger = logging.getLogger(__name__)

# tier -> (style, penwidth)
TIER_STYLES = {
    "low": ("dashed", "1"),
    "medium": ("solid", "2"),
    "high": ("bold", "3"),
}

VOLUME_COLUMNS = ["profile", "label", "visits", "share", "members", "mean_visits_per_member"]


@dataclass(frozen=True)
class NetworkEdge:
    src: str
    dst: str
    probability: float
    mean_interarrival: Optional[float]
    tier: str


@dataclass(frozen=True)
class NetworkGraph:
    """Retained states plus LC and RC, the edges drawn between them, and the visit share kept."""
    name: str
    nodes: tuple[str, ...]
    edges: tuple[NetworkEdge, ...]
    coverage: float
    tiers: tuple[float, float]


def edge_tier(probability: float, tier_low: float = 0.33, tier_high: float = 0.66) -> str:
    if probability < tier_low:
        return "low"
    if probability <= tier_high:
        return "medium"
    return "high"


def retained_states(visits: np.ndarray, threshold: float) -> tuple[list[int], float]:
    """Smallest prefix of states by descending volume (ties by index) reaching `threshold` of the total."""
    total = float(visits.sum())
    if total <= 0:
        return [], 1.0
    order = sorted(range(len(visits)), key=lambda i: (-visits[i], i))
    kept, covered = [], 0.0
    for i in order:
        if covered >= threshold * total - 1e-12:
            break
        kept.append(i)
        covered += float(visits[i])
    return kept, covered / total


def build_network(
    profile: ProfileModel,
    space: StateSpace,
    config: Optional[NetworkConfig] = None,
    name: str = "profile",
) -> NetworkGraph:
    """
    Prune a profile to the states carrying `coverage` of its visit volume.

    Visit volume counts every inbound transition, LC arrivals included. Edges
    among the kept states (and from LC / to RC) are drawn when P >= edge_min;
    real-to-real edges carry the mean interarrival in months.
    """
    config = config or NetworkConfig()
    s = space.size
    params = profile.params
    kept, coverage = retained_states(profile.stats.visits, config.coverage)
    kept_set = set(kept)

    edges = []
    for i in kept + [s]:
        for j in kept + [s]:
            if i == s and j == s:
                continue
            p = float(params.transitions[i, j])
            if p <= 0 or p < config.edge_min:
                continue
            mean = float(params.mean_interarrival[i, j]) if i in kept_set and j in kept_set else None
            edges.append(
                NetworkEdge(
                    src=space.row_label(i),
                    dst=space.column_label(j),
                    probability=p,
                    mean_interarrival=mean,
                    tier=edge_tier(p, config.tier_low, config.tier_high),
                )
            )

    nodes = tuple(sorted([space.labels[i] for i in kept] + [LC_LABEL, RC_LABEL]))
    edges.sort(key=lambda edge: (edge.src, edge.dst))
    return NetworkGraph(
        name=name,
        nodes=nodes,
        edges=tuple(edges),
        coverage=coverage,
        tiers=(config.tier_low, config.tier_high),
    )


def edge_label(edge: NetworkEdge) -> str:
    if edge.mean_interarrival is None:
        return f"{edge.probability:.2f}"
    return f"{edge.probability:.2f} ({edge.mean_interarrival:.1f})"


def emit_dot(graph: NetworkGraph, note: Optional[str] = None) -> str:
    """Byte-stable DOT text; the header comment documents the edge tiers."""
    low, high = graph.tiers
    comment = (
        f"{graph.name} coverage={graph.coverage:.3f}; "
        f"P<{low:.2f} dashed penwidth=1, {low:.2f}<=P<={high:.2f} solid penwidth=2, "
        f"P>{high:.2f} bold penwidth=3; labels: probability (mean interarrival months)"
        + (f"; {note}" if note else "")
    )
    dot = Digraph(
        name=graph.name,
        comment=comment,
        graph_attr={"rankdir": "LR"},
        node_attr={"shape": "ellipse"},
    )
    for node in sorted(graph.nodes):
        if node in (LC_LABEL, RC_LABEL):
            dot.node(node, shape="box")
        else:
            dot.node(node)
    for edge in sorted(graph.edges, key=lambda e: (e.src, e.dst)):
        style, penwidth = TIER_STYLES[edge.tier]
        dot.edge(edge.src, edge.dst, label=edge_label(edge), penwidth=penwidth, style=style)
    return dot.source


def volume_table(tree: ClusterTree) -> pd.DataFrame:
    """Visits per (profile, event label) in reporting order."""
    names = tree.profile_names()
    rows = []
    for node in tree.ordered_nodes():
        visits = node.profile.stats.visits
        total = float(visits.sum())
        members = node.profile.size
        for label, count in zip(tree.space.labels, visits):
            rows.append(
                {
                    "profile": names[node.leaf_id],
                    "label": label,
                    "visits": int(round(count)),
                    "share": float(count) / total if total > 0 else 0.0,
                    "members": members,
                    "mean_visits_per_member": float(count) / members,
                }
            )
    return pd.DataFrame(rows, columns=VOLUME_COLUMNS)
