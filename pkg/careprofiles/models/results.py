# careprofiles/models/results.py
"""
Clustering results, fit reports and benchmark reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..core.errors import ReportSchemaError
from .params import MrpParams, ProfileModel
from .sequences import StateSpace


FIT_REPORT_SCHEMA = "careprofiles/fit-report/v1"


@dataclass(frozen=True, eq=False)
class SplitCandidate:
    """
    A proposed partition of one profile's members.

    `below` and `above` are corpus row indices; the `_ids` tuples are the
    matching subject ids. `threshold_rank` is i in the cut position
    floor(i * n / n_thresholds) along the ascending distance ranking.
    """
    threshold_rank: int
    cut: int
    below: np.ndarray
    above: np.ndarray
    below_ids: tuple[str, ...]
    above_ids: tuple[str, ...]
    bic_alternative: float

    def __post_init__(self) -> None:
        if len(self.below) == 0 or len(self.above) == 0:
            raise ValueError("both sides of a split must be non-empty")


class SplitRecord(BaseModel):
    """One split attempt in the order it was made."""
    attempt: int = Field(..., description="1-based attempt number")
    leaf_id: int = Field(..., description="Leaf that was examined")
    members: int = Field(..., description="Leaf size at the time of the attempt")
    bic0: float = Field(..., description="Global BIC before the attempt")
    bic_a: Optional[float] = Field(None, description="Best pre-EM candidate BIC; None when no candidate fits min_leaf")
    bic_a_star: Optional[float] = Field(None, description="Best global BIC after EM refinement over all starts")
    threshold_rank: Optional[int] = Field(None, description="Order-statistic index of the winning EM start")
    em_starts: int = Field(default=0, description="Candidate cuts refined by EM")
    em_iterations: int = Field(default=0, description="EM iterations of the winning start")
    accepted: bool = Field(..., description="Whether the split was adopted")
    children: Optional[List[int]] = Field(None, description="Leaf ids created by an accepted split")

    def log_line(self) -> str:
        def fmt(value: Optional[float]) -> str:
            return "none" if value is None else f"{value:.4f}"

        return (
            f"leaf={self.leaf_id} members={self.members} bic0={self.bic0:.4f} "
            f"bic_a={fmt(self.bic_a)} bic_a_star={fmt(self.bic_a_star)} accepted={self.accepted}"
        )


@dataclass(eq=False)
class TreeLeaf:
    """A current leaf: stable id, fitted profile and its corpus rows (ascending)."""
    leaf_id: int
    profile: ProfileModel
    indices: np.ndarray


@dataclass(eq=False)
class ClusterTree:
    """Leaves of the divisive search plus the split history that produced them."""
    space: StateSpace
    n_subjects: int
    nodes: List[TreeLeaf]
    global_bic: float
    rng_seed: int
    history: List[SplitRecord] = field(default_factory=list)
    next_leaf_id: int = 1
    label_cost: bool = True

    @property
    def leaves(self) -> List[ProfileModel]:
        return [node.profile for node in self.nodes]

    @property
    def n_profiles(self) -> int:
        return len(self.nodes)

    @property
    def sizes(self) -> List[int]:
        return [node.profile.size for node in self.nodes]

    @property
    def total_loglik(self) -> float:
        return float(sum(node.profile.loglik for node in self.nodes))

    @property
    def membership_loglik(self) -> float:
        """Label term included in global_bic; 0 when label_cost is off."""
        from ..core.estimation import membership_loglik

        return membership_loglik(self.sizes, self.n_subjects) if self.label_cost else 0.0

    def ordered_nodes(self) -> List[TreeLeaf]:
        """Reporting order: descending size, ties by smallest member id."""
        return sorted(self.nodes, key=lambda node: (-node.profile.size, min(node.profile.members)))

    def profile_names(self) -> Dict[int, str]:
        return {node.leaf_id: f"P{rank}" for rank, node in enumerate(self.ordered_nodes(), start=1)}

    def assignments(self) -> Dict[str, int]:
        """Subject id -> leaf id."""
        return {subject: node.leaf_id for node in self.nodes for subject in node.profile.members}

    def named_params(self) -> List[tuple[str, MrpParams]]:
        names = self.profile_names()
        return [(names[node.leaf_id], node.profile.params) for node in self.ordered_nodes()]

    def to_report(self, config: Dict[str, Any]) -> "FitReport":
        """Versioned, deterministic fit report (no timestamps)."""
        from ..core.estimation import model_size

        names = self.profile_names()
        profiles = []
        for node in self.ordered_nodes():
            params = node.profile.params
            visits = params.expected_visits()
            profiles.append(
                ProfileReport(
                    name=names[node.leaf_id],
                    leaf_id=node.leaf_id,
                    members=node.profile.size,
                    loglik=node.profile.loglik,
                    events=int(round(node.profile.stats.visits.sum())),
                    expected_visits={label: float(v) for label, v in zip(self.space.labels, visits)},
                    **params.to_labeled(self.space),
                )
            )
        return FitReport(
            seed=self.rng_seed,
            config=config,
            labels=list(self.space.labels),
            n_subjects=self.n_subjects,
            n_profiles=self.n_profiles,
            n_parameters=model_size(self.n_profiles, self.space.size),
            total_loglik=self.total_loglik,
            membership_loglik=self.membership_loglik,
            global_bic=self.global_bic,
            profiles=profiles,
            history=list(self.history),
        )


class ProfileReport(BaseModel):
    """One fitted profile as written to the fit report."""
    name: str = Field(..., description="Reporting label P1..PK")
    leaf_id: int = Field(..., description="Leaf id from the split history")
    members: int = Field(..., description="Number of subjects")
    loglik: float = Field(..., description="Log-likelihood of the members")
    events: int = Field(..., description="Total events across members")
    expected_visits: Dict[str, float] = Field(..., description="Expected visits per subject")
    transitions: Dict[str, Dict[str, float]] = Field(..., description="Rows LC and real states; columns real states and RC")
    mean_interarrival_months: Dict[str, Dict[str, float]] = Field(..., description="1/lambda per real pair")

    def params(self, space: StateSpace) -> MrpParams:
        return MrpParams.from_report(space, self.model_dump())


class FitReport(BaseModel):
    """Machine-readable result of `fit`."""
    schema_version: Literal["careprofiles/fit-report/v1"] = FIT_REPORT_SCHEMA
    seed: int
    config: Dict[str, Any]
    labels: List[str]
    n_subjects: int
    n_profiles: int
    n_parameters: int
    total_loglik: float
    membership_loglik: float = Field(default=0.0, description="sum_k n_k*log(n_k/R) charged in global_bic")
    global_bic: float
    profiles: List[ProfileReport]
    history: List[SplitRecord]

    @property
    def space(self) -> StateSpace:
        return StateSpace(tuple(self.labels))

    def named_params(self) -> List[tuple[str, MrpParams]]:
        space = self.space
        return [(profile.name, profile.params(space)) for profile in self.profiles]

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    def save_to_json(self, filepath: str) -> None:
        """Save the report; key order and float formatting are stable."""
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load_json(cls, filepath: str) -> "FitReport":
        with open(filepath) as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise ReportSchemaError(f"{filepath}: not a JSON fit report ({e})") from e
        version = payload.get("schema_version") if isinstance(payload, dict) else None
        if version != FIT_REPORT_SCHEMA:
            raise ReportSchemaError(
                f"{filepath}: unsupported fit report schema {version!r}, expected {FIT_REPORT_SCHEMA!r}"
            )
        try:
            return cls.model_validate(payload)
        except ValidationError as e:
            raise ReportSchemaError(f"{filepath}: malformed fit report: {e}") from e


class StageTiming(BaseModel):
    """Median wall time of one stage at one corpus size."""
    subjects: int
    stage: str
    median_seconds: float = Field(..., gt=0.0)
    samples: List[float]


class BenchReport(BaseModel):
    """Scaling run: per-size stage timings plus the fitted log-log slope."""
    sizes: List[int]
    seed: int
    repeats: int
    transitions_processed: Dict[int, int]
    timings: List[StageTiming]
    slope: Optional[float] = None
    doubling_ratios: List[float] = Field(default_factory=list)
    stage_slopes: Dict[str, float] = Field(default_factory=dict, description="Log-log slope of each stage median")
    machine: Dict[str, Any] = Field(default_factory=dict)

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame(
            [{"R": t.subjects, "stage": t.stage, "median_seconds": t.median_seconds} for t in self.timings],
            columns=["R", "stage", "median_seconds"],
        )

    def save_to_csv(self, filepath: str, run: Optional[Dict[str, Any]] = None) -> None:
        from ..data.io import write_run_comment

        with open(filepath, "w") as f:
            write_run_comment(f, run)
            self.to_frame().to_csv(f, index=False)

    def summary(self) -> dict:
        return {
            "sizes": self.sizes,
            "seed": self.seed,
            "repeats": self.repeats,
            "slope": self.slope,
            "doubling_ratios": self.doubling_ratios,
            "stage_slopes": self.stage_slopes,
            "transitions_processed": {str(k): v for k, v in self.transitions_processed.items()},
            "machine": self.machine,
        }

    def save_summary_json(self, filepath: str, run: Optional[Dict[str, Any]] = None) -> None:
        payload = self.summary() if run is None else {"run": run, **self.summary()}
        with open(filepath, "w") as f:
            json.dump(payload, f, indent=2)

    def superlinear_stages(self, limit: float = 1.25) -> List[str]:
        """Stages (other than the total) whose log-log slope exceeds `limit`."""
        return [stage for stage, value in self.stage_slopes.items() if stage != "total" and value > limit]


class RecoveryReport(BaseModel):
    """Agreement between a fitted tree and a planted mixture."""
    n_profiles: int = Field(..., description="Fitted profile count")
    n_planted: int = Field(..., description="Planted profile count")
    ari: float = Field(..., description="Adjusted Rand index")
    purity: float = Field(..., description="Share of subjects carrying their leaf's majority label")
    matching: Dict[str, int] = Field(..., description="Planted profile name -> leaf id")
    max_abs_p_error: Dict[str, float] = Field(..., description="Largest |P_hat - P| over well-observed rows")
