# careprofiles/models/config.py
"""
Configuration models for profile fitting, claim translation and simulation.
"""

from __future__ import annotations

import math
from datetime import date
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .sequences import DEFAULT_LABELS, LC_LABEL, RC_LABEL


MAPPING_SCHEMA = "careprofiles/mapping/v1"
GENERATOR_SCHEMA = "careprofiles/generator/v1"

RecordKind = Literal["IP", "OT", "RX"]


class StudyConfig(BaseModel):
    """Observation window and event alphabet."""
    start: date = Field(default=date(2005, 1, 1), description="Study start (left censor)")
    end: date = Field(default=date(2009, 12, 31), description="Study end (right censor)")
    labels: List[str] = Field(default_factory=lambda: list(DEFAULT_LABELS), description="Event alphabet")

    @model_validator(mode="after")
    def validate_window(self) -> "StudyConfig":
        if self.end <= self.start:
            raise ValueError("study end must be after study start")
        return self


class ModelConfig(BaseModel):
    """Estimation knobs."""
    alpha: float = Field(default=0.5, ge=0.0, description="Additive smoothing per destination")
    epsilon: float = Field(default=1e-9, gt=0.0, lt=1e-3, description="Probability floor for log-likelihoods")
    lambda_max: float = Field(default=1e4, gt=0.0, description="Interarrival rate clamp (1/month)")


class ClusteringConfig(BaseModel):
    """Divisive split search knobs."""
    n_thresholds: int = Field(default=50, ge=1, le=1000, description="Order statistics tried per split")
    min_leaf: Optional[int] = Field(default=None, ge=1, description="Minimum profile size; None = max(50, 1% of R)")
    max_profiles: int = Field(default=20, ge=1, le=100, description="Stop once this many profiles exist")
    em_max_iter: int = Field(default=100, ge=1, description="Classification-EM iteration cap")
    em_tol: float = Field(default=1e-6, ge=0.0, description="Secondary EM stop on log-likelihood gain")
    threads: int = Field(default=1, ge=1, le=64, description="Worker threads for candidate evaluation")
    em_starts: int = Field(default=50, ge=1, description="Best-scoring cuts refined by EM per split attempt")
    label_cost: bool = Field(default=True, description="Charge n_k*log(n_k/R) for profile membership in the BIC")

    def resolve_min_leaf(self, n_subjects: int) -> int:
        if self.min_leaf is not None:
            return self.min_leaf
        return max(50, math.ceil(0.01 * n_subjects))


class NetworkConfig(BaseModel):
    """Profile network rendering knobs."""
    coverage: float = Field(default=0.90, gt=0.0, le=1.0, description="Visit volume retained by node pruning")
    edge_min: float = Field(default=0.05, ge=0.0, lt=1.0, description="Smallest transition probability drawn")
    tier_low: float = Field(default=0.33, gt=0.0, lt=1.0, description="Upper bound of the thin/dashed tier")
    tier_high: float = Field(default=0.66, gt=0.0, lt=1.0, description="Upper bound of the solid tier")

    @model_validator(mode="after")
    def validate_tiers(self) -> "NetworkConfig":
        if self.tier_low >= self.tier_high:
            raise ValueError("tier_low must be below tier_high")
        return self


class BenchConfig(BaseModel):
    """Scaling harness knobs."""
    sizes: List[int] = Field(default_factory=lambda: [1000, 2000, 4000, 8000, 16000])
    full_grid: List[int] = Field(default_factory=lambda: [100_000, 300_000, 500_000, 1_000_000, 1_500_000])
    repeats: int = Field(default=3, ge=1)

    @field_validator("sizes", "full_grid")
    @classmethod
    def validate_sizes(cls, v: List[int]) -> List[int]:
        if not v or any(b <= a for a, b in zip(v, v[1:])) or v[0] < 1:
            raise ValueError("sizes must be positive and strictly increasing")
        return v


class LoggingConfig(BaseModel):
    """Logging configuration."""
    level: str = Field(default="INFO", description="Logging level")
    format: str = Field(default="%(asctime)s - %(name)s - %(levelname)s - %(message)s", description="Log format")
    file: Optional[str] = Field(default=None, description="Log file path")


class AppConfig(BaseModel):
    """Main application configuration."""
    seed: int = Field(default=42, description="Random seed for reproducibility")
    study: StudyConfig = Field(default_factory=StudyConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    clustering: ClusteringConfig = Field(default_factory=ClusteringConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        return self.model_dump(mode="json")


class RunConfig(BaseModel):
    """One CLI invocation: subcommand, paths and the effective app config."""
    subcommand: Literal["simulate", "translate", "fit", "assign", "bench"]
    input: Optional[str] = None
    output_dir: Optional[str] = None
    config_path: Optional[str] = None
    app: AppConfig = Field(default_factory=AppConfig)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class EventRule(BaseModel):
    """Maps a claim (kind, place code, type code) to an event label; empty code sets match anything."""
    record_kind: RecordKind
    place_codes: List[str] = Field(default_factory=list)
    type_codes: List[str] = Field(default_factory=list)
    label: str

    def matches(self, record_kind: str, place_code: str, type_code: str) -> bool:
        return (
            record_kind == self.record_kind
            and (not self.place_codes or place_code in self.place_codes)
            and (not self.type_codes or type_code in self.type_codes)
        )

    def overlaps(self, other: "EventRule") -> bool:
        def codes_overlap(a: List[str], b: List[str]) -> bool:
            return not a or not b or bool(set(a) & set(b))

        return (
            self.record_kind == other.record_kind
            and codes_overlap(self.place_codes, other.place_codes)
            and codes_overlap(self.type_codes, other.type_codes)
        )


class MappingConfig(BaseModel):
    """Claim-to-event translation table and cohort filters."""
    schema_: Literal["careprofiles/mapping/v1"] = Field(default=MAPPING_SCHEMA, alias="schema")
    labels: List[str] = Field(default_factory=lambda: list(DEFAULT_LABELS))
    diagnosis_allowlist: List[str] = Field(..., min_length=1, description="Diagnosis code prefixes")
    event_map: List[EventRule] = Field(..., min_length=1)
    rx_drug_allowlist: List[str] = Field(..., min_length=1)
    rx_label: str = "RX"
    study_start: date
    study_end: date
    min_age: int = Field(default=4, ge=0)
    max_age: int = Field(default=18, ge=0)
    min_eligible_years: int = Field(default=4, ge=0)
    same_day_priority: List[str] = Field(default_factory=lambda: ["HO", "ER", "CL", "NP", "PO", "RX"])

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def validate_mapping(self) -> "MappingConfig":
        if self.study_end <= self.study_start:
            raise ValueError("study_end must be after study_start")
        if self.max_age < self.min_age:
            raise ValueError("max_age must be at least min_age")
        known = set(self.labels)
        targets = [rule.label for rule in self.event_map] + [self.rx_label]
        missing = sorted(set(targets) - known)
        if missing:
            raise ValueError(f"rules target labels outside the state space: {missing}")
        for i, rule in enumerate(self.event_map):
            if rule.record_kind == "RX":
                raise ValueError("RX records are mapped through rx_drug_allowlist, not event_map")
            for later in self.event_map[i + 1:]:
                if rule.overlaps(later):
                    raise ValueError(f"event rules overlap: {rule.label} and {later.label}")
        return self

    def label_for(self, record_kind: str, place_code: str, type_code: str) -> Optional[str]:
        for rule in self.event_map:
            if rule.matches(record_kind, place_code, type_code):
                return rule.label
        return None


class GeneratorProfile(BaseModel):
    """One planted profile: weight, initial distribution, transition rows, mean interarrivals."""
    name: str
    weight: float = Field(..., gt=0.0)
    initial: Dict[str, float]
    transitions: Dict[str, Dict[str, float]]
    mean_interarrival_months: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    default_mean_interarrival_months: float = Field(default=2.0, gt=0.0)

    @field_validator("initial")
    @classmethod
    def validate_initial(cls, v: Dict[str, float]) -> Dict[str, float]:
        if RC_LABEL in v or LC_LABEL in v:
            raise ValueError("initial distribution covers real states only")
        return v


class GeneratorSpec(BaseModel):
    """Planted MRP mixture used by the simulator."""
    schema_: Literal["careprofiles/generator/v1"] = Field(default=GENERATOR_SCHEMA, alias="schema")
    labels: List[str] = Field(default_factory=lambda: list(DEFAULT_LABELS))
    profiles: List[GeneratorProfile] = Field(..., min_length=1)
    study_start: date = date(2005, 1, 1)
    study_end: date = date(2009, 12, 31)
    first_event_window_months: float = Field(default=12.0, ge=0.0)
    max_events: Optional[int] = Field(default=None, ge=1)
    day_resolution: bool = Field(default=True, description="Arrival times on whole days, at least one day apart")
    seed: int = 42

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def validate_spec(self) -> "GeneratorSpec":
        total = sum(p.weight for p in self.profiles)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"profile weights must sum to 1, got {total}")
        if self.study_end <= self.study_start:
            raise ValueError("study_end must be after study_start")
        return self
