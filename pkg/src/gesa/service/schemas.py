"""Request and response bodies for the review service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field, field_validator


class TokenBody(BaseModel):
    # Client-supplied token making a retried mutation return the first
    # response instead of acting twice.
    request_token: str | None = None


class CategoryBody(BaseModel):
    name: str
    labels: list[str]
    probabilities: list[float]


class GenerateRequest(TokenBody):
    candidates: int = 100
    roles: int = 10
    skills: int = 30
    organizations: int = 5
    locations: int = 5
    domains: int = 3
    skills_per_candidate: tuple[int, int] = (2, 6)
    skills_per_role: tuple[int, int] = (2, 4)
    categories: list[CategoryBody] | None = None
    bias_strength: float = 0.0
    preference_list_length: int = 3
    seed: int = 0

    def gen_doc(self) -> dict:
        doc = self.model_dump(exclude={"request_token"}, exclude_none=True)
        return doc


class ConstraintBody(BaseModel):
    category: str
    label: str
    count: int = Field(ge=0)


class AllocationRequest(TokenBody):
    dataset_id: str
    population: int = 40
    max_generations: int = 30
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    penalty: float = 1.0
    rho: float = 0.25
    seed: int = 0
    embed_dim: int = 64
    merit_weights: tuple[float, float, float] | None = None
    floors: list[ConstraintBody] = []
    quotas: list[ConstraintBody] = []


class SelectRequest(TokenBody):
    # Omitted weights fall back to the feedback loop's current weights.
    weights: tuple[float, float, float] | None = None
    mandatory: list[str] = []


class OverrideRequest(TokenBody):
    candidate_id: str
    to_role: str | None = None  # None unassigns the candidate
    justification: str
    actor: str = "admin"
    reason: str = "unspecified"

    @field_validator("justification")
    @classmethod
    def _non_empty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("justification must not be empty")
        return v


class FeedbackRequest(TokenBody):
    weights: tuple[float, float, float]
    eta: float | None = Field(default=None, gt=0, le=1)


class DatasetCreated(BaseModel):
    dataset_id: str


class DatasetSummary(BaseModel):
    dataset_id: str
    candidates: int
    roles: int
    skills: int
    total_capacity: int
    demographic_categories: dict[str, list[str]]
    ground_truth_pairs: int
    dataset: dict[str, Any]


class JobCreated(BaseModel):
    job_id: str


class JobStatus(BaseModel):
    job_id: str
    dataset_id: str
    status: str
    error: str | None = None
    created_at: str
    finished_at: str | None = None


class ObjectivesBody(BaseModel):
    merit: float
    diversity: float
    preference: float


class FrontMember(BaseModel):
    index: int
    assignments: dict[str, str]
    objectives: ObjectivesBody
    violations: list[tuple[str, float]]
    feasible: bool


class HistoryRow(BaseModel):
    generation: int
    front1_size: int
    hypervolume: float
    diversity_weight: float
    violations: int


class FrontPayload(BaseModel):
    job_id: str
    diversity_weight: float
    escalations: list[int]
    members: list[FrontMember]
    history: list[HistoryRow]


class SelectionPayload(BaseModel):
    job_id: str
    policy_weights: tuple[float, float, float]
    mandatory: list[str]
    selection_epoch: int
    assignments: dict[str, str]
    objectives: ObjectivesBody
    violations: list[tuple[str, float]]
    overrides_applied: int


class OverrideAck(BaseModel):
    applied: bool
    record: dict[str, Any]
    selection: SelectionPayload


class FairnessPayload(BaseModel):
    job_id: str
    per_category: dict[str, dict[str, float]]
    demographic_parity: float
    equalized_opportunity: float
    calibration: float
    composite: float


class FeedbackPayload(BaseModel):
    weights: tuple[float, float, float]
    eta: float
    override_counts: dict[str, int]


class ExplanationPayload(BaseModel):
    candidate_id: str
    role_id: str
    shap: dict[str, Any]
    executive_summary: list[str]
    comparative: dict[str, Any]
    counterfactual: dict[str, Any]
