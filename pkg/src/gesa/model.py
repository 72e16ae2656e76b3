"""Domain types, dataset validation, and the canonical `.gesa.json` format.

Every other module consumes these types. Datasets are immutable after load;
validation is a pure function returning a report instead of raising.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence


class DatasetFormatError(ValueError):
    """Raised when a dataset document cannot be parsed at all.

    Distinct from a validation failure: a readable dataset with broken
    invariants yields a non-empty validation report, not an exception.
    """


@dataclass(frozen=True)
class Entity:
    """Named entity (skill, organization, location, domain)."""

    id: str
    name: str
    text: str = ""


@dataclass(frozen=True)
class DemographicProfile:
    """Group memberships keyed by category name (gender, region, ...).

    Categories are open vocabularies declared in the dataset header; each
    category appears at most once per profile.
    """

    group_memberships: Mapping[str, str] = field(default_factory=dict)

    def label(self, category: str) -> str | None:
        return self.group_memberships.get(category)


@dataclass(frozen=True)
class Candidate:
    id: str
    skill_ids: tuple[str, ...] = ()
    org_id: str = ""
    location_id: str = ""
    domain_id: str = ""
    free_text: str = ""
    preferences: tuple[str, ...] = ()
    demographics: DemographicProfile = field(default_factory=DemographicProfile)


@dataclass(frozen=True)
class Role:
    id: str
    required_skill_ids: tuple[str, ...] = ()
    org_id: str = ""
    location_id: str = ""
    domain_id: str = ""
    free_text: str = ""
    capacity: int = 1


@dataclass(frozen=True)
class Interaction:
    candidate_id: str
    role_id: str
    outcome: int


@dataclass(frozen=True)
class Dataset:
    """Full allocation ecosystem snapshot.

    `demographic_categories` maps category name to its label vocabulary.
    `ground_truth` holds planted or annotated correct (candidate, role) pairs.
    """

    candidates: tuple[Candidate, ...] = ()
    roles: tuple[Role, ...] = ()
    skills: tuple[Entity, ...] = ()
    organizations: tuple[Entity, ...] = ()
    locations: tuple[Entity, ...] = ()
    domains: tuple[Entity, ...] = ()
    demographic_categories: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    interactions: tuple[Interaction, ...] = ()
    ground_truth: tuple[tuple[str, str], ...] = ()

    def candidate_by_id(self) -> dict[str, Candidate]:
        return {c.id: c for c in self.candidates}

    def role_by_id(self) -> dict[str, Role]:
        return {r.id: r for r in self.roles}

    def skill_by_id(self) -> dict[str, Entity]:
        return {s.id: s for s in self.skills}


@dataclass(frozen=True)
class ObjectiveVector:
    """Scores of one plan: merit f1, diversity f2, preference f3."""

    merit: float
    diversity: float
    preference: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.merit, self.diversity, self.preference)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_tuple())


@dataclass
class AllocationPlan:
    """Partial assignment of candidates to roles.

    Unassigned candidates are simply absent from `assignments`. A plan that
    exceeds a role capacity must be flagged infeasible by its producer.
    """

    assignments: dict[str, str] = field(default_factory=dict)
    objective_values: ObjectiveVector | None = None
    violations: list[tuple[str, float]] = field(default_factory=list)
    infeasible: bool = False

    def assigned_to(self, role_id: str) -> list[str]:
        return sorted(c for c, r in self.assignments.items() if r == role_id)

    def copy(self) -> "AllocationPlan":
        return AllocationPlan(
            assignments=dict(self.assignments),
            objective_values=self.objective_values,
            violations=list(self.violations),
            infeasible=self.infeasible,
        )


@dataclass(frozen=True)
class CapacityConstraint:
    role_id: str
    capacity: int

    @property
    def constraint_id(self) -> str:
        return f"capacity:{self.role_id}"


@dataclass(frozen=True)
class FloorConstraint:
    """Minimum number of selected candidates from one demographic subcategory."""

    category: str
    label: str
    minimum: int

    @property
    def constraint_id(self) -> str:
        return f"floor:{self.category}:{self.label}"


@dataclass(frozen=True)
class QuotaConstraint:
    """Exact number of selected candidates from one demographic subcategory."""

    category: str
    label: str
    target: int

    @property
    def constraint_id(self) -> str:
        return f"quota:{self.category}:{self.label}"


@dataclass(frozen=True)
class ConstraintSet:
    """Inequality constraints (capacities, floors) and equality quotas."""

    capacities: tuple[CapacityConstraint, ...] = ()
    floors: tuple[FloorConstraint, ...] = ()
    quotas: tuple[QuotaConstraint, ...] = ()

    @property
    def m(self) -> int:
        return len(self.capacities) + len(self.floors)

    @property
    def p(self) -> int:
        return len(self.quotas)

    @staticmethod
    def for_dataset(
        dataset: Dataset,
        floors: Sequence[FloorConstraint] = (),
        quotas: Sequence[QuotaConstraint] = (),
    ) -> "ConstraintSet":
        """Build the constraint set, always including one capacity per role."""
        caps = tuple(CapacityConstraint(r.id, r.capacity) for r in dataset.roles)
        total = sum(r.capacity for r in dataset.roles)
        for q in quotas:
            if q.target > total:
                raise ValueError(
                    f"quota target {q.target} for {q.constraint_id} exceeds "
                    f"total selection size {total}"
                )
        return ConstraintSet(capacities=caps, floors=tuple(floors), quotas=tuple(quotas))


@dataclass(frozen=True)
class ValidationIssue:
    entity_id: str
    reason: str

    def __str__(self) -> str:
        return f"{self.entity_id}: {self.reason}"


def _check_unique(items, kind: str, issues: list[ValidationIssue]) -> None:
    seen: set[str] = set()
    for item in items:
        if not item.id:
            issues.append(ValidationIssue(f"<{kind}>", f"{kind} with empty id"))
        elif item.id in seen:
            issues.append(ValidationIssue(item.id, f"duplicate {kind} id"))
        seen.add(item.id)


def validate_dataset(dataset: Dataset) -> list[ValidationIssue]:
    """Enumerate every broken invariant; an empty report means valid.

    Pure and idempotent: the dataset is never modified.
    """
    issues: list[ValidationIssue] = []

    _check_unique(dataset.candidates, "candidate", issues)
    _check_unique(dataset.roles, "role", issues)
    _check_unique(dataset.skills, "skill", issues)
    _check_unique(dataset.organizations, "organization", issues)
    _check_unique(dataset.locations, "location", issues)
    _check_unique(dataset.domains, "domain", issues)

    skill_ids = {s.id for s in dataset.skills}
    org_ids = {o.id for o in dataset.organizations}
    loc_ids = {l.id for l in dataset.locations}
    dom_ids = {d.id for d in dataset.domains}
    cand_ids = {c.id for c in dataset.candidates}
    role_ids = {r.id for r in dataset.roles}

    def check_ref(owner: str, ref: str, pool: set[str], kind: str) -> None:
        if ref and ref not in pool:
            issues.append(ValidationIssue(owner, f"references unknown {kind} {ref!r}"))

    for c in dataset.candidates:
        for sid in c.skill_ids:
            check_ref(c.id, sid, skill_ids, "skill")
        check_ref(c.id, c.org_id, org_ids, "organization")
        check_ref(c.id, c.location_id, loc_ids, "location")
        check_ref(c.id, c.domain_id, dom_ids, "domain")
        seen_prefs: set[str] = set()
        for rid in c.preferences:
            check_ref(c.id, rid, role_ids, "role")
            if rid in seen_prefs:
                issues.append(ValidationIssue(c.id, f"duplicate preference {rid!r}"))
            seen_prefs.add(rid)
        for category, label in c.demographics.group_memberships.items():
            vocab = dataset.demographic_categories.get(category)
            if vocab is None:
                issues.append(ValidationIssue(c.id, f"undeclared demographic category {category!r}"))
            elif label not in vocab:
                issues.append(
                    ValidationIssue(c.id, f"label {label!r} not in vocabulary of {category!r}")
                )

    for r in dataset.roles:
        if r.capacity < 1:
            issues.append(ValidationIssue(r.id, f"capacity must be >= 1, got {r.capacity}"))
        if not r.required_skill_ids:
            issues.append(ValidationIssue(r.id, "role requires no skills"))
        for sid in r.required_skill_ids:
            check_ref(r.id, sid, skill_ids, "skill")
        check_ref(r.id, r.org_id, org_ids, "organization")
        check_ref(r.id, r.location_id, loc_ids, "location")
        check_ref(r.id, r.domain_id, dom_ids, "domain")

    for i, it in enumerate(dataset.interactions):
        owner = f"interaction[{i}]"
        check_ref(owner, it.candidate_id, cand_ids, "candidate")
        check_ref(owner, it.role_id, role_ids, "role")
        if it.outcome not in (0, 1):
            issues.append(ValidationIssue(owner, f"outcome must be 0 or 1, got {it.outcome}"))

    for i, (cid, rid) in enumerate(dataset.ground_truth):
        owner = f"ground_truth[{i}]"
        check_ref(owner, cid, cand_ids, "candidate")
        check_ref(owner, rid, role_ids, "role")

    return issues


# ---------------------------------------------------------------------------
# Canonical `.gesa.json` serialization
# ---------------------------------------------------------------------------

def _entity_to_dict(e: Entity) -> dict:
    return {"id": e.id, "name": e.name, "text": e.text}


def _candidate_to_dict(c: Candidate) -> dict:
    return {
        "id": c.id,
        "skill_ids": list(c.skill_ids),
        "org_id": c.org_id,
        "location_id": c.location_id,
        "domain_id": c.domain_id,
        "free_text": c.free_text,
        "preferences": list(c.preferences),
        "demographics": dict(sorted(c.demographics.group_memberships.items())),
    }


def _role_to_dict(r: Role) -> dict:
    return {
        "id": r.id,
        "required_skill_ids": list(r.required_skill_ids),
        "org_id": r.org_id,
        "location_id": r.location_id,
        "domain_id": r.domain_id,
        "free_text": r.free_text,
        "capacity": r.capacity,
    }


def dataset_to_dict(dataset: Dataset) -> dict:
    """Canonical dict form: entities sorted by id, categories sorted by name."""
    return {
        "candidates": [_candidate_to_dict(c) for c in sorted(dataset.candidates, key=lambda x: x.id)],
        "roles": [_role_to_dict(r) for r in sorted(dataset.roles, key=lambda x: x.id)],
        "skills": [_entity_to_dict(s) for s in sorted(dataset.skills, key=lambda x: x.id)],
        "organizations": [_entity_to_dict(o) for o in sorted(dataset.organizations, key=lambda x: x.id)],
        "locations": [_entity_to_dict(l) for l in sorted(dataset.locations, key=lambda x: x.id)],
        "domains": [_entity_to_dict(d) for d in sorted(dataset.domains, key=lambda x: x.id)],
        "demographic_categories": {
            k: list(v) for k, v in sorted(dataset.demographic_categories.items())
        },
        "interactions": [
            {"candidate_id": it.candidate_id, "role_id": it.role_id, "outcome": it.outcome}
            for it in dataset.interactions
        ],
        "ground_truth": [[cid, rid] for cid, rid in dataset.ground_truth],
    }


def dataset_to_json(dataset: Dataset) -> str:
    return canonical_json(dataset_to_dict(dataset))


def canonical_json(doc) -> str:
    """Stable text form: sorted keys, no float noise, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _require(doc: Mapping, key: str):
    if key not in doc:
        raise DatasetFormatError(f"missing top-level field {key!r}")
    return doc[key]


def dataset_from_dict(doc: Mapping) -> Dataset:
    if not isinstance(doc, Mapping):
        raise DatasetFormatError("dataset document must be a JSON object")
    try:
        candidates = tuple(
            Candidate(
                id=str(c["id"]),
                skill_ids=tuple(c.get("skill_ids", ())),
                org_id=c.get("org_id", ""),
                location_id=c.get("location_id", ""),
                domain_id=c.get("domain_id", ""),
                free_text=c.get("free_text", ""),
                preferences=tuple(c.get("preferences", ())),
                demographics=DemographicProfile(dict(c.get("demographics", {}))),
            )
            for c in _require(doc, "candidates")
        )
        roles = tuple(
            Role(
                id=str(r["id"]),
                required_skill_ids=tuple(r.get("required_skill_ids", ())),
                org_id=r.get("org_id", ""),
                location_id=r.get("location_id", ""),
                domain_id=r.get("domain_id", ""),
                free_text=r.get("free_text", ""),
                capacity=int(r.get("capacity", 1)),
            )
            for r in _require(doc, "roles")
        )

        def entities(key: str) -> tuple[Entity, ...]:
            return tuple(
                Entity(id=str(e["id"]), name=e.get("name", ""), text=e.get("text", ""))
                for e in _require(doc, key)
            )

        return Dataset(
            candidates=candidates,
            roles=roles,
            skills=entities("skills"),
            organizations=entities("organizations"),
            locations=entities("locations"),
            domains=entities("domains"),
            demographic_categories={
                str(k): tuple(v) for k, v in _require(doc, "demographic_categories").items()
            },
            interactions=tuple(
                Interaction(str(i["candidate_id"]), str(i["role_id"]), int(i["outcome"]))
                for i in doc.get("interactions", ())
            ),
            ground_truth=tuple((str(p[0]), str(p[1])) for p in doc.get("ground_truth", ())),
        )
    except DatasetFormatError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DatasetFormatError(f"malformed dataset document: {exc}") from exc


def dataset_from_json(text: str) -> Dataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"not valid JSON: {exc}") from exc
    return dataset_from_dict(doc)


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return dataset_from_json(fh.read())


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dataset_to_json(dataset))


def plan_to_dict(plan: AllocationPlan) -> dict:
    doc: dict = {
        "assignments": dict(sorted(plan.assignments.items())),
        "violations": [[cid, mag] for cid, mag in plan.violations],
        "infeasible": plan.infeasible,
    }
    if plan.objective_values is not None:
        o = plan.objective_values
        doc["objective_values"] = {
            "merit": o.merit,
            "diversity": o.diversity,
            "preference": o.preference,
        }
    return doc


def plan_from_dict(doc: Mapping) -> AllocationPlan:
    obj = None
    if "objective_values" in doc and doc["objective_values"] is not None:
        ov = doc["objective_values"]
        obj = ObjectiveVector(float(ov["merit"]), float(ov["diversity"]), float(ov["preference"]))
    return AllocationPlan(
        assignments={str(k): str(v) for k, v in doc.get("assignments", {}).items()},
        objective_values=obj,
        violations=[(str(c), float(m)) for c, m in doc.get("violations", ())],
        infeasible=bool(doc.get("infeasible", False)),
    )
