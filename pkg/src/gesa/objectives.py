"""The three allocation objectives and constraint evaluation.

f1 rewards merit (a convex combination of semantic, graph, and skill
similarity per assigned pair, averaged so plans of different sizes stay
comparable), f2 rewards demographic entropy over the selected candidates,
f3 rewards satisfied preference ranks. Constraint evaluation reports only
violated constraints, each with a positive magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from gesa.model import (
    AllocationPlan,
    Candidate,
    ConstraintSet,
    Dataset,
    DemographicProfile,
    ObjectiveVector,
    Role,
)

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class MeritWeights:
    """Weights for the semantic / graph / skill merit terms; must sum to 1."""

    alpha: float = 0.5
    beta: float = 0.2
    gamma: float = 0.3

    def __post_init__(self):
        total = self.alpha + self.beta + self.gamma
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("merit weights must be non-negative")
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"merit weights must sum to 1, got {total}")


@dataclass(frozen=True)
class DiversitySpec:
    """Diversity categories with weights (summing to 1) and subcategory sets."""

    weights: Mapping[str, float] = field(default_factory=dict)
    subcategories: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.weights:
            raise ValueError("diversity spec needs at least one category")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("category weights must be non-negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"category weights must sum to 1, got {total}")

    @staticmethod
    def uniform(dataset: Dataset) -> "DiversitySpec":
        cats = sorted(dataset.demographic_categories)
        if not cats:
            raise ValueError("dataset declares no demographic categories")
        w = 1.0 / len(cats)
        return DiversitySpec(
            weights={c: w for c in cats},
            subcategories={c: tuple(dataset.demographic_categories[c]) for c in cats},
        )


def skill_match_score(candidate: Candidate, role: Role) -> float:
    """Required-skill coverage in [0, 1]."""
    if not role.required_skill_ids:
        raise ValueError(f"role {role.id!r} has no required skills")
    required = set(role.required_skill_ids)
    held = set(candidate.skill_ids)
    return len(required & held) / len(required)


def merit(weights: MeritWeights, semantic: float, graph: float, skill: float) -> float:
    """Convex combination of the three similarity components."""
    for name, value in (("semantic", semantic), ("graph", graph), ("skill", skill)):
        if not -1e-9 <= value <= 1 + 1e-9:
            raise ValueError(f"{name} similarity {value} outside [0, 1]")
    return weights.alpha * semantic + weights.beta * graph + weights.gamma * skill


def group_entropy(
    profiles: Sequence[DemographicProfile], category: str, spec: DiversitySpec
) -> float:
    """Natural-log entropy of the category's subcategory proportions.

    Proportions are computed over selected candidates that declare the
    category; 0 * ln 0 counts as 0. An empty selection is an error.
    """
    if not profiles:
        raise ValueError("entropy of an empty selection is undefined")
    if category not in spec.weights:
        raise ValueError(f"unknown diversity category {category!r}")
    counts: dict[str, int] = {}
    for p in profiles:
        label = p.label(category)
        if label is not None:
            counts[label] = counts.get(label, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return 0.0
    entropy = 0.0
    for n in counts.values():
        p_i = n / total
        entropy -= p_i * math.log(p_i)
    return entropy


def diversity(profiles: Sequence[DemographicProfile], spec: DiversitySpec) -> float:
    """Weighted sum of per-category entropies over the selected candidates."""
    if not profiles:
        raise ValueError("diversity of an empty plan is undefined")
    return sum(w * group_entropy(profiles, cat, spec) for cat, w in spec.weights.items())


def preference_rank_score(candidate: Candidate, role_id: str) -> float:
    """Linear rank score: 1 for first choice, 0 for a role not listed."""
    prefs = candidate.preferences
    if role_id not in prefs:
        return 0.0
    if len(prefs) == 1:
        return 1.0
    rank = prefs.index(role_id) + 1
    return 1.0 - (rank - 1) / (len(prefs) - 1)


def preference_satisfaction(plan: AllocationPlan, candidates: Mapping[str, Candidate]) -> float:
    """Mean preference rank score over assigned candidates."""
    if not plan.assignments:
        raise ValueError("preference satisfaction of an empty plan is undefined")
    total = 0.0
    for cid, rid in plan.assignments.items():
        total += preference_rank_score(candidates[cid], rid)
    return total / len(plan.assignments)


def evaluate_constraints(
    plan: AllocationPlan,
    constraints: ConstraintSet,
    candidates: Mapping[str, Candidate],
    roles: Mapping[str, Role] | None = None,
) -> list[tuple[str, float]]:
    """Violated constraints as (constraint_id, magnitude > 0); satisfied ones
    are omitted."""
    violations: list[tuple[str, float]] = []

    role_counts: dict[str, int] = {}
    for cid, rid in plan.assignments.items():
        if cid not in candidates:
            raise ValueError(f"plan references unknown candidate {cid!r}")
        role_counts[rid] = role_counts.get(rid, 0) + 1

    known_roles = {c.role_id for c in constraints.capacities}
    for rid in role_counts:
        if rid not in known_roles and (roles is None or rid not in roles):
            raise ValueError(f"plan references unknown role {rid!r}")

    for cap in constraints.capacities:
        overflow = role_counts.get(cap.role_id, 0) - cap.capacity
        if overflow > 0:
            violations.append((cap.constraint_id, float(overflow)))

    def group_count(category: str, label: str) -> int:
        n = 0
        for cid in plan.assignments:
            if candidates[cid].demographics.label(category) == label:
                n += 1
        return n

    for floor in constraints.floors:
        shortfall = floor.minimum - group_count(floor.category, floor.label)
        if shortfall > 0:
            violations.append((floor.constraint_id, float(shortfall)))

    for quota in constraints.quotas:
        gap = abs(group_count(quota.category, quota.label) - quota.target)
        if gap > 0:
            violations.append((quota.constraint_id, float(gap)))

    return violations


@dataclass(frozen=True)
class ObjectiveContext:
    """Everything needed to score a plan: per-pair merit inputs, the
    diversity spec, and candidate lookups."""

    candidates: Mapping[str, Candidate]
    merit_weights: MeritWeights
    semantic: Mapping[tuple[str, str], float]
    graph: Mapping[tuple[str, str], float]
    skill: Mapping[tuple[str, str], float]
    diversity_spec: DiversitySpec

    def pair_merit(self, cid: str, rid: str) -> float:
        key = (cid, rid)
        return merit(
            self.merit_weights, self.semantic[key], self.graph[key], self.skill[key]
        )


def evaluate_objectives(
    plan: AllocationPlan, ctx: ObjectiveContext
) -> tuple[ObjectiveVector, bool]:
    """Score a plan; an empty plan yields (0, 0, 0) with the degenerate flag."""
    if not plan.assignments:
        return ObjectiveVector(0.0, 0.0, 0.0), True
    total_merit = sum(ctx.pair_merit(cid, rid) for cid, rid in plan.assignments.items())
    f1 = total_merit / len(plan.assignments)
    profiles = [ctx.candidates[cid].demographics for cid in plan.assignments]
    f2 = diversity(profiles, ctx.diversity_spec)
    f3 = preference_satisfaction(plan, ctx.candidates)
    return ObjectiveVector(f1, f2, f3), False


def selected_profiles(
    plan: AllocationPlan, candidates: Mapping[str, Candidate]
) -> list[DemographicProfile]:
    return [candidates[cid].demographics for cid in plan.assignments]
