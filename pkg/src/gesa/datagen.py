"""Deterministic synthetic dataset generator with controllable bias injection.

All sampling flows through one seeded numpy Generator, so the same spec
always yields the byte-identical canonical dataset. Bias injection ties a
designated demographic subgroup (first label of the first declared category)
to a designated skill cluster: with bias_strength b, subgroup members hold
cluster skills at rate (1+b)/2 and everyone else at rate (1-b)/2, giving an
empirical rate gap of b. The same strength also skews profile vocabulary so
that bias is visible to text encoders, not only to skill lists.

Ground-truth matches are planted post-hoc: a (candidate, role) pair is a
true match when required-skill coverage is at least 0.75 and the domains
agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gesa.model import (
    Candidate,
    Dataset,
    DemographicProfile,
    Entity,
    Interaction,
    Role,
    validate_dataset,
)

GROUND_TRUTH_COVERAGE = 0.75

# Vocabulary pools for free text. Two interest pools let bias_strength skew
# what candidates write about, mirroring how real profile text leaks
# demographics even when skill lists are scrubbed.
_WORK_WORDS = (
    "analysis", "design", "planning", "coordination", "evaluation", "modeling",
    "development", "operations", "strategy", "mentoring", "fieldwork", "reporting",
)
_INTEREST_POOL_A = (
    "robotics", "astronomy", "chess", "climbing", "cartography", "orchestras",
)
_INTEREST_POOL_B = (
    "gardening", "pottery", "sailing", "folklore", "calligraphy", "archery",
)


@dataclass(frozen=True)
class CategorySpec:
    """One demographic category: labels with marginal probabilities."""

    name: str
    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.probabilities):
            raise ValueError(f"category {self.name!r}: labels/probabilities length mismatch")
        if len(self.labels) < 2:
            raise ValueError(f"category {self.name!r} needs at least two labels")
        if any(p < 0 for p in self.probabilities):
            raise ValueError(f"category {self.name!r}: negative probability")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError(f"category {self.name!r}: probabilities must sum to 1")


@dataclass(frozen=True)
class GenSpec:
    """Counts, distributions, demographic structure, bias level, and seed."""

    candidates: int = 100
    roles: int = 10
    skills: int = 30
    organizations: int = 5
    locations: int = 5
    domains: int = 3
    skills_per_candidate: tuple[int, int] = (2, 6)
    skills_per_role: tuple[int, int] = (2, 4)
    categories: tuple[CategorySpec, ...] = (
        CategorySpec("gender", ("g0", "g1"), (0.5, 0.5)),
        CategorySpec("region", ("north", "south", "east"), (0.4, 0.35, 0.25)),
    )
    bias_strength: float = 0.0
    preference_list_length: int = 3
    seed: int = 0

    def __post_init__(self):
        counts = {
            "candidates": self.candidates,
            "roles": self.roles,
            "skills": self.skills,
            "organizations": self.organizations,
            "locations": self.locations,
            "domains": self.domains,
        }
        for name, n in counts.items():
            if n < 1:
                raise ValueError(f"{name} count must be >= 1, got {n}")
        if not 0.0 <= self.bias_strength <= 1.0:
            raise ValueError(f"bias_strength must lie in [0, 1], got {self.bias_strength}")
        for lo, hi in (self.skills_per_candidate, self.skills_per_role):
            if not 1 <= lo <= hi:
                raise ValueError("skill count ranges must satisfy 1 <= lo <= hi")
        if self.skills_per_role[1] > self.skills:
            raise ValueError(
                f"roles require up to {self.skills_per_role[1]} skills "
                f"but only {self.skills} exist"
            )
        if self.skills_per_candidate[1] > self.skills:
            raise ValueError("candidates cannot hold more skills than exist")
        if not self.categories:
            raise ValueError("at least one demographic category is required")
        if self.preference_list_length < 1:
            raise ValueError("preference lists need at least one entry")

    @staticmethod
    def from_dict(doc: dict) -> "GenSpec":
        cats = tuple(
            CategorySpec(c["name"], tuple(c["labels"]), tuple(c["probabilities"]))
            for c in doc.get("categories", [])
        ) or GenSpec.__dataclass_fields__["categories"].default
        kwargs = {
            k: doc[k]
            for k in (
                "candidates", "roles", "skills", "organizations", "locations",
                "domains", "bias_strength", "preference_list_length", "seed",
            )
            if k in doc
        }
        for k in ("skills_per_candidate", "skills_per_role"):
            if k in doc:
                kwargs[k] = tuple(doc[k])
        return GenSpec(categories=cats, **kwargs)

    @staticmethod
    def load(path) -> "GenSpec":
        return GenSpec.from_dict(json.loads(Path(path).read_text()))


def _zero_pad(prefix: str, i: int, total: int) -> str:
    width = len(str(total - 1))
    return f"{prefix}{i:0{width}d}"


def _skill_words(rng: np.random.Generator) -> str:
    # Two-word synthetic skill names keep text embeddings non-trivial.
    a = rng.choice(["applied", "advanced", "basic", "field", "formal", "broad"])
    b = rng.choice(
        ["synthesis", "inference", "tooling", "survey", "logic", "routing",
         "parsing", "forecasting", "assembly", "curation", "triage", "audit"]
    )
    return f"{a} {b}"


def generate_dataset(spec: GenSpec) -> Dataset:
    """Sample a complete dataset from one seeded stream; always validates."""
    rng = np.random.default_rng(spec.seed)

    skills = tuple(
        Entity(_zero_pad("s", i, spec.skills), _skill_words(rng))
        for i in range(spec.skills)
    )
    orgs = tuple(
        Entity(_zero_pad("o", i, spec.organizations), f"org {i}")
        for i in range(spec.organizations)
    )
    locs = tuple(
        Entity(_zero_pad("l", i, spec.locations), f"site {i}")
        for i in range(spec.locations)
    )
    doms = tuple(
        Entity(_zero_pad("d", i, spec.domains), f"domain {i}")
        for i in range(spec.domains)
    )

    # Every skill belongs to one domain; the bias cluster is ~25% of skills,
    # all drawn from domain 0.
    skill_domain = rng.integers(0, spec.domains, size=spec.skills)
    cluster_size = max(1, spec.skills // 4)
    cluster = set(range(cluster_size))
    skill_domain[:cluster_size] = 0
    domain_skills: list[list[int]] = [[] for _ in range(spec.domains)]
    for si, di in enumerate(skill_domain):
        domain_skills[di].append(si)
    non_cluster = [i for i in range(spec.skills) if i not in cluster]
    if not non_cluster:
        raise ValueError("spec leaves no skills outside the bias cluster")

    designated = spec.categories[0]
    subgroup_label = designated.labels[0]
    b = spec.bias_strength

    candidates = []
    for i in range(spec.candidates):
        cid = _zero_pad("c", i, spec.candidates)
        memberships = {}
        for cat in spec.categories:
            memberships[cat.name] = str(rng.choice(cat.labels, p=cat.probabilities))
        in_subgroup = memberships[designated.name] == subgroup_label

        # Cluster-skill holding rate: (1+b)/2 for the subgroup, (1-b)/2 for
        # the rest, so the empirical gap is b.
        hold_p = (1.0 + b) / 2.0 if in_subgroup else (1.0 - b) / 2.0
        holds_cluster = rng.random() < hold_p

        n_skills = int(rng.integers(spec.skills_per_candidate[0], spec.skills_per_candidate[1] + 1))
        if holds_cluster:
            first = int(rng.choice(sorted(cluster)))
            rest_n = min(n_skills - 1, len(non_cluster))
            rest = rng.choice(non_cluster, size=rest_n, replace=False) if rest_n else []
            skill_idx = [first, *map(int, rest)]
        else:
            n = min(n_skills, len(non_cluster))
            skill_idx = [int(x) for x in rng.choice(non_cluster, size=n, replace=False)]
        skill_idx = sorted(set(skill_idx))

        # Interest vocabulary skewed toward the own-group pool by the same
        # strength; at b=0 both pools are equally likely.
        own_pool = _INTEREST_POOL_A if in_subgroup else _INTEREST_POOL_B
        other_pool = _INTEREST_POOL_B if in_subgroup else _INTEREST_POOL_A
        own_p = min(1.0, 0.5 + b)
        interests = [
            str(rng.choice(own_pool)) if rng.random() < own_p else str(rng.choice(other_pool))
            for _ in range(3)
        ]
        work = [str(w) for w in rng.choice(_WORK_WORDS, size=3, replace=False)]
        free_text = " ".join(work + interests)

        candidates.append(
            dict(
                id=cid,
                skill_idx=skill_idx,
                org=int(rng.integers(0, spec.organizations)),
                loc=int(rng.integers(0, spec.locations)),
                dom=int(rng.integers(0, spec.domains)),
                text=free_text,
                memberships=memberships,
            )
        )

    roles = []
    for i in range(spec.roles):
        rid = _zero_pad("r", i, spec.roles)
        dom = int(rng.integers(0, spec.domains))
        pool = domain_skills[dom] if len(domain_skills[dom]) >= spec.skills_per_role[0] else list(range(spec.skills))
        n_req = int(rng.integers(spec.skills_per_role[0], spec.skills_per_role[1] + 1))
        n_req = min(n_req, len(pool))
        req = sorted(int(x) for x in rng.choice(pool, size=n_req, replace=False))
        capacity = int(rng.integers(1, max(2, spec.candidates // max(1, spec.roles)) + 1))
        work = [str(w) for w in rng.choice(_WORK_WORDS, size=3, replace=False)]
        roles.append(
            dict(
                id=rid,
                req=req,
                org=int(rng.integers(0, spec.organizations)),
                loc=int(rng.integers(0, spec.locations)),
                dom=dom,
                text=" ".join(work),
                capacity=capacity,
            )
        )

    # Preferences lean toward same-domain roles (2:1 odds when available).
    role_ids = [r["id"] for r in roles]
    pref_len = min(spec.preference_list_length, spec.roles)
    for c in candidates:
        same = [r["id"] for r in roles if r["dom"] == c["dom"]]
        other = [r["id"] for r in roles if r["dom"] != c["dom"]]
        prefs: list[str] = []
        while len(prefs) < pref_len:
            pick_same = same and (not other or rng.random() < 2 / 3)
            pool = same if pick_same else other
            choice = str(rng.choice(pool))
            pool.remove(choice)
            prefs.append(choice)
        c["prefs"] = prefs

    # Plant ground truth, then derive interactions from it.
    ground_truth = []
    for c in candidates:
        held = set(c["skill_idx"])
        for r in roles:
            if r["dom"] != c["dom"]:
                continue
            coverage = len(held & set(r["req"])) / len(r["req"])
            if coverage >= GROUND_TRUTH_COVERAGE:
                ground_truth.append((c["id"], r["id"]))

    interactions = []
    gt_set = set(ground_truth)
    for cid, rid in ground_truth:
        if rng.random() < 0.6:
            interactions.append(Interaction(cid, rid, 1))
    n_negative = len(interactions)
    attempts = 0
    while len(interactions) < 2 * n_negative and attempts < 20 * max(1, n_negative):
        attempts += 1
        c = candidates[int(rng.integers(0, spec.candidates))]
        rid = str(rng.choice(role_ids))
        if (c["id"], rid) not in gt_set:
            interactions.append(Interaction(c["id"], rid, 0))

    skill_ids = [s.id for s in skills]
    dataset = Dataset(
        candidates=tuple(
            Candidate(
                id=c["id"],
                skill_ids=tuple(skill_ids[i] for i in c["skill_idx"]),
                org_id=orgs[c["org"]].id,
                location_id=locs[c["loc"]].id,
                domain_id=doms[c["dom"]].id,
                free_text=c["text"],
                preferences=tuple(c["prefs"]),
                demographics=DemographicProfile(c["memberships"]),
            )
            for c in candidates
        ),
        roles=tuple(
            Role(
                id=r["id"],
                required_skill_ids=tuple(skill_ids[i] for i in r["req"]),
                org_id=orgs[r["org"]].id,
                location_id=locs[r["loc"]].id,
                domain_id=doms[r["dom"]].id,
                free_text=r["text"],
                capacity=r["capacity"],
            )
            for r in roles
        ),
        skills=skills,
        organizations=orgs,
        locations=locs,
        domains=doms,
        demographic_categories={c.name: c.labels for c in spec.categories},
        interactions=tuple(interactions),
        ground_truth=tuple(sorted(ground_truth)),
    )

    issues = validate_dataset(dataset)
    if issues:
        raise RuntimeError(f"generator produced an invalid dataset: {issues[:3]}")
    return dataset


def cluster_skill_ids(spec: GenSpec) -> tuple[str, ...]:
    """Ids of the designated bias-cluster skills (first quarter by index)."""
    cluster_size = max(1, spec.skills // 4)
    return tuple(_zero_pad("s", i, spec.skills) for i in range(cluster_size))


def subgroup_rate_gap(dataset: Dataset, spec: GenSpec) -> float:
    """Empirical cluster-skill-holding rate difference between the designated
    subgroup and everyone else. Diagnostic for the bias dial."""
    cluster = set(cluster_skill_ids(spec))
    cat = spec.categories[0].name
    label = spec.categories[0].labels[0]
    in_rates, out_rates = [], []
    for c in dataset.candidates:
        holds = 1.0 if cluster & set(c.skill_ids) else 0.0
        (in_rates if c.demographics.label(cat) == label else out_rates).append(holds)
    if not in_rates or not out_rates:
        raise ValueError("one subgroup is empty; gap undefined")
    return float(np.mean(in_rates) - np.mean(out_rates))
