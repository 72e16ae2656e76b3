"""Shared fixtures: small hand-built datasets used across test modules."""

import pytest

from gesa.model import (
    Candidate,
    Dataset,
    DemographicProfile,
    Entity,
    Interaction,
    Role,
)


def make_dataset(
    candidates=None,
    roles=None,
    skills=None,
    interactions=(),
    ground_truth=(),
    demographic_categories=None,
):
    """Dataset with sensible defaults so tests only spell out what they vary."""
    if skills is None:
        skills = (
            Entity("s1", "python"),
            Entity("s2", "statistics"),
            Entity("s3", "writing"),
        )
    orgs = (Entity("o1", "acme"),)
    locs = (Entity("l1", "north"),)
    doms = (Entity("d1", "research"),)
    if demographic_categories is None:
        demographic_categories = {"gender": ("a", "b")}
    if candidates is None:
        candidates = (
            Candidate(
                id="c1",
                skill_ids=("s1", "s2"),
                org_id="o1",
                location_id="l1",
                domain_id="d1",
                free_text="python statistics work",
                preferences=("r1",),
                demographics=DemographicProfile({"gender": "a"}),
            ),
        )
    if roles is None:
        roles = (
            Role(
                id="r1",
                required_skill_ids=("s1",),
                org_id="o1",
                location_id="l1",
                domain_id="d1",
                free_text="python role",
                capacity=1,
            ),
        )
    return Dataset(
        candidates=tuple(candidates),
        roles=tuple(roles),
        skills=tuple(skills),
        organizations=orgs,
        locations=locs,
        domains=doms,
        demographic_categories=dict(demographic_categories),
        interactions=tuple(interactions),
        ground_truth=tuple(ground_truth),
    )


def make_candidate(cid, skills=("s1",), prefs=("r1",), gender="a", text="some text"):
    return Candidate(
        id=cid,
        skill_ids=tuple(skills),
        org_id="o1",
        location_id="l1",
        domain_id="d1",
        free_text=text,
        preferences=tuple(prefs),
        demographics=DemographicProfile({"gender": gender}),
    )


def make_role(rid, required=("s1",), capacity=1, text="role text"):
    return Role(
        id=rid,
        required_skill_ids=tuple(required),
        org_id="o1",
        location_id="l1",
        domain_id="d1",
        free_text=text,
        capacity=capacity,
    )


@pytest.fixture
def tiny_dataset():
    return make_dataset()


@pytest.fixture
def interaction_dataset():
    cands = (make_candidate("c1"), make_candidate("c2", gender="b"))
    roles = (make_role("r1", capacity=2),)
    inter = (Interaction("c1", "r1", 1), Interaction("c2", "r1", 0))
    return make_dataset(candidates=cands, roles=roles, interactions=inter)
