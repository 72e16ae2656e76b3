"""Generator determinism, count contracts, planting rule, and the bias dial."""

import pytest

from gesa.datagen import (
    CategorySpec,
    GenSpec,
    cluster_skill_ids,
    generate_dataset,
    subgroup_rate_gap,
)
from gesa.model import dataset_to_json, validate_dataset

SMALL = GenSpec(candidates=100, roles=10, skills=30, organizations=5,
                locations=5, domains=3, seed=7)


class TestSpec:
    def test_counts_must_be_positive(self):
        with pytest.raises(ValueError):
            GenSpec(candidates=0)

    def test_bias_range(self):
        with pytest.raises(ValueError):
            GenSpec(bias_strength=1.5)

    def test_category_probabilities_sum(self):
        with pytest.raises(ValueError):
            CategorySpec("g", ("a", "b"), (0.5, 0.6))

    def test_infeasible_role_requirements(self):
        with pytest.raises(ValueError):
            GenSpec(skills=3, skills_per_role=(2, 5))

    def test_from_dict_round_trip(self):
        doc = {
            "candidates": 20, "roles": 4, "skills": 12, "seed": 3,
            "bias_strength": 0.2, "skills_per_role": [2, 3],
            "categories": [
                {"name": "g", "labels": ["x", "y"], "probabilities": [0.5, 0.5]}
            ],
        }
        spec = GenSpec.from_dict(doc)
        assert spec.candidates == 20
        assert spec.bias_strength == 0.2
        assert spec.categories[0].labels == ("x", "y")


class TestGeneration:
    def test_entity_counts(self):
        ds = generate_dataset(SMALL)
        assert len(ds.candidates) == 100
        assert len(ds.roles) == 10
        assert len(ds.skills) == 30
        assert len(ds.organizations) == 5
        assert len(ds.locations) == 5
        assert len(ds.domains) == 3

    def test_same_seed_byte_identical(self):
        a = dataset_to_json(generate_dataset(SMALL))
        b = dataset_to_json(generate_dataset(SMALL))
        assert a == b

    def test_different_seed_differs(self):
        a = dataset_to_json(generate_dataset(SMALL))
        b = dataset_to_json(generate_dataset(GenSpec(**{**SMALL.__dict__, "seed": 8})))
        assert a != b

    def test_output_validates(self):
        assert validate_dataset(generate_dataset(SMALL)) == []
        biased = GenSpec(candidates=200, seed=1, bias_strength=0.6)
        assert validate_dataset(generate_dataset(biased)) == []

    def test_ground_truth_satisfies_planting_rule(self):
        ds = generate_dataset(SMALL)
        assert ds.ground_truth, "expected some planted matches at this scale"
        cands, roles = ds.candidate_by_id(), ds.role_by_id()
        for cid, rid in ds.ground_truth:
            c = cands[cid]
            r = roles[rid]
            coverage = len(set(c.skill_ids) & set(r.required_skill_ids)) / len(
                r.required_skill_ids
            )
            assert coverage >= 0.75
            assert c.domain_id == r.domain_id

    def test_planting_rule_is_exhaustive(self):
        # Every qualifying pair appears; no qualifying pair is missed.
        ds = generate_dataset(SMALL)
        planted = set(ds.ground_truth)
        for c in ds.candidates:
            for r in ds.roles:
                coverage = len(set(c.skill_ids) & set(r.required_skill_ids)) / len(
                    r.required_skill_ids
                )
                qualifies = coverage >= 0.75 and c.domain_id == r.domain_id
                assert ((c.id, r.id) in planted) == qualifies

    def test_preference_lengths(self):
        ds = generate_dataset(SMALL)
        for c in ds.candidates:
            assert len(c.preferences) == 3
            assert len(set(c.preferences)) == 3


class TestBiasDial:
    def test_gap_tracks_strength(self):
        spec = GenSpec(candidates=5000, roles=20, skills=40, seed=11,
                       bias_strength=0.4)
        ds = generate_dataset(spec)
        assert subgroup_rate_gap(ds, spec) == pytest.approx(0.4, abs=0.05)

    def test_zero_bias_zero_gap(self):
        spec = GenSpec(candidates=5000, roles=20, skills=40, seed=12,
                       bias_strength=0.0)
        ds = generate_dataset(spec)
        assert abs(subgroup_rate_gap(ds, spec)) <= 0.03

    def test_cluster_ids_stable(self):
        assert cluster_skill_ids(GenSpec(skills=30)) == tuple(
            f"s{i:02d}" for i in range(7)
        )
