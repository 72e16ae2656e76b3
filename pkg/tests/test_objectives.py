"""Objective functions: closed-form entropy values, merit arithmetic,
preference rank scores, constraint magnitudes, and a duplicate-implementation
oracle for full plan scoring."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from gesa.model import (
    AllocationPlan,
    CapacityConstraint,
    ConstraintSet,
    DemographicProfile,
    FloorConstraint,
    QuotaConstraint,
)
from gesa.objectives import (
    DiversitySpec,
    MeritWeights,
    ObjectiveContext,
    diversity,
    evaluate_constraints,
    evaluate_objectives,
    group_entropy,
    merit,
    preference_rank_score,
    preference_satisfaction,
    skill_match_score,
)
from tests.conftest import make_candidate, make_role

GENDER_SPEC = DiversitySpec(weights={"gender": 1.0}, subcategories={"gender": ("a", "b")})


def profiles(*labels):
    return [DemographicProfile({"gender": g}) for g in labels]


class TestMeritWeights:
    def test_valid(self):
        MeritWeights(0.5, 0.3, 0.2)

    def test_sum_enforced(self):
        with pytest.raises(ValueError):
            MeritWeights(0.5, 0.5, 0.5)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            MeritWeights(1.5, -0.5, 0.0)


class TestSkillMatch:
    def test_full_coverage(self):
        c = make_candidate("c1", skills=("s1", "s2", "s3"))
        r = make_role("r1", required=("s1", "s2", "s3"))
        assert skill_match_score(c, r) == 1.0

    def test_no_overlap(self):
        c = make_candidate("c1", skills=("s9",))
        r = make_role("r1", required=("s1", "s2"))
        assert skill_match_score(c, r) == 0.0

    def test_partial(self):
        c = make_candidate("c1", skills=("s1",))
        r = make_role("r1", required=("s1", "s2", "s3", "s4"))
        assert skill_match_score(c, r) == 0.25

    def test_empty_requirements_error(self):
        from gesa.model import Role

        c = make_candidate("c1")
        bare = Role(
            id="r1",
            required_skill_ids=(),
            org_id="o1",
            location_id="l1",
            domain_id="d1",
            free_text="",
            capacity=1,
        )
        with pytest.raises(ValueError):
            skill_match_score(c, bare)


class TestMerit:
    def test_projection(self):
        w = MeritWeights(1.0, 0.0, 0.0)
        assert merit(w, 0.7, 0.123, 0.456) == 0.7

    def test_arithmetic(self):
        w = MeritWeights(0.5, 0.3, 0.2)
        assert merit(w, 0.8, 0.6, 1.0) == pytest.approx(0.78, abs=1e-12)

    def test_convex_combination_fixed_point(self):
        for w in (MeritWeights(0.5, 0.3, 0.2), MeritWeights(0.1, 0.1, 0.8)):
            assert merit(w, 0.4, 0.4, 0.4) == pytest.approx(0.4, abs=1e-12)

    def test_out_of_range_sim_rejected(self):
        with pytest.raises(ValueError):
            merit(MeritWeights(0.5, 0.3, 0.2), 1.5, 0.0, 0.0)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_affine_in_each_sim(self, s_lo, s_hi):
        # Changing one sim by delta changes merit by weight * delta.
        w = MeritWeights(0.5, 0.3, 0.2)
        base = merit(w, s_lo, 0.5, 0.5)
        bumped = merit(w, s_hi, 0.5, 0.5)
        assert bumped - base == pytest.approx(w.alpha * (s_hi - s_lo), abs=1e-9)


class TestEntropy:
    def test_two_equal_groups(self):
        got = group_entropy(profiles("a", "b"), "gender", GENDER_SPEC)
        assert got == pytest.approx(math.log(2), abs=1e-6)

    def test_single_group(self):
        assert group_entropy(profiles("a", "a", "a"), "gender", GENDER_SPEC) == 0.0

    def test_uniform_over_four(self):
        spec = DiversitySpec(
            weights={"g": 1.0}, subcategories={"g": ("w", "x", "y", "z")}
        )
        ps = [DemographicProfile({"g": l}) for l in "wxyz"]
        assert group_entropy(ps, "g", spec) == pytest.approx(math.log(4), abs=1e-6)

    def test_empty_selection_error(self):
        with pytest.raises(ValueError):
            group_entropy([], "gender", GENDER_SPEC)

    def test_missing_category_counts_nothing(self):
        # Entropy is over candidates that declare the category.
        ps = profiles("a", "b") + [DemographicProfile({})]
        assert group_entropy(ps, "gender", GENDER_SPEC) == pytest.approx(
            math.log(2), abs=1e-12
        )

    def test_uniform_is_maximal(self):
        uniform = group_entropy(profiles("a", "b"), "gender", GENDER_SPEC)
        skewed = group_entropy(profiles("a", "a", "a", "b"), "gender", GENDER_SPEC)
        assert uniform > skewed

    def test_relabeling_invariance(self):
        h1 = group_entropy(profiles("a", "a", "b"), "gender", GENDER_SPEC)
        h2 = group_entropy(profiles("b", "b", "a"), "gender", GENDER_SPEC)
        assert h1 == pytest.approx(h2, abs=1e-12)


class TestDiversity:
    def test_single_category_reduces_to_entropy(self):
        ps = profiles("a", "b", "b")
        assert diversity(ps, GENDER_SPEC) == group_entropy(ps, "gender", GENDER_SPEC)

    def test_weighted_sum(self):
        spec = DiversitySpec(
            weights={"gender": 0.5, "region": 0.5},
            subcategories={"gender": ("a", "b"), "region": ("n", "s")},
        )
        ps = [
            DemographicProfile({"gender": "a", "region": "n"}),
            DemographicProfile({"gender": "b", "region": "n"}),
        ]
        # gender entropy ln2, region entropy 0
        assert diversity(ps, spec) == pytest.approx(0.346574, abs=1e-6)

    def test_identical_candidates_zero(self):
        assert diversity(profiles("a", "a", "a"), GENDER_SPEC) == 0.0

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiversitySpec(weights={"gender": 0.7, "region": 0.7}, subcategories={})


class TestPreference:
    def test_first_choice(self):
        c = make_candidate("c1", prefs=("r1", "r2", "r3"))
        assert preference_rank_score(c, "r1") == 1.0

    def test_rank_two_of_three(self):
        c = make_candidate("c1", prefs=("r2", "r1", "r3"))
        assert preference_rank_score(c, "r1") == 0.5

    def test_absent_role(self):
        c = make_candidate("c1", prefs=("r2", "r3"))
        assert preference_rank_score(c, "r1") == 0.0

    def test_singleton_list_matched(self):
        c = make_candidate("c1", prefs=("r1",))
        assert preference_rank_score(c, "r1") == 1.0

    def test_mean_over_assignments(self):
        cands = {
            "c1": make_candidate("c1", prefs=("r1",)),
            "c2": make_candidate("c2", prefs=("r9", "r1", "r2")),
        }
        plan = AllocationPlan(assignments={"c1": "r1", "c2": "r1"})
        assert preference_satisfaction(plan, cands) == pytest.approx(0.75)


class TestConstraints:
    def test_capacity_overflow(self):
        cs = ConstraintSet(capacities=(CapacityConstraint("r1", 2),))
        cands = {f"c{i}": make_candidate(f"c{i}") for i in range(3)}
        plan = AllocationPlan(assignments={c: "r1" for c in cands})
        assert evaluate_constraints(plan, cs, cands) == [("capacity:r1", 1.0)]

    def test_satisfied_quota_omitted(self):
        cs = ConstraintSet(
            capacities=(CapacityConstraint("r1", 10),),
            quotas=(QuotaConstraint("gender", "a", 5),),
        )
        cands = {f"c{i}": make_candidate(f"c{i}", gender="a") for i in range(5)}
        plan = AllocationPlan(assignments={c: "r1" for c in cands})
        assert evaluate_constraints(plan, cs, cands) == []

    def test_floor_and_quota_magnitudes(self):
        cs = ConstraintSet(
            capacities=(CapacityConstraint("r1", 100),),
            floors=(FloorConstraint("gender", "b", 3),),
            quotas=(QuotaConstraint("gender", "a", 4),),
        )
        cands = {f"a{i}": make_candidate(f"a{i}", gender="a") for i in range(6)}
        cands["b0"] = make_candidate("b0", gender="b")
        plan = AllocationPlan(assignments={c: "r1" for c in cands})
        got = dict(evaluate_constraints(plan, cs, cands))
        assert got == {"floor:gender:b": 2.0, "quota:gender:a": 2.0}

    def test_all_magnitudes_positive(self):
        cs = ConstraintSet(
            capacities=(CapacityConstraint("r1", 1),),
            floors=(FloorConstraint("gender", "a", 0),),
        )
        cands = {"c1": make_candidate("c1", gender="b")}
        plan = AllocationPlan(assignments={"c1": "r1"})
        for _, mag in evaluate_constraints(plan, cs, cands):
            assert mag > 0

    def test_unknown_role_rejected(self):
        cs = ConstraintSet(capacities=(CapacityConstraint("r1", 1),))
        cands = {"c1": make_candidate("c1")}
        plan = AllocationPlan(assignments={"c1": "r404"})
        with pytest.raises(ValueError):
            evaluate_constraints(plan, cs, cands)


def straight_line_score(plan, ctx):
    """Independent recomputation of evaluate_objectives with plain loops.

    Kept deliberately naive (no shared helpers) so it can serve as an oracle.
    """
    n = len(plan.assignments)
    merit_total = 0.0
    for cid, rid in plan.assignments.items():
        w = ctx.merit_weights
        merit_total += (
            w.alpha * ctx.semantic[(cid, rid)]
            + w.beta * ctx.graph[(cid, rid)]
            + w.gamma * ctx.skill[(cid, rid)]
        )
    f1 = merit_total / n

    f2 = 0.0
    for cat, weight in ctx.diversity_spec.weights.items():
        counts = {}
        for cid in plan.assignments:
            label = ctx.candidates[cid].demographics.group_memberships.get(cat)
            if label is not None:
                counts[label] = counts.get(label, 0) + 1
        total = sum(counts.values())
        h = 0.0
        if total:
            for k in counts.values():
                h -= (k / total) * math.log(k / total)
        f2 += weight * h

    f3 = 0.0
    for cid, rid in plan.assignments.items():
        prefs = list(ctx.candidates[cid].preferences)
        if rid in prefs:
            if len(prefs) == 1:
                f3 += 1.0
            else:
                f3 += 1.0 - prefs.index(rid) / (len(prefs) - 1)
    f3 /= n
    return f1, f2, f3


class TestEvaluateObjectives:
    def _context(self, rng, n_candidates=50, n_roles=8):
        roles = [f"r{i}" for i in range(n_roles)]
        cands = {}
        semantic, graph, skill = {}, {}, {}
        for i in range(n_candidates):
            cid = f"c{i}"
            prefs = rng.sample(roles, k=rng.randint(1, min(4, n_roles)))
            cands[cid] = make_candidate(
                cid, prefs=prefs, gender=rng.choice(["a", "b"])
            )
            for rid in roles:
                semantic[(cid, rid)] = rng.random()
                graph[(cid, rid)] = rng.random()
                skill[(cid, rid)] = rng.random()
        return ObjectiveContext(
            candidates=cands,
            merit_weights=MeritWeights(0.5, 0.2, 0.3),
            semantic=semantic,
            graph=graph,
            skill=skill,
            diversity_spec=GENDER_SPEC,
        )

    def test_empty_plan_degenerate(self, tiny_dataset):
        ctx = self._context(random.Random(0), n_candidates=2, n_roles=2)
        vec, degenerate = evaluate_objectives(AllocationPlan(assignments={}), ctx)
        assert degenerate
        assert vec.as_tuple() == (0.0, 0.0, 0.0)

    def test_singleton_plan(self):
        rng = random.Random(1)
        ctx = self._context(rng, n_candidates=1, n_roles=1)
        plan = AllocationPlan(assignments={"c0": "r0"})
        vec, degenerate = evaluate_objectives(plan, ctx)
        assert not degenerate
        assert vec.diversity == 0.0  # single candidate: zero entropy
        assert vec.merit == pytest.approx(ctx.pair_merit("c0", "r0"))

    def test_determinism(self):
        rng = random.Random(2)
        ctx = self._context(rng)
        plan = AllocationPlan(
            assignments={f"c{i}": f"r{i % 8}" for i in range(30)}
        )
        v1, _ = evaluate_objectives(plan, ctx)
        v2, _ = evaluate_objectives(plan.copy(), ctx)
        assert v1 == v2

    def test_matches_straight_line_recomputation(self):
        # Seeded 50-candidate instances vs the naive oracle above.
        for seed in range(5):
            rng = random.Random(seed)
            ctx = self._context(rng)
            assigned = rng.sample(sorted(ctx.candidates), k=40)
            plan = AllocationPlan(
                assignments={cid: f"r{rng.randrange(8)}" for cid in assigned}
            )
            vec, _ = evaluate_objectives(plan, ctx)
            f1, f2, f3 = straight_line_score(plan, ctx)
            assert vec.merit == pytest.approx(f1, abs=1e-9)
            assert vec.diversity == pytest.approx(f2, abs=1e-9)
            assert vec.preference == pytest.approx(f3, abs=1e-9)
