"""Multi-objective allocation search.

NSGA-II over candidate-role plans with penalty-based constraint handling,
a diversity-weight escalation that reacts to constraint violations, and a
policy-driven pick from the final Pareto front. All three objectives are
maximized. Objective evaluation is pure and merged in individual index
order, so serial and parallel evaluation give bit-identical runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from gesa.model import (
    AllocationPlan,
    ConstraintSet,
    Dataset,
    ObjectiveVector,
    Role,
)
from gesa.objectives import ObjectiveContext, evaluate_constraints, evaluate_objectives

# Hypervolume stagnation window: stop after this many generations whose
# relative front-1 hypervolume change stays below the tolerance.
STAGNATION_WINDOW = 10
STAGNATION_TOL = 1e-6


class InfeasibleProblem(Exception):
    """No plan can satisfy the hard constraints (or none was ever found)."""

    def __init__(self, message: str, front: "ParetoFront | None" = None):
        super().__init__(message)
        self.front = front


class NoCompliantSolution(Exception):
    """Every front member violates a mandatory constraint."""


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 100
    max_generations: int = 50
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    penalty: float = 1.0
    rho: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValueError("population must be even and at least 4")
        if self.max_generations < 1:
            raise ValueError("max_generations must be positive")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.penalty < 0:
            raise ValueError("penalty must be non-negative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class Individual:
    plan: AllocationPlan
    raw: ObjectiveVector
    penalized: ObjectiveVector
    violations: tuple[tuple[str, float], ...]
    rank: int
    crowding: float

    @property
    def feasible(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    front1_size: int
    hypervolume: float
    diversity_weight: float
    violations: int


@dataclass(frozen=True)
class ParetoFront:
    """Mutually non-dominated individuals plus the run's bookkeeping."""

    members: tuple[Individual, ...]
    history: tuple[GenerationStats, ...]
    diversity_weight: float
    escalations: tuple[int, ...]

    def feasible_members(self) -> tuple[Individual, ...]:
        return tuple(m for m in self.members if m.feasible)


@dataclass(frozen=True)
class AllocationProblem:
    """Dataset plus score tables and constraints; the optimizer's whole world."""

    dataset: Dataset
    context: ObjectiveContext
    constraints: ConstraintSet

    def __post_init__(self):
        cands = [c.id for c in self.dataset.candidates]
        roles = [r.id for r in self.dataset.roles]
        # Full scan for small instances; large ones get a size check plus a
        # deterministic sample, since a wrong table shape fails either way.
        if len(cands) * len(roles) <= 50_000:
            pairs = [(c, r) for c in cands for r in roles]
        else:
            rng = np.random.default_rng(0)
            pairs = [
                (cands[int(i)], roles[int(j)])
                for i, j in zip(
                    rng.integers(0, len(cands), size=1000),
                    rng.integers(0, len(roles), size=1000),
                )
            ]
            for table in (self.context.semantic, self.context.graph, self.context.skill):
                size = getattr(table, "__len__", None)
                if size is not None and len(table) < len(cands) * len(roles):
                    raise ValueError("score tables smaller than the pair grid")
        missing = [
            key
            for key in pairs
            if key not in self.context.semantic
            or key not in self.context.graph
            or key not in self.context.skill
        ]
        if missing:
            raise ValueError(f"score tables missing pairs, e.g. {missing[:3]}")

    def candidate_ids(self) -> tuple[str, ...]:
        return tuple(sorted(c.id for c in self.dataset.candidates))

    def roles_by_id(self) -> dict[str, Role]:
        return {r.id: r for r in self.dataset.roles}


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """Strict Pareto dominance under maximization."""
    at, bt = a.as_tuple(), b.as_tuple()
    return all(x >= y for x, y in zip(at, bt)) and any(x > y for x, y in zip(at, bt))


def _as_array(objectives: Sequence) -> np.ndarray:
    rows = [
        o.as_tuple() if isinstance(o, ObjectiveVector) else tuple(o) for o in objectives
    ]
    return np.asarray(rows, dtype=float)


def non_dominated_sort(objectives: Sequence) -> list[list[int]]:
    """Fast non-dominated sorting; front 1 first, ties by original index."""
    if len(objectives) == 0:
        raise ValueError("cannot sort an empty population")
    pts = _as_array(objectives)
    ge = (pts[:, None, :] >= pts[None, :, :]).all(axis=2)
    gt = (pts[:, None, :] > pts[None, :, :]).any(axis=2)
    dom = ge & gt  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)
    fronts: list[list[int]] = []
    assigned = np.zeros(len(pts), dtype=bool)
    while not assigned.all():
        current = np.flatnonzero((counts == 0) & ~assigned)
        fronts.append([int(i) for i in current])
        assigned[current] = True
        counts = counts - dom[current].sum(axis=0)
    return fronts


def crowding_distance(objectives: Sequence) -> np.ndarray:
    """Per-member crowding distance within one front.

    Boundary members per objective get +inf; interior members accumulate
    (next - prev) / (max - min); zero-range objectives contribute nothing.
    """
    pts = _as_array(objectives)
    n = len(pts)
    if n == 0:
        raise ValueError("crowding distance needs a non-empty front")
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(pts.shape[1]):
        vals = pts[:, k]
        order = np.argsort(vals, kind="stable")
        span = vals[order[-1]] - vals[order[0]]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span <= 0:
            continue
        gaps = (vals[order[2:]] - vals[order[:-2]]) / span
        interior = order[1:-1]
        finite = ~np.isinf(dist[interior])
        dist[interior[finite]] += gaps[finite]
    return dist


def _check_plan(plan: AllocationPlan, candidate_ids, roles: Mapping[str, Role]):
    for cid, rid in plan.assignments.items():
        if cid not in candidate_ids or rid not in roles:
            raise ValueError("plan does not belong to this dataset")


def _repair(assignments: dict[str, str], roles: Mapping[str, Role]) -> dict[str, str]:
    # Overflowing roles keep their lexicographically smallest candidate ids.
    by_role: dict[str, list[str]] = {}
    for cid in sorted(assignments):
        by_role.setdefault(assignments[cid], []).append(cid)
    repaired = {}
    for rid, cids in by_role.items():
        for cid in cids[: roles[rid].capacity]:
            repaired[cid] = rid
    return {cid: repaired[cid] for cid in sorted(repaired)}


def crossover(
    parent_a: AllocationPlan,
    parent_b: AllocationPlan,
    candidate_ids: Sequence[str],
    roles: Mapping[str, Role],
    rng: np.random.Generator,
) -> tuple[AllocationPlan, AllocationPlan]:
    """Uniform per-candidate exchange, children repaired to capacities."""
    id_set = set(candidate_ids)
    _check_plan(parent_a, id_set, roles)
    _check_plan(parent_b, id_set, roles)
    swap = rng.random(len(candidate_ids)) < 0.5
    child_a: dict[str, str] = {}
    child_b: dict[str, str] = {}
    for i, cid in enumerate(candidate_ids):
        ga, gb = parent_a.assignments.get(cid), parent_b.assignments.get(cid)
        if swap[i]:
            ga, gb = gb, ga
        if ga is not None:
            child_a[cid] = ga
        if gb is not None:
            child_b[cid] = gb
    return (
        AllocationPlan(assignments=_repair(child_a, roles)),
        AllocationPlan(assignments=_repair(child_b, roles)),
    )


def mutate(
    plan: AllocationPlan,
    candidate_ids: Sequence[str],
    roles: Mapping[str, Role],
    rate: float,
    rng: np.random.Generator,
) -> AllocationPlan:
    """Per candidate, with probability `rate`, move to a uniformly random
    role with spare capacity or to unassigned (weight 1 among the options)."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("mutation rate must lie in [0, 1]")
    assignments = dict(plan.assignments)
    counts: dict[str, int] = {}
    for rid in assignments.values():
        counts[rid] = counts.get(rid, 0) + 1
    role_order = sorted(roles)
    flips = rng.random(len(candidate_ids)) < rate
    for i, cid in enumerate(candidate_ids):
        if not flips[i]:
            continue
        current = assignments.pop(cid, None)
        if current is not None:
            counts[current] -= 1
        options = [rid for rid in role_order if counts.get(rid, 0) < roles[rid].capacity]
        options.append(None)
        choice = options[int(rng.integers(0, len(options)))]
        if choice is not None:
            assignments[cid] = choice
            counts[choice] = counts.get(choice, 0) + 1
    return AllocationPlan(assignments={cid: assignments[cid] for cid in sorted(assignments)})


def _random_plan(
    candidate_ids: Sequence[str], roles: Mapping[str, Role], rng: np.random.Generator
) -> AllocationPlan:
    return mutate(AllocationPlan(), candidate_ids, roles, 1.0, rng)


def _evaluate(
    plan: AllocationPlan, problem: AllocationProblem, penalty: float
) -> Individual:
    raw, _ = evaluate_objectives(plan, problem.context)
    violations = tuple(
        evaluate_constraints(
            plan, problem.constraints, problem.context.candidates, problem.roles_by_id()
        )
    )
    if violations:
        total = sum(mag for _, mag in violations)
        penalized = ObjectiveVector(
            raw.merit - penalty * total,
            raw.diversity - penalty * total,
            raw.preference - penalty * total,
        )
    else:
        penalized = raw
    return Individual(plan, raw, penalized, violations, rank=0, crowding=0.0)


def _with_rank(ind: Individual, rank: int, crowding: float) -> Individual:
    return Individual(ind.plan, ind.raw, ind.penalized, ind.violations, rank, crowding)


def _rank_population(population: list[Individual]) -> list[Individual]:
    fronts = non_dominated_sort([ind.penalized for ind in population])
    ranked: list[Individual | None] = [None] * len(population)
    for level, front in enumerate(fronts, start=1):
        dist = crowding_distance([population[i].penalized for i in front])
        for j, i in enumerate(front):
            ranked[i] = _with_rank(population[i], level, float(dist[j]))
    return list(ranked)  # type: ignore[arg-type]


def _tournament(population: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = (int(x) for x in rng.integers(0, len(population), size=2))
    a, b = population[i], population[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return population[min(i, j)]


def _survivors(combined: list[Individual], size: int) -> list[Individual]:
    fronts = non_dominated_sort([ind.penalized for ind in combined])
    chosen: list[Individual] = []
    for level, front in enumerate(fronts, start=1):
        dist = crowding_distance([combined[i].penalized for i in front])
        members = [
            _with_rank(combined[i], level, float(dist[j])) for j, i in enumerate(front)
        ]
        if len(chosen) + len(members) <= size:
            chosen.extend(members)
        else:
            room = size - len(chosen)
            order = sorted(
                range(len(members)), key=lambda k: (-members[k].crowding, front[k])
            )
            chosen.extend(members[k] for k in order[:room])
        if len(chosen) == size:
            break
    return chosen


def _merge_archive(
    archive: list[Individual], additions: list[Individual]
) -> list[Individual]:
    """Non-dominated union of the archive and a new cohort.

    The archive is what the run ultimately returns: keeping every
    non-dominated individual seen so far, rather than the surviving
    population's first front, makes the reported front immune to crowding
    truncation, so its hypervolume never regresses between generations.
    One representative is kept per penalized objective vector.
    """
    seen: set[tuple[float, float, float]] = set()
    pool: list[Individual] = []
    for ind in archive + additions:
        key = ind.penalized.as_tuple()
        if key in seen:
            continue
        seen.add(key)
        pool.append(ind)
    pts = np.asarray([ind.penalized.as_tuple() for ind in pool])
    ge = (pts[:, None, :] >= pts[None, :, :]).all(axis=2)
    gt = (pts[:, None, :] > pts[None, :, :]).any(axis=2)
    dominated = (ge & gt).any(axis=0)
    keep = [pool[i] for i in range(len(pool)) if not dominated[i]]
    keep.sort(
        key=lambda ind: (
            -ind.penalized.merit,
            -ind.penalized.diversity,
            -ind.penalized.preference,
        )
    )
    return [_with_rank(ind, 1, 0.0) for ind in keep]


def hypervolume(
    objectives: Sequence, reference: tuple[float, float, float] = (0.0, 0.0, 0.0)
) -> float:
    """Volume dominated between `reference` and the points (3 objectives,
    maximization); negative coordinates are clipped to the reference."""
    pts = _as_array(objectives)
    if pts.size == 0:
        return 0.0
    if pts.shape[1] != 3:
        raise ValueError("hypervolume expects exactly three objectives")
    pts = np.clip(pts - np.asarray(reference, dtype=float), 0.0, None)
    pts = pts[(pts > 0).any(axis=1)]
    if len(pts) == 0:
        return 0.0
    xs = np.unique(pts[:, 0])[::-1]
    volume = 0.0
    for k, x in enumerate(xs):
        lower = xs[k + 1] if k + 1 < len(xs) else 0.0
        active = pts[pts[:, 0] >= x]
        volume += _area2d(active[:, 1], active[:, 2]) * (x - lower)
    return float(volume)


def _area2d(ys: np.ndarray, zs: np.ndarray) -> float:
    order = np.argsort(-ys, kind="stable")
    area = 0.0
    zmax = 0.0
    ys, zs = ys[order], zs[order]
    for i in range(len(ys)):
        nxt = ys[i + 1] if i + 1 < len(ys) else 0.0
        zmax = max(zmax, float(zs[i]))
        area += (float(ys[i]) - float(nxt)) * zmax
    return area


def _structural_check(problem: AllocationProblem):
    counts: dict[tuple[str, str], int] = {}
    for c in problem.dataset.candidates:
        for cat, label in c.demographics.group_memberships.items():
            key = (cat, label)
            counts[key] = counts.get(key, 0) + 1
    capacity = sum(r.capacity for r in problem.dataset.roles)
    for fl in problem.constraints.floors:
        have = counts.get((fl.category, fl.label), 0)
        if fl.minimum > have or fl.minimum > capacity:
            raise InfeasibleProblem(
                f"{fl.constraint_id}: needs {fl.minimum}, "
                f"only {min(have, capacity)} possible"
            )
    for q in problem.constraints.quotas:
        have = counts.get((q.category, q.label), 0)
        if q.target > have:
            raise InfeasibleProblem(
                f"{q.constraint_id}: needs {q.target}, only {have} candidates"
            )


def run_nsga2(problem: AllocationProblem, config: OptimizerConfig) -> ParetoFront:
    """Evolve plans; returns the archive of non-dominated individuals seen
    across the whole run, with per-generation statistics.

    Per generation: offspring via binary tournament on (rank, crowding),
    uniform crossover, and capacity-safe mutation; constraint violations
    subtract penalty * total magnitude from every objective component and
    escalate the diversity weight once; survivors are elitist from the
    combined parent+offspring pool. Stops at max_generations or when the
    front-1 hypervolume stagnates.

    The initial population is warm-started with two deterministic seeds that
    bracket the merit-diversity trade-off (merit greedy, and merit greedy
    under uniform demographic quotas), plus jittered copies of each; the
    remaining slots are random. Pure random starts need far too many
    generations to become competitive on the merit axis at realistic sizes.
    """
    _structural_check(problem)
    candidate_ids = problem.candidate_ids()
    roles = problem.roles_by_id()
    rng = np.random.default_rng(config.seed)

    seeds = [greedy_merit_baseline(problem), _diverse_seed(problem)]
    plans = list(seeds)
    while len(plans) < max(len(seeds), config.population // 4):
        base = seeds[len(plans) % len(seeds)]
        plans.append(mutate(base, candidate_ids, roles, 0.2, rng))
    while len(plans) < config.population:
        plans.append(_random_plan(candidate_ids, roles, rng))
    population = _rank_population(
        [_evaluate(plan, problem, config.penalty) for plan in plans]
    )

    weight = 1.0
    archive: list[Individual] = []
    escalations: list[int] = []
    history: list[GenerationStats] = []
    for t in range(config.max_generations):
        offspring: list[Individual] = []
        while len(offspring) < config.population:
            pa, pb = _tournament(population, rng), _tournament(population, rng)
            if rng.random() < config.crossover_rate:
                ca, cb = crossover(pa.plan, pb.plan, candidate_ids, roles, rng)
            else:
                ca, cb = pa.plan.copy(), pb.plan.copy()
            ca = mutate(ca, candidate_ids, roles, config.mutation_rate, rng)
            cb = mutate(cb, candidate_ids, roles, config.mutation_rate, rng)
            offspring.append(_evaluate(ca, problem, config.penalty))
            offspring.append(_evaluate(cb, problem, config.penalty))

        combined = population + offspring
        violating = sum(1 for ind in combined if ind.violations)
        if violating:
            weight *= 1.0 + config.rho
            escalations.append(t)

        archive = _merge_archive(archive, combined)
        population = _survivors(combined, config.population)
        hv = hypervolume([ind.penalized for ind in archive])
        history.append(GenerationStats(t, len(archive), hv, weight, violating))

        if len(history) > STAGNATION_WINDOW:
            recent = [h.hypervolume for h in history[-(STAGNATION_WINDOW + 1) :]]
            stalls = all(
                abs(b - a) <= STAGNATION_TOL * max(abs(a), 1e-12)
                for a, b in zip(recent, recent[1:])
            )
            if stalls:
                break

    front = ParetoFront(tuple(archive), tuple(history), weight, tuple(escalations))
    if problem.constraints.quotas or problem.constraints.floors:
        if not front.feasible_members():
            raise InfeasibleProblem(
                "no plan satisfying all quotas and floors was found", front
            )
    return front


@dataclass(frozen=True)
class SelectionPolicy:
    """Stakeholder weights over (merit, diversity, preference) plus the
    constraint ids that must hold in the returned plan."""

    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    mandatory: tuple[str, ...] = ()

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise ValueError("policy weights must be non-negative")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one policy weight must be positive")


def select_solution(front: ParetoFront, policy: SelectionPolicy) -> AllocationPlan:
    """Pick the compliant member maximizing the weighted raw objective sum.

    The diversity weight carries the run's escalation factor. Ties go to the
    higher raw diversity, then to the lexicographically smallest assignment
    encoding.
    """
    mandatory = set(policy.mandatory)
    survivors = [
        m
        for m in front.members
        if not (mandatory & {cid for cid, _ in m.violations})
    ]
    if not survivors:
        raise NoCompliantSolution(
            "every front member violates a mandatory constraint"
        )
    w1, w2, w3 = policy.weights
    w2 = w2 * front.diversity_weight

    def sort_key(m: Individual):
        score = w1 * m.raw.merit + w2 * m.raw.diversity + w3 * m.raw.preference
        encoding = tuple(sorted(m.plan.assignments.items()))
        return (-score, -m.raw.diversity, encoding)

    return min(survivors, key=sort_key).plan.copy()


def greedy_merit_baseline(problem: AllocationProblem) -> AllocationPlan:
    """Single-objective baseline: fill roles by descending pair merit."""
    roles = problem.roles_by_id()
    pairs = sorted(
        ((cid, r.id) for cid in problem.candidate_ids() for r in problem.dataset.roles),
        key=lambda p: (-problem.context.pair_merit(*p), p),
    )
    counts: dict[str, int] = {}
    assignments: dict[str, str] = {}
    for cid, rid in pairs:
        if cid in assignments or counts.get(rid, 0) >= roles[rid].capacity:
            continue
        assignments[cid] = rid
        counts[rid] = counts.get(rid, 0) + 1
    return AllocationPlan(assignments={cid: assignments[cid] for cid in sorted(assignments)})


def _diverse_seed(problem: AllocationProblem) -> AllocationPlan:
    """Merit greedy under uniform per-label quotas.

    Where the pool is demographically skewed, plain merit greedy mirrors the
    skew; this variant caps every label at an equal share so the seed sits
    near the diversity end of the trade-off. Candidates that do not declare
    a category never count against its quotas.
    """
    ctx = problem.context
    roles = problem.roles_by_id()
    pool: dict[str, dict[str, int]] = {}
    for cid in problem.candidate_ids():
        for cat, label in ctx.candidates[cid].demographics.group_memberships.items():
            pool.setdefault(cat, {}).setdefault(label, 0)
            pool[cat][label] += 1

    total_cap = sum(r.capacity for r in roles.values())
    size = total_cap
    for labels in pool.values():
        size = min(size, len(labels) * min(labels.values()))
    quota = {cat: max(1, size // len(labels)) for cat, labels in pool.items()}

    pairs = sorted(
        ((cid, r.id) for cid in problem.candidate_ids() for r in problem.dataset.roles),
        key=lambda p: (-problem.context.pair_merit(*p), p),
    )
    role_counts: dict[str, int] = {}
    label_counts: dict[tuple[str, str], int] = {}
    assignments: dict[str, str] = {}
    for cid, rid in pairs:
        if len(assignments) >= size:
            break
        if cid in assignments or role_counts.get(rid, 0) >= roles[rid].capacity:
            continue
        memberships = ctx.candidates[cid].demographics.group_memberships
        if any(
            label_counts.get((cat, label), 0) >= quota[cat]
            for cat, label in memberships.items()
        ):
            continue
        assignments[cid] = rid
        role_counts[rid] = role_counts.get(rid, 0) + 1
        for cat, label in memberships.items():
            label_counts[(cat, label)] = label_counts.get((cat, label), 0) + 1
    return AllocationPlan(assignments={cid: assignments[cid] for cid in sorted(assignments)})


def write_trace_csv(front: ParetoFront, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["generation", "front1_size", "hypervolume", "diversity_weight", "violations"]
        )
        for row in front.history:
            writer.writerow(
                [
                    row.generation,
                    row.front1_size,
                    repr(row.hypervolume),
                    repr(row.diversity_weight),
                    row.violations,
                ]
            )
