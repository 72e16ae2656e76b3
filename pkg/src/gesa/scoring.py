"""Score-table assembly: turns a dataset plus embeddings (and optionally a
trained graph state) into the per-pair tables the optimizer consumes.

Tables are computed as dense matrices and exposed through a read-only
Mapping view keyed by (candidate_id, role_id), which keeps the 2000x300
instance around three floats per pair instead of three dict entries.
"""

from __future__ import annotations

from typing import Iterator, Mapping, Sequence

import numpy as np

from gesa.hetgraph import LayerState
from gesa.model import ConstraintSet, Dataset
from gesa.objectives import DiversitySpec, MeritWeights, ObjectiveContext
from gesa.optimizer import AllocationProblem


class PairTable(Mapping):
    """Read-only (candidate_id, role_id) -> float view over a dense matrix."""

    def __init__(self, cand_ids: Sequence[str], role_ids: Sequence[str], matrix: np.ndarray):
        if matrix.shape != (len(cand_ids), len(role_ids)):
            raise ValueError("matrix shape does not match id lists")
        self._cand_ids = tuple(cand_ids)
        self._role_ids = tuple(role_ids)
        self._ci = {cid: i for i, cid in enumerate(self._cand_ids)}
        self._ri = {rid: i for i, rid in enumerate(self._role_ids)}
        self._m = matrix

    def __getitem__(self, key: tuple[str, str]) -> float:
        cid, rid = key
        return float(self._m[self._ci[cid], self._ri[rid]])

    def __contains__(self, key) -> bool:
        try:
            cid, rid = key
        except (TypeError, ValueError):
            return False
        return cid in self._ci and rid in self._ri

    def __iter__(self) -> Iterator[tuple[str, str]]:
        for cid in self._cand_ids:
            for rid in self._role_ids:
                yield (cid, rid)

    def __len__(self) -> int:
        return len(self._cand_ids) * len(self._role_ids)


def _norm_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero vector cannot be scored")
    return rows / norms


def _stack(ids: Sequence[str], vectors: Mapping[str, np.ndarray]) -> np.ndarray:
    missing = [i for i in ids if i not in vectors]
    if missing:
        raise ValueError(f"vectors missing for {missing[:3]}")
    return np.stack([np.asarray(vectors[i], dtype=float) for i in ids])


def semantic_table(dataset: Dataset, vectors: Mapping[str, np.ndarray]) -> PairTable:
    """Cosine similarity of text embeddings mapped onto [0, 1]."""
    cand_ids = sorted(c.id for c in dataset.candidates)
    role_ids = sorted(r.id for r in dataset.roles)
    C = _norm_rows(_stack(cand_ids, vectors))
    R = _norm_rows(_stack(role_ids, vectors))
    sims = np.clip(C @ R.T, -1.0, 1.0)
    return PairTable(cand_ids, role_ids, (sims + 1.0) / 2.0)


def graph_table(dataset: Dataset, state: LayerState | None) -> PairTable:
    """Graph-embedding similarity on [0, 1]; neutral 0.5 without a state."""
    cand_ids = sorted(c.id for c in dataset.candidates)
    role_ids = sorted(r.id for r in dataset.roles)
    if state is None:
        half = np.full((len(cand_ids), len(role_ids)), 0.5)
        return PairTable(cand_ids, role_ids, half)
    vectors = {i: state[i] for i in (*cand_ids, *role_ids)}
    return semantic_table(dataset, vectors)


def skill_table(dataset: Dataset) -> PairTable:
    """Required-skill coverage per pair."""
    cand_ids = sorted(c.id for c in dataset.candidates)
    role_ids = sorted(r.id for r in dataset.roles)
    skills = sorted(s.id for s in dataset.skills)
    si = {sid: i for i, sid in enumerate(skills)}
    held = np.zeros((len(cand_ids), len(skills)), dtype=float)
    by_id = {c.id: c for c in dataset.candidates}
    for i, cid in enumerate(cand_ids):
        for sid in by_id[cid].skill_ids:
            held[i, si[sid]] = 1.0
    req = np.zeros((len(role_ids), len(skills)), dtype=float)
    roles = {r.id: r for r in dataset.roles}
    for j, rid in enumerate(role_ids):
        for sid in roles[rid].required_skill_ids:
            req[j, si[sid]] = 1.0
    totals = req.sum(axis=1)
    if np.any(totals == 0):
        empty = [role_ids[j] for j in np.flatnonzero(totals == 0)]
        raise ValueError(f"roles without required skills cannot be scored: {empty[:3]}")
    coverage = (held @ req.T) / totals[None, :]
    return PairTable(cand_ids, role_ids, coverage)


def build_problem(
    dataset: Dataset,
    vectors: Mapping[str, np.ndarray],
    node_state: LayerState | None = None,
    merit_weights: MeritWeights | None = None,
    diversity_spec: DiversitySpec | None = None,
    floors=(),
    quotas=(),
) -> AllocationProblem:
    """Wire a dataset and its embeddings into an optimizer-ready problem."""
    ctx = ObjectiveContext(
        candidates={c.id: c for c in dataset.candidates},
        merit_weights=merit_weights or MeritWeights(),
        semantic=semantic_table(dataset, vectors),
        graph=graph_table(dataset, node_state),
        skill=skill_table(dataset),
        diversity_spec=diversity_spec or DiversitySpec.uniform(dataset),
    )
    constraints = ConstraintSet.for_dataset(dataset, floors=floors, quotas=quotas)
    return AllocationProblem(dataset=dataset, context=ctx, constraints=constraints)
