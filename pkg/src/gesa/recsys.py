"""Peer discovery and hybrid recommendation.

Three pieces: an inverted-file product-quantization index for approximate
nearest-neighbor search over embedding vectors, an alternating least squares
factorization of the candidate-role interaction matrix, and a convex fusion
of content / collaborative / graph scores with weights picked by seeded
cross-validated AUC.

Index file layout (all little-endian, C order):
    bytes 0-7    magic "GESAIVF1"
    6 x uint32   d, m, nlist, count, ksub, id_blob_len
    id blob      JSON array of the indexed ids, utf-8
    count x uint32   coarse list assignment per vector
    count x m uint8  PQ codes
    nlist x d float64    coarse centroids
    m x ksub x (d/m) float64  PQ codebooks
    count x d float64    raw vectors (kept for exact re-ranking)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

_MAGIC = b"GESAIVF1"
_KSUB = 256  # 8-bit codes


class ColdStartError(LookupError):
    """Raised when a factor model is asked about an id it was not trained on."""


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    p2 = (points**2).sum(axis=1)[:, None]
    c2 = (centroids**2).sum(axis=1)[None, :]
    return np.maximum(p2 + c2 - 2.0 * points @ centroids.T, 0.0)


def _kmeans(points: np.ndarray, k: int, iters: int, rng: np.random.Generator) -> np.ndarray:
    """Plain seeded Lloyd iterations; empty clusters keep their position."""
    n = points.shape[0]
    idx = rng.choice(n, size=k, replace=n < k)
    centroids = points[idx].astype(float).copy()
    for _ in range(iters):
        assign = _sq_dists(points, centroids).argmin(axis=1)
        for j in range(k):
            members = points[assign == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return centroids


def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return _sq_dists(points, centroids).argmin(axis=1)


@dataclass(frozen=True)
class IvfConfig:
    nlist: int | None = None  # default: round(sqrt(N))
    m: int = 8
    kmeans_iters: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.nlist is not None and self.nlist < 1:
            raise ValueError("nlist must be positive")
        if self.m < 1 or self.kmeans_iters < 1:
            raise ValueError("m and kmeans_iters must be positive")


def _invert(assignments: np.ndarray, nlist: int) -> tuple[np.ndarray, ...]:
    return tuple(np.nonzero(assignments == c)[0] for c in range(nlist))


@dataclass(frozen=True)
class IvfPqIndex:
    ids: tuple[str, ...]
    vectors: np.ndarray  # count x d raw vectors, re-rank source
    centroids: np.ndarray  # nlist x d
    assignments: np.ndarray  # count, uint32 coarse list per vector
    codebooks: np.ndarray  # m x ksub x dsub
    codes: np.ndarray  # count x m uint8
    seed: int
    lists: tuple[np.ndarray, ...] = ()  # inverted lists, derived from assignments
    flat_codes: np.ndarray | None = None  # codes with per-subspace offsets baked in

    def __post_init__(self):
        if not self.lists:
            object.__setattr__(self, "lists", _invert(self.assignments, self.nlist))
        if self.flat_codes is None:
            flat = self.codes.astype(np.int64) + np.arange(self.m) * _KSUB
            object.__setattr__(self, "flat_codes", flat)

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    @property
    def m(self) -> int:
        return self.codebooks.shape[0]

    def __len__(self) -> int:
        return len(self.ids)


def build_ivfpq(vectors: Mapping[str, np.ndarray], config: IvfConfig | None = None) -> IvfPqIndex:
    """Cluster vectors into coarse lists, then product-quantize residuals."""
    config = config or IvfConfig()
    ids = tuple(sorted(vectors))
    if not ids:
        raise ValueError("cannot index an empty vector set")
    X = np.asarray([np.asarray(vectors[i], dtype=float) for i in ids])
    n, d = X.shape
    nlist = config.nlist if config.nlist is not None else max(1, round(math.sqrt(n)))
    if n < nlist:
        raise ValueError(f"need at least nlist={nlist} vectors, got {n}")
    if d % config.m != 0:
        raise ValueError(f"dimension {d} is not divisible by m={config.m}")
    rng = np.random.default_rng(config.seed)
    centroids = _kmeans(X, nlist, config.kmeans_iters, rng)
    assign = _nearest(X, centroids).astype(np.uint32)
    residuals = X - centroids[assign]

    dsub = d // config.m
    codebooks = np.empty((config.m, _KSUB, dsub))
    codes = np.empty((n, config.m), dtype=np.uint8)
    for s in range(config.m):
        block = residuals[:, s * dsub : (s + 1) * dsub]
        codebooks[s] = _kmeans(block, _KSUB, config.kmeans_iters, rng)
        codes[:, s] = _nearest(block, codebooks[s]).astype(np.uint8)
    return IvfPqIndex(ids, X, centroids, assign, codebooks, codes, config.seed)


@dataclass(frozen=True)
class AnnResult:
    hits: tuple[tuple[str, float], ...]
    capped: bool  # k exceeded the indexed count; everything was returned


def _exact_order(vectors: np.ndarray, ids: Sequence[str], query: np.ndarray) -> list[tuple[str, float]]:
    dists = np.linalg.norm(vectors - query[None, :], axis=1)
    return sorted(zip(ids, dists.tolist()), key=lambda p: (p[1], p[0]))


def exact_knn(vectors: Mapping[str, np.ndarray], query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exhaustive Euclidean scan; ties broken by ascending id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ids = sorted(vectors)
    X = np.asarray([np.asarray(vectors[i], dtype=float) for i in ids])
    return _exact_order(X, ids, np.asarray(query, dtype=float))[:k]


def ann_query(
    index: IvfPqIndex,
    query: np.ndarray,
    k: int,
    nprobe: int = 8,
    rerank: bool = True,
) -> AnnResult:
    """Scan the nprobe nearest lists with asymmetric PQ distance tables.

    With rerank the best 4k PQ hits are re-scored on the stored raw
    vectors; final order is by (distance, id) ascending.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 1 <= nprobe <= index.nlist:
        raise ValueError(f"nprobe must lie in [1, {index.nlist}]")
    query = np.asarray(query, dtype=float)
    if query.shape != (index.d,):
        raise ValueError("query dimension does not match the index")
    capped = k > len(index)

    m = index.m
    dsub = index.d // m
    probe_d2 = ((index.centroids - query[None, :]) ** 2).sum(axis=1)
    probe_order = np.argsort(probe_d2, kind="stable")[:nprobe]

    cand_idx: list[np.ndarray] = []
    cand_d2: list[np.ndarray] = []
    for c in probe_order:
        members = index.lists[c]
        if not len(members):
            continue
        residual_q = (query - index.centroids[c]).reshape(m, 1, dsub)
        table = ((index.codebooks - residual_q) ** 2).sum(axis=2)
        cand_idx.append(members)
        cand_d2.append(table.ravel()[index.flat_codes[members]].sum(axis=1))
    if not cand_idx:
        return AnnResult((), capped)
    all_idx = np.concatenate(cand_idx)
    all_d2 = np.concatenate(cand_d2)

    # Select the pool by partition, then order the small remainder by
    # (distance, id). Boundary ties are kept so the id tie-break is exact.
    pool_n = min(len(all_d2), max(4 * k, k) if rerank else k)
    cut = np.partition(all_d2, pool_n - 1)[pool_n - 1]
    keep = np.nonzero(all_d2 <= cut)[0]
    approx = sorted(
        ((all_d2[i], index.ids[all_idx[i]], all_idx[i]) for i in keep.tolist()),
        key=lambda t: (t[0], t[1]),
    )[:pool_n]
    if rerank:
        rows = np.asarray([i for _, _, i in approx], dtype=int)
        ids = [vid for _, vid, _ in approx]
        hits = _exact_order(index.vectors[rows], ids, query)[:k]
    else:
        hits = [(vid, math.sqrt(d2)) for d2, vid, _ in approx[:k]]
    return AnnResult(tuple(hits), capped)


def save_index(index: IvfPqIndex, path) -> None:
    id_blob = json.dumps(list(index.ids)).encode("utf-8")
    header = np.asarray(
        [index.d, index.m, index.nlist, len(index), _KSUB, len(id_blob)],
        dtype="<u4",
    )
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header.tobytes())
        fh.write(id_blob)
        fh.write(index.assignments.astype("<u4").tobytes())
        fh.write(index.codes.astype("u1").tobytes())
        fh.write(index.centroids.astype("<f8").tobytes())
        fh.write(index.codebooks.astype("<f8").tobytes())
        fh.write(index.vectors.astype("<f8").tobytes())


def load_index(path) -> IvfPqIndex:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ValueError("not an index file (bad magic)")
    d, m, nlist, count, ksub, blob_len = np.frombuffer(raw, "<u4", count=6, offset=8)
    if ksub != _KSUB:
        raise ValueError(f"unsupported codebook size {ksub}")
    off = 8 + 24
    ids = tuple(json.loads(raw[off : off + blob_len].decode("utf-8")))
    off += int(blob_len)

    def take(dtype, shape):
        nonlocal off
        arr = np.frombuffer(raw, dtype, count=int(np.prod(shape)), offset=off)
        off += arr.nbytes
        return arr.reshape(shape).copy()

    assignments = take("<u4", (count,))
    codes = take("u1", (count, m))
    centroids = take("<f8", (nlist, d))
    codebooks = take("<f8", (m, ksub, d // m))
    vectors = take("<f8", (count, d))
    return IvfPqIndex(ids, vectors, centroids, assignments, codebooks, codes, seed=-1)


# ---------------------------------------------------------------------------
# Matrix factorization.


@dataclass(frozen=True)
class MfConfig:
    k: int = 32
    mu: float = 0.1
    sweeps: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.sweeps < 1:
            raise ValueError("k and sweeps must be positive")
        if self.mu < 0:
            raise ValueError("regularization must be non-negative")


@dataclass(frozen=True)
class FactorModel:
    candidate_ids: tuple[str, ...]
    role_ids: tuple[str, ...]
    U: np.ndarray  # N x k
    V: np.ndarray  # M x k
    mu: float
    loss_history: tuple[float, ...]  # regularized loss after each half-sweep

    def __post_init__(self):
        if self.U.shape[0] != len(self.candidate_ids) or self.V.shape[0] != len(self.role_ids):
            raise ValueError("factor shapes do not match id lists")
        if self.U.shape[1] != self.V.shape[1]:
            raise ValueError("U and V must share the latent dimension")
        if not (np.isfinite(self.U).all() and np.isfinite(self.V).all()):
            raise ValueError("factors must be finite")


def _als_loss(obs, U, V, mu) -> float:
    err = sum((val - float(U[ci] @ V[ri])) ** 2 for ci, ri, val in obs)
    return err + mu * (float((U**2).sum()) + float((V**2).sum()))


def train_mf(
    interactions: Sequence[tuple[str, str, float]],
    config: MfConfig | None = None,
) -> FactorModel:
    """Alternating least squares on the observed entries of R = U V^T."""
    config = config or MfConfig()
    if not interactions:
        raise ValueError("cannot factorize an empty interaction set")
    cids = tuple(sorted({c for c, _, _ in interactions}))
    rids = tuple(sorted({r for _, r, _ in interactions}))
    cpos = {c: i for i, c in enumerate(cids)}
    rpos = {r: i for i, r in enumerate(rids)}
    obs = [(cpos[c], rpos[r], float(v)) for c, r, v in interactions]
    by_cand: list[list[tuple[int, float]]] = [[] for _ in cids]
    by_role: list[list[tuple[int, float]]] = [[] for _ in rids]
    for ci, ri, val in obs:
        by_cand[ci].append((ri, val))
        by_role[ri].append((ci, val))

    k, mu = config.k, config.mu
    rng = np.random.default_rng(config.seed)
    U = rng.normal(scale=0.1, size=(len(cids), k))
    V = rng.normal(scale=0.1, size=(len(rids), k))
    eye = mu * np.eye(k)
    history = []
    for _ in range(config.sweeps):
        for ci, row in enumerate(by_cand):
            if not row:
                continue
            Vr = V[[ri for ri, _ in row]]
            y = np.asarray([val for _, val in row])
            U[ci] = np.linalg.solve(Vr.T @ Vr + eye, Vr.T @ y)
        history.append(_als_loss(obs, U, V, mu))
        for ri, col in enumerate(by_role):
            if not col:
                continue
            Uc = U[[ci for ci, _ in col]]
            y = np.asarray([val for _, val in col])
            V[ri] = np.linalg.solve(Uc.T @ Uc + eye, Uc.T @ y)
        history.append(_als_loss(obs, U, V, mu))
    return FactorModel(cids, rids, U, V, mu, tuple(history))


def cf_score(model: FactorModel, candidate_id: str, role_id: str) -> float:
    """Collaborative score in [0, 1]: logistic squash of the factor product."""
    try:
        ci = model.candidate_ids.index(candidate_id)
        ri = model.role_ids.index(role_id)
    except ValueError:
        raise ColdStartError(
            f"({candidate_id}, {role_id}) has no trained factors; fall back to content"
        ) from None
    z = 4.0 * float(model.U[ci] @ model.V[ri])
    return 1.0 / (1.0 + math.exp(-z))


def reconstruction_rmse(model: FactorModel, interactions: Sequence[tuple[str, str, float]]) -> float:
    cpos = {c: i for i, c in enumerate(model.candidate_ids)}
    rpos = {r: i for i, r in enumerate(model.role_ids)}
    sq = [
        (val - float(model.U[cpos[c]] @ model.V[rpos[r]])) ** 2
        for c, r, val in interactions
    ]
    return math.sqrt(sum(sq) / len(sq))


# ---------------------------------------------------------------------------
# Score fusion.


@dataclass(frozen=True)
class FusionWeights:
    alpha: float = 1 / 3  # content
    beta: float = 1 / 3  # collaborative
    gamma: float = 1 / 3  # graph

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("fusion weights must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError("fusion weights must sum to 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


def hybrid_score(content: float, collaborative: float, graph: float, weights: FusionWeights) -> float:
    for name, s in (("content", content), ("collaborative", collaborative), ("graph", graph)):
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"{name} score must lie in [0, 1], got {s}")
    return weights.alpha * content + weights.beta * collaborative + weights.gamma * graph


def auc_score(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = int(labels.sum())
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise ValueError("AUC needs both classes")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return (float(ranks[labels == 1].sum()) - pos * (pos + 1) / 2) / (pos * neg)


def fit_fusion_weights(
    history: Sequence[tuple[tuple[float, float, float], int]],
    folds: int = 5,
    step: float = 0.05,
    seed: int = 0,
) -> FusionWeights:
    """Grid search over the weight simplex, maximizing mean held-out AUC.

    Folds are stratified and seeded. Ties prefer larger alpha, then beta.
    """
    if not 0 < step <= 1:
        raise ValueError("step must lie in (0, 1]")
    triples = np.asarray([list(s) for s, _ in history], dtype=float)
    labels = np.asarray([y for _, y in history], dtype=int)
    pos = np.nonzero(labels == 1)[0]
    neg = np.nonzero(labels == 0)[0]
    if len(pos) < folds or len(neg) < folds:
        raise ValueError(f"need at least {folds} outcomes of each class")
    rng = np.random.default_rng(seed)
    pos = pos[rng.permutation(len(pos))]
    neg = neg[rng.permutation(len(neg))]
    fold_of = np.empty(len(labels), dtype=int)
    fold_of[pos] = np.arange(len(pos)) % folds
    fold_of[neg] = np.arange(len(neg)) % folds

    steps = round(1 / step)
    best: tuple[float, float, float] | None = None
    best_w = (1.0, 0.0, 0.0)
    for ia in range(steps, -1, -1):
        for ib in range(steps - ia, -1, -1):
            a, b = ia / steps, ib / steps
            g = max(0.0, 1.0 - a - b)
            fused = triples @ np.asarray([a, b, g])
            mean_auc = float(
                np.mean([auc_score(fused[fold_of == f], labels[fold_of == f]) for f in range(folds)])
            )
            key = (mean_auc, a, b)
            if best is None or key > best:
                best = key
                best_w = (a, b, g)
    return FusionWeights(*best_w)
