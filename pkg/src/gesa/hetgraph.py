"""Heterogeneous ecosystem graph with attention message passing.

Six node types (candidate, role, skill, organization, location, domain) and
six edge types. Node representations are trained by self-supervised link
prediction: sigmoid inner-product decoder, binary cross-entropy, uniform
negative sampling, full-batch gradient descent.

The forward/backward passes are hand-written numpy. Edges are expanded
symmetrically (each stored edge feeds messages in both directions), sorted
once by (receiver, edge type) so attention softmax and message aggregation
run as contiguous-segment reductions; the same sorted layout drives the
backward pass. Keeping the gradients explicit lets tests check every one of
them against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from gesa.embed import (
    EmbeddingProvider,
    candidate_text,
    cosine_similarity,
    embed_text,
    role_text,
)
from gesa.model import Dataset, validate_dataset

NODE_TYPES = ("candidate", "role", "skill", "organization", "location", "domain")
EDGE_TYPES = (
    "has_skill",
    "requires_skill",
    "located_in",
    "affiliated_with",
    "domain_related",
    "skill_similarity",
)

# edge type -> (allowed source node types, allowed target node types)
_SCHEMA = {
    "has_skill": (("candidate",), ("skill",)),
    "requires_skill": (("role",), ("skill",)),
    "located_in": (("candidate", "role"), ("location",)),
    "affiliated_with": (("candidate", "role"), ("organization",)),
    "domain_related": (("candidate", "role"), ("domain",)),
    "skill_similarity": (("skill",), ("skill",)),
}


class Edge(NamedTuple):
    src: str
    dst: str
    edge_type: str
    weight: float


class GraphSchemaError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch


class _Arrays:
    """Index-space view of a graph: symmetric edge lists sorted by
    (receiver, edge type), segment boundaries for reductions, and node-type
    groupings. Built once per graph."""

    def __init__(self, node_ids, node_types, features, edges):
        self.ids: tuple[str, ...] = tuple(node_ids)
        self.index = {v: i for i, v in enumerate(self.ids)}
        self.n = len(self.ids)
        self.X = np.asarray(features, dtype=float)
        type_idx = np.array([NODE_TYPES.index(t) for t in node_types])
        self.type_groups = {
            t: np.nonzero(type_idx == i)[0] for i, t in enumerate(NODE_TYPES)
        }

        recv, send, etype = [], [], []
        for e in edges:
            s, d, t = self.index[e.src], self.index[e.dst], EDGE_TYPES.index(e.edge_type)
            recv.append(d); send.append(s); etype.append(t)
            recv.append(s); send.append(d); etype.append(t)
        recv = np.array(recv, dtype=int)
        send = np.array(send, dtype=int)
        etype = np.array(etype, dtype=int)
        self.m2 = len(recv)

        if self.m2:
            order = np.lexsort((etype, recv))
            self.r_recv = recv[order]
            self.r_send = send[order]
            self.r_etype = etype[order]

            att_key = self.r_recv * len(EDGE_TYPES) + self.r_etype
            att_change = np.empty(self.m2, dtype=bool)
            att_change[0] = True
            att_change[1:] = att_key[1:] != att_key[:-1]
            self.att_starts = np.nonzero(att_change)[0]
            self.att_seg = np.cumsum(att_change) - 1

            recv_change = np.empty(self.m2, dtype=bool)
            recv_change[0] = True
            recv_change[1:] = self.r_recv[1:] != self.r_recv[:-1]
            self.recv_starts = np.nonzero(recv_change)[0]
            self.recv_nodes = self.r_recv[self.recv_starts]

            self.send_order = np.argsort(self.r_send, kind="stable")
            ss = self.r_send[self.send_order]
            send_change = np.empty(self.m2, dtype=bool)
            send_change[0] = True
            send_change[1:] = ss[1:] != ss[:-1]
            self.send_starts = np.nonzero(send_change)[0]
            self.send_nodes = ss[self.send_starts]

            touched = np.zeros(self.n, dtype=bool)
            touched[recv] = True
            self.isolated = np.nonzero(~touched)[0]
        else:
            self.r_recv = self.r_send = self.r_etype = np.empty(0, dtype=int)
            self.att_starts = self.att_seg = np.empty(0, dtype=int)
            self.recv_starts = self.recv_nodes = np.empty(0, dtype=int)
            self.send_order = self.send_starts = self.send_nodes = np.empty(0, dtype=int)
            self.isolated = np.arange(self.n)


class HeteroGraph:
    """Typed multigraph over the six entity classes; immutable after build."""

    def __init__(self, nodes: Mapping[str, tuple[str, np.ndarray]], edges: Sequence[Edge]):
        if not nodes:
            raise ValueError("graph needs at least one node")
        dims = set()
        for nid, (ntype, feat) in nodes.items():
            if ntype not in NODE_TYPES:
                raise GraphSchemaError(f"unknown node type {ntype!r} for {nid!r}")
            feat = np.asarray(feat, dtype=float)
            if feat.ndim != 1 or not np.all(np.isfinite(feat)):
                raise ValueError(f"node {nid!r} has a non-finite or non-vector feature")
            dims.add(feat.shape[0])
        if len(dims) != 1:
            raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
        self.nodes = {k: (t, np.asarray(f, dtype=float)) for k, (t, f) in nodes.items()}
        self.feature_dim = dims.pop()

        for e in edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise GraphSchemaError(f"edge {e} references a missing node")
            if e.edge_type not in EDGE_TYPES:
                raise GraphSchemaError(f"unknown edge type {e.edge_type!r}")
            src_ok, dst_ok = _SCHEMA[e.edge_type]
            if self.nodes[e.src][0] not in src_ok or self.nodes[e.dst][0] not in dst_ok:
                raise GraphSchemaError(
                    f"{e.edge_type} cannot connect {self.nodes[e.src][0]} "
                    f"to {self.nodes[e.dst][0]}"
                )
            if not 0.0 < e.weight <= 1.0:
                raise GraphSchemaError(f"edge weight {e.weight} outside (0, 1]")
        self.edges = tuple(edges)
        self._arrays: _Arrays | None = None
        self._adj: dict[str, tuple[str, ...]] | None = None
        self._edge_weight: dict[tuple[str, str], float] | None = None

    def node_type(self, node_id: str) -> str:
        return self.nodes[node_id][0]

    def arrays(self) -> _Arrays:
        if self._arrays is None:
            ids = list(self.nodes)
            self._arrays = _Arrays(
                ids,
                [self.nodes[i][0] for i in ids],
                np.stack([self.nodes[i][1] for i in ids]),
                self.edges,
            )
        return self._arrays

    def neighbors(self, node_id: str) -> tuple[str, ...]:
        if self._adj is None:
            adj: dict[str, set[str]] = {nid: set() for nid in self.nodes}
            for e in self.edges:
                adj[e.src].add(e.dst)
                adj[e.dst].add(e.src)
            self._adj = {nid: tuple(sorted(nbrs)) for nid, nbrs in adj.items()}
        return self._adj[node_id]

    def edge_weight(self, u: str, v: str) -> float:
        if self._edge_weight is None:
            w: dict[tuple[str, str], float] = {}
            for e in self.edges:
                w[(e.src, e.dst)] = e.weight
                w[(e.dst, e.src)] = e.weight
            self._edge_weight = w
        try:
            return self._edge_weight[(u, v)]
        except KeyError:
            raise ValueError(f"no edge between {u!r} and {v!r}") from None

    def make_path(self, node_ids: Sequence[str]) -> "Path":
        if len(node_ids) < 2:
            raise ValueError("a path needs at least two nodes")
        weights = tuple(
            self.edge_weight(a, b) for a, b in zip(node_ids, node_ids[1:])
        )
        return Path(tuple(node_ids), weights)


def build_graph(
    dataset: Dataset,
    provider: EmbeddingProvider,
    skill_sim_threshold: float = 0.5,
) -> HeteroGraph:
    """One node per entity; reference edges at weight 1.0; skill_similarity
    edges for skill pairs whose embedding cosine clears the threshold.

    There are deliberately no direct candidate-role edges: any
    candidate-to-role signal must flow through shared structure.
    """
    issues = validate_dataset(dataset)
    if issues:
        raise ValueError(f"dataset invalid: {issues[:3]}")
    if not 0.0 < skill_sim_threshold <= 1.0:
        raise ValueError("skill_sim_threshold must lie in (0, 1]")

    skill_names = {s.id: s.name for s in dataset.skills}
    nodes: dict[str, tuple[str, np.ndarray]] = {}
    for c in sorted(dataset.candidates, key=lambda x: x.id):
        nodes[c.id] = ("candidate", embed_text(provider, candidate_text(c, skill_names)))
    for r in sorted(dataset.roles, key=lambda x: x.id):
        nodes[r.id] = ("role", embed_text(provider, role_text(r, skill_names)))
    for s in sorted(dataset.skills, key=lambda x: x.id):
        nodes[s.id] = ("skill", embed_text(provider, f"{s.name} {s.text}".strip()))
    for o in sorted(dataset.organizations, key=lambda x: x.id):
        nodes[o.id] = ("organization", embed_text(provider, o.name))
    for l in sorted(dataset.locations, key=lambda x: x.id):
        nodes[l.id] = ("location", embed_text(provider, l.name))
    for d in sorted(dataset.domains, key=lambda x: x.id):
        nodes[d.id] = ("domain", embed_text(provider, d.name))

    edges: list[Edge] = []
    for c in sorted(dataset.candidates, key=lambda x: x.id):
        for sid in sorted(c.skill_ids):
            edges.append(Edge(c.id, sid, "has_skill", 1.0))
        edges.append(Edge(c.id, c.location_id, "located_in", 1.0))
        edges.append(Edge(c.id, c.org_id, "affiliated_with", 1.0))
        edges.append(Edge(c.id, c.domain_id, "domain_related", 1.0))
    for r in sorted(dataset.roles, key=lambda x: x.id):
        for sid in sorted(r.required_skill_ids):
            edges.append(Edge(r.id, sid, "requires_skill", 1.0))
        edges.append(Edge(r.id, r.location_id, "located_in", 1.0))
        edges.append(Edge(r.id, r.org_id, "affiliated_with", 1.0))
        edges.append(Edge(r.id, r.domain_id, "domain_related", 1.0))

    skill_ids = sorted(skill_names)
    if len(skill_ids) > 1:
        S = np.stack([nodes[sid][1] for sid in skill_ids])
        norms = np.linalg.norm(S, axis=1, keepdims=True)
        cos = (S / norms) @ (S / norms).T
        for i in range(len(skill_ids)):
            for j in range(i + 1, len(skill_ids)):
                c_ij = float(min(cos[i, j], 1.0))
                if c_ij >= skill_sim_threshold:
                    edges.append(Edge(skill_ids[i], skill_ids[j], "skill_similarity", c_ij))

    return HeteroGraph(nodes, edges)


@dataclass
class GnnParams:
    """Per-layer transforms: one matrix per node type, one attention vector
    per edge type; layer 0 maps feature_dim -> hidden, later layers
    hidden -> hidden. Attention vectors live in the layer's *input* space
    (length 2 * d_in)."""

    W: list[dict[str, np.ndarray]]
    a: list[dict[str, np.ndarray]]
    slope: float = 0.2

    def __post_init__(self):
        if not self.W or len(self.W) != len(self.a):
            raise ValueError("W and a must cover the same non-zero layer count")
        for l, (wl, al) in enumerate(zip(self.W, self.a)):
            shapes = {wl[t].shape for t in NODE_TYPES}
            if len(shapes) != 1:
                raise ValueError(f"layer {l}: node-type matrices disagree in shape")
            out_d, in_d = shapes.pop()
            if l > 0 and in_d != self.W[l - 1][NODE_TYPES[0]].shape[0]:
                raise ValueError(f"layer {l}: input dim does not chain from layer {l-1}")
            for t in EDGE_TYPES:
                if al[t].shape != (2 * in_d,):
                    raise ValueError(f"layer {l}: attention vector for {t} has wrong length")

    @property
    def layers(self) -> int:
        return len(self.W)

    def layer_dims(self, layer: int) -> tuple[int, int]:
        out_d, in_d = self.W[layer][NODE_TYPES[0]].shape
        return in_d, out_d

    @staticmethod
    def init(
        feature_dim: int, hidden_dim: int, layers: int = 3, seed: int = 0, slope: float = 0.2
    ) -> "GnnParams":
        if layers < 1:
            raise ValueError("need at least one layer")
        rng = np.random.default_rng(seed)
        W, a = [], []
        for l in range(layers):
            d_in = feature_dim if l == 0 else hidden_dim
            scale = 1.0 / math.sqrt(d_in)
            W.append({t: rng.normal(0.0, scale, (hidden_dim, d_in)) for t in NODE_TYPES})
            a.append({t: rng.normal(0.0, 0.3, 2 * d_in) for t in EDGE_TYPES})
        return GnnParams(W, a, slope)


@dataclass(frozen=True)
class LayerState:
    """Node representations at one layer, aligned with the graph's node order."""

    ids: tuple[str, ...]
    Z: np.ndarray

    def __post_init__(self):
        if self.Z.shape[0] != len(self.ids):
            raise ValueError("representation count does not match node count")
        if not np.all(np.isfinite(self.Z)):
            raise ValueError("non-finite representations")
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.ids)})

    def __getitem__(self, node_id: str) -> np.ndarray:
        return self.Z[self._index[node_id]]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    def to_dict(self) -> dict[str, np.ndarray]:
        return {nid: self.Z[i] for i, nid in enumerate(self.ids)}


def initial_state(graph: HeteroGraph) -> LayerState:
    ga = graph.arrays()
    return LayerState(ga.ids, ga.X.copy())


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _layer_forward(ga: _Arrays, params: GnnParams, Z: np.ndarray, layer: int):
    """One message-passing layer; returns (Z_next, cache for backward)."""
    slope = params.slope
    d_in = Z.shape[1]
    aL = np.stack([params.a[layer][t][:d_in] for t in EDGE_TYPES])
    aR = np.stack([params.a[layer][t][d_in:] for t in EDGE_TYPES])

    if ga.m2:
        Zr = Z[ga.r_recv]
        Zs = Z[ga.r_send]
        s = np.einsum("ij,ij->i", Zr, aL[ga.r_etype]) + np.einsum(
            "ij,ij->i", Zs, aR[ga.r_etype]
        )
        t = np.where(s > 0, s, slope * s)
        seg_max = np.maximum.reduceat(t, ga.att_starts)
        e = np.exp(t - seg_max[ga.att_seg])
        seg_sum = np.add.reduceat(e, ga.att_starts)
        alpha = e / seg_sum[ga.att_seg]

        M = np.zeros_like(Z)
        M[ga.recv_nodes] = np.add.reduceat(alpha[:, None] * Zs, ga.recv_starts, axis=0)
    else:
        s = alpha = np.empty(0)
        M = np.zeros_like(Z)
    if ga.isolated.size:
        M[ga.isolated] = Z[ga.isolated]

    out_d = params.W[layer][NODE_TYPES[0]].shape[0]
    pre = np.zeros((ga.n, out_d))
    for t_name in NODE_TYPES:
        idx = ga.type_groups[t_name]
        if idx.size:
            pre[idx] = M[idx] @ params.W[layer][t_name].T
    Z_next = _elu(pre)
    cache = (Z, s, alpha, M, pre, aL, aR)
    return Z_next, cache


def _layer_backward(ga: _Arrays, params: GnnParams, layer: int, cache, dZ_next):
    """Gradients of one layer; returns (dZ_in, dW dict, da dict)."""
    Z, s, alpha, M, pre, aL, aR = cache
    slope = params.slope

    elu_deriv = np.where(pre > 0, 1.0, np.exp(np.minimum(pre, 0.0)))
    dpre = dZ_next * elu_deriv

    dW = {}
    dM = np.zeros_like(M)
    for t_name in NODE_TYPES:
        idx = ga.type_groups[t_name]
        if idx.size:
            dW[t_name] = dpre[idx].T @ M[idx]
            dM[idx] = dpre[idx] @ params.W[layer][t_name]
        else:
            dW[t_name] = np.zeros_like(params.W[layer][t_name])

    dZ = np.zeros_like(Z)
    if ga.isolated.size:
        dZ[ga.isolated] += dM[ga.isolated]

    d_in = Z.shape[1]
    da = {t: np.zeros(2 * d_in) for t in EDGE_TYPES}
    if ga.m2:
        Zr = Z[ga.r_recv]
        Zs = Z[ga.r_send]
        dM_recv = dM[ga.r_recv]
        dalpha = np.einsum("ij,ij->i", dM_recv, Zs)
        seg_dot = np.add.reduceat(alpha * dalpha, ga.att_starts)
        dt = alpha * (dalpha - seg_dot[ga.att_seg])
        ds = dt * np.where(s > 0, 1.0, slope)

        for t_idx, t_name in enumerate(EDGE_TYPES):
            mask = ga.r_etype == t_idx
            if mask.any():
                da[t_name][:d_in] = ds[mask] @ Zr[mask]
                da[t_name][d_in:] = ds[mask] @ Zs[mask]

        recv_contrib = ds[:, None] * aL[ga.r_etype]
        send_contrib = ds[:, None] * aR[ga.r_etype] + alpha[:, None] * dM_recv
        dZ_recv_rows = np.add.reduceat(recv_contrib, ga.recv_starts, axis=0)
        dZ[ga.recv_nodes] += dZ_recv_rows
        ss = send_contrib[ga.send_order]
        dZ[ga.send_nodes] += np.add.reduceat(ss, ga.send_starts, axis=0)

    return dZ, dW, da


def forward(graph: HeteroGraph, params: GnnParams):
    """Full forward pass; returns (final Z, list of per-layer caches)."""
    ga = graph.arrays()
    in_d, _ = params.layer_dims(0)
    if in_d != ga.X.shape[1]:
        raise ValueError(
            f"layer 0 expects input dim {in_d}, graph features have {ga.X.shape[1]}"
        )
    Z = ga.X
    caches = []
    for l in range(params.layers):
        Z, cache = _layer_forward(ga, params, Z, l)
        caches.append(cache)
    return Z, caches


def message_pass(
    graph: HeteroGraph, params: GnnParams, state: LayerState, layer: int = 0
) -> LayerState:
    """Apply one layer of attention message passing to the given state."""
    ga = graph.arrays()
    if tuple(state.ids) != ga.ids:
        raise ValueError("state is not aligned with this graph")
    in_d, _ = params.layer_dims(layer)
    if state.dim != in_d:
        raise ValueError(f"layer {layer} expects dim {in_d}, state has {state.dim}")
    Z_next, _ = _layer_forward(ga, params, state.Z, layer)
    return LayerState(ga.ids, Z_next)


def attention_weights(
    graph: HeteroGraph,
    params: GnnParams,
    state: LayerState,
    node_id: str,
    edge_type: str,
    layer: int = 0,
) -> dict[str, float]:
    """Normalized attention over the node's neighborhood under one edge type."""
    ga = graph.arrays()
    if node_id not in ga.index:
        raise KeyError(node_id)
    if edge_type not in EDGE_TYPES:
        raise ValueError(f"unknown edge type {edge_type!r}")
    if tuple(state.ids) != ga.ids:
        raise ValueError("state is not aligned with this graph")
    _, cache = _layer_forward(ga, params, state.Z, layer)
    _, _, alpha, _, _, _, _ = cache
    v = ga.index[node_id]
    t_idx = EDGE_TYPES.index(edge_type)
    mask = (ga.r_recv == v) & (ga.r_etype == t_idx)
    if not mask.any():
        raise ValueError(f"{node_id!r} has no {edge_type} neighbors")
    return {
        ga.ids[ga.r_send[i]]: float(alpha[i]) for i in np.nonzero(mask)[0]
    }


@dataclass(frozen=True)
class GnnConfig:
    layers: int = 3
    hidden_dim: int = 64
    epochs: int = 200
    learning_rate: float = 0.05
    negative_ratio: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.hidden_dim < 1 or self.epochs < 1:
            raise ValueError("layers, hidden_dim, and epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be >= 1")


def loss_and_grads(graph: HeteroGraph, params: GnnParams, pairs):
    """Link-prediction BCE and analytic gradients for a fixed pair list.

    pairs: sequence of (u_id, v_id, y). Pure in all arguments, which is what
    makes finite-difference verification possible.
    """
    ga = graph.arrays()
    Z, caches = forward(graph, params)
    us = np.array([ga.index[u] for u, _, _ in pairs])
    vs = np.array([ga.index[v] for _, v, _ in pairs])
    ys = np.array([float(y) for _, _, y in pairs])
    n_pairs = len(pairs)
    if n_pairs == 0:
        raise ValueError("no pairs to score")

    scores = np.einsum("ij,ij->i", Z[us], Z[vs])
    # log sigma(x) = -log(1 + exp(-x)), stable in both tails
    loss = float(np.mean(ys * np.logaddexp(0.0, -scores) + (1 - ys) * np.logaddexp(0.0, scores)))

    coeff = (1.0 / (1.0 + np.exp(-scores)) - ys) / n_pairs
    dZ = np.zeros_like(Z)
    np.add.at(dZ, us, coeff[:, None] * Z[vs])
    np.add.at(dZ, vs, coeff[:, None] * Z[us])

    dWs: list[dict[str, np.ndarray]] = [None] * params.layers  # type: ignore[list-item]
    das: list[dict[str, np.ndarray]] = [None] * params.layers  # type: ignore[list-item]
    for l in range(params.layers - 1, -1, -1):
        dZ, dW, da = _layer_backward(ga, params, l, caches[l], dZ)
        dWs[l] = dW
        das[l] = da
    return loss, {"W": dWs, "a": das}, Z


def _sample_negatives(rng, n_nodes, forbidden, count):
    out = []
    attempts = 0
    cap = 50 * max(1, count)
    while len(out) < count:
        attempts += 1
        if attempts > cap:
            raise ValueError("could not sample enough negative pairs; graph too dense")
        u = int(rng.integers(0, n_nodes))
        v = int(rng.integers(0, n_nodes))
        if u == v or (u, v) in forbidden:
            continue
        out.append((u, v))
    return out


def train_link_prediction(graph: HeteroGraph, config: GnnConfig = GnnConfig()):
    """Train node embeddings; returns (params, final LayerState, loss history)."""
    if not graph.edges:
        raise ValueError("cannot train on a graph with no edges")
    ga = graph.arrays()
    params = GnnParams.init(
        ga.X.shape[1], config.hidden_dim, config.layers, seed=config.seed
    )
    rng = np.random.default_rng(config.seed)

    pos_idx = [(ga.index[e.src], ga.index[e.dst]) for e in graph.edges]
    forbidden = set(pos_idx) | {(v, u) for u, v in pos_idx}
    n_neg = len(pos_idx) * config.negative_ratio

    history: list[float] = []
    for epoch in range(config.epochs):
        negs = _sample_negatives(rng, ga.n, forbidden, n_neg)
        pairs = [(ga.ids[u], ga.ids[v], 1) for u, v in pos_idx] + [
            (ga.ids[u], ga.ids[v], 0) for u, v in negs
        ]
        loss, grads, _ = loss_and_grads(graph, params, pairs)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch, loss)
        history.append(loss)
        for l in range(params.layers):
            for t in NODE_TYPES:
                params.W[l][t] -= config.learning_rate * grads["W"][l][t]
            for t in EDGE_TYPES:
                params.a[l][t] -= config.learning_rate * grads["a"][l][t]

    Z, _ = forward(graph, params)
    return params, LayerState(ga.ids, Z), history


@dataclass(frozen=True)
class Path:
    """Node sequence with the traversed edge weights."""

    nodes: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        if len(self.weights) != len(self.nodes) - 1:
            raise ValueError("weight count must be node count minus one")


def path_strength(path: Path) -> float:
    """Product of step weights; in (0, 1] because each weight is."""
    strength = 1.0
    for w in path.weights:
        strength *= w
    return strength


@dataclass(frozen=True)
class WalkConfig:
    max_length: int = 4
    walks: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.max_length < 2:
            raise ValueError("walks need room for at least two nodes")
        if self.walks < 1:
            raise ValueError("need at least one walk")


def sample_paths(
    graph: HeteroGraph, candidate_id: str, role_id: str, config: WalkConfig = WalkConfig()
) -> list[Path]:
    """Seeded random walks from the candidate, kept when they reach the role.

    Walks traverse edges in both directions (a requires_skill edge is walked
    from skill to role as readily as role to skill), are truncated at the
    first hit, and deduplicated by node sequence.
    """
    for nid in (candidate_id, role_id):
        if nid not in graph.nodes:
            raise KeyError(f"unknown node {nid!r}")
    rng = np.random.default_rng(config.seed)
    seen: set[tuple[str, ...]] = set()
    found: list[Path] = []
    for _ in range(config.walks):
        cur = candidate_id
        seq = [cur]
        while len(seq) < config.max_length:
            nbrs = graph.neighbors(cur)
            if not nbrs:
                break
            cur = nbrs[int(rng.integers(0, len(nbrs)))]
            seq.append(cur)
            if cur == role_id:
                break
        if seq[-1] == role_id and tuple(seq) not in seen:
            seen.add(tuple(seq))
            found.append(graph.make_path(seq))
    return found


def graph_similarity(embeddings, candidate_id: str, role_id: str) -> float:
    """Cosine of trained embeddings rescaled to [0, 1]."""
    u = embeddings[candidate_id]
    v = embeddings[role_id]
    return (cosine_similarity(u, v) + 1.0) / 2.0


def write_loss_csv(history: Sequence[float], path) -> None:
    lines = ["epoch,loss"]
    lines.extend(f"{i},{repr(float(loss))}" for i, loss in enumerate(history))
    FsPath(path).write_text("\n".join(lines) + "\n")
