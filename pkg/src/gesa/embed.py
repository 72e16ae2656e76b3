"""Text embedding providers and cosine similarity.

The heavy transformer encoder is deliberately pluggable: anything satisfying
the provider contract (a `dim` attribute, a `deterministic` flag, and an
`embed(text)` method) can drive the engine. The bundled default hashes word
uni- and bi-grams into `dim` signed buckets, which is deterministic,
dependency-free, and preserves enough lexical overlap structure for the rest
of the pipeline to be testable. Precomputed vectors from an external encoder
can be loaded from file instead.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Mapping, Protocol

import numpy as np

from gesa.model import Candidate, Dataset, Role


class EmbeddingProvider(Protocol):
    dim: int
    deterministic: bool

    def embed(self, text: str) -> np.ndarray: ...


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def _bucket(token: str, dim: int) -> tuple[int, float]:
    # Stable across processes; Python's builtin hash() is salted per run.
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    sign = 1.0 if value & 1 else -1.0
    return (value >> 1) % dim, sign


class HashingEmbedder:
    """Signed feature hashing of word uni/bi-grams, L2-normalized."""

    def __init__(self, dim: int = 768):
        if dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self.dim = dim
        self.deterministic = True

    def embed(self, text: str) -> np.ndarray:
        norm = normalize_text(text)
        if not norm:
            raise ValueError("cannot embed empty or whitespace-only text")
        words = norm.split(" ")
        grams: list[str] = list(words)
        grams.extend(f"{a} {b}" for a, b in zip(words, words[1:]))
        vec = np.zeros(self.dim)
        for gram in grams:
            idx, sign = _bucket(gram, self.dim)
            vec[idx] += sign
        length = float(np.linalg.norm(vec))
        if length == 0.0:
            # All buckets cancelled; fall back to a deterministic unit vector.
            idx, _ = _bucket(norm, self.dim)
            vec[idx] = 1.0
            length = 1.0
        return vec / length


class PrecomputedEmbeddings:
    """Provider backed by a vector-per-entity file (external encoder output)."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        if not vectors:
            raise ValueError("no vectors given")
        dims = {v.shape[0] for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        self.deterministic = True
        self._vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._vectors

    def vector(self, entity_id: str) -> np.ndarray:
        try:
            return self._vectors[entity_id]
        except KeyError:
            raise KeyError(f"no precomputed embedding for {entity_id!r}") from None

    def items(self):
        return self._vectors.items()


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    """Embed one text; raises ValueError on empty input after normalization."""
    if not normalize_text(text):
        raise ValueError("cannot embed empty or whitespace-only text")
    vec = np.asarray(provider.embed(text), dtype=float)
    if vec.shape != (provider.dim,):
        raise ValueError(f"provider returned shape {vec.shape}, expected ({provider.dim},)")
    if not np.all(np.isfinite(vec)):
        raise ValueError("provider returned non-finite entries")
    return vec


def cosine_similarity(v: np.ndarray, u: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if v.shape != u.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {u.shape}")
    nv = float(np.linalg.norm(v))
    nu = float(np.linalg.norm(u))
    if nv == 0.0 or nu == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.dot(v, u) / (nv * nu))


def candidate_text(candidate: Candidate, skill_names: Mapping[str, str]) -> str:
    """Profile text plus held skill names, the flat stand-in for hierarchical
    per-component embedding (which is not implemented)."""
    parts = [candidate.free_text]
    parts.extend(skill_names.get(sid, sid) for sid in candidate.skill_ids)
    return " ".join(p for p in parts if p)


def role_text(role: Role, skill_names: Mapping[str, str]) -> str:
    parts = [role.free_text]
    parts.extend(skill_names.get(sid, sid) for sid in role.required_skill_ids)
    return " ".join(p for p in parts if p)


def embed_dataset_entities(provider: EmbeddingProvider, dataset: Dataset) -> dict[str, np.ndarray]:
    """Embed every candidate, role, and skill, keyed by entity id."""
    names = {s.id: s.name for s in dataset.skills}
    out: dict[str, np.ndarray] = {}
    for c in dataset.candidates:
        out[c.id] = embed_text(provider, candidate_text(c, names) or c.id)
    for r in dataset.roles:
        out[r.id] = embed_text(provider, role_text(r, names) or r.id)
    for s in dataset.skills:
        out[s.id] = embed_text(provider, s.name or s.id)
    return out


# File format: one record per line, `entity_id<TAB>v1,v2,...,vd`.

def save_embeddings(vectors: Mapping[str, np.ndarray], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entity_id in sorted(vectors):
            values = ",".join(repr(float(x)) for x in vectors[entity_id])
            fh.write(f"{entity_id}\t{values}\n")


def load_embeddings(path) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                entity_id, payload = line.split("\t", 1)
                vectors[entity_id] = np.array([float(x) for x in payload.split(",")])
            except ValueError as exc:
                raise ValueError(f"bad embedding record at line {lineno}: {exc}") from exc
    return vectors


def iter_entity_ids(dataset: Dataset) -> Iterable[str]:
    for c in dataset.candidates:
        yield c.id
    for r in dataset.roles:
        yield r.id
    for s in dataset.skills:
        yield s.id
