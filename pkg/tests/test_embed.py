"""Hash embedder behaviour and cosine similarity arithmetic."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gesa.embed import (
    HashingEmbedder,
    PrecomputedEmbeddings,
    candidate_text,
    cosine_similarity,
    embed_dataset_entities,
    embed_text,
    load_embeddings,
    normalize_text,
    save_embeddings,
)
from tests.conftest import make_dataset


class TestCosine:
    def test_identity(self):
        v = np.array([3.0, -1.0, 2.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_45_degrees(self):
        got = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert got == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.ones(3), np.ones(4))

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.zeros(3), np.ones(3))

    @given(
        st.lists(st.floats(-100, 100), min_size=2, max_size=8),
        st.lists(st.floats(-100, 100), min_size=2, max_size=8),
    )
    def test_symmetry_and_range(self, a, b):
        n = min(len(a), len(b))
        v, u = np.array(a[:n]), np.array(b[:n])
        if not (np.linalg.norm(v) > 1e-9 and np.linalg.norm(u) > 1e-9):
            return
        s1 = cosine_similarity(v, u)
        s2 = cosine_similarity(u, v)
        assert s1 == s2
        assert -1.0 - 1e-12 <= s1 <= 1.0 + 1e-12

    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.floats(0.01, 50),
        st.floats(0.01, 50),
    )
    def test_scale_invariance(self, a, sa, sb):
        v = np.array(a)
        if np.linalg.norm(v) < 1e-6:
            return
        u = np.array([1.0, 2.0, -0.5])
        assert cosine_similarity(sa * v, sb * u) == pytest.approx(
            cosine_similarity(v, u), abs=1e-12
        )


class TestHashingEmbedder:
    def test_deterministic(self):
        p1, p2 = HashingEmbedder(dim=64), HashingEmbedder(dim=64)
        v1 = embed_text(p1, "rust compiler")
        v2 = embed_text(p2, "rust compiler")
        np.testing.assert_array_equal(v1, v2)

    def test_unit_norm(self):
        p = HashingEmbedder(dim=64)
        for text in ("a", "rust compiler", "x y z w " * 10):
            assert np.linalg.norm(embed_text(p, text)) == pytest.approx(1.0, abs=1e-9)

    def test_empty_text_rejected(self):
        p = HashingEmbedder(dim=64)
        with pytest.raises(ValueError):
            embed_text(p, "   ")

    def test_dimension(self):
        assert HashingEmbedder().dim == 768
        assert HashingEmbedder(dim=32).embed("hello").shape == (32,)

    def test_word_order_beats_disjoint_vocab(self):
        # Shared unigrams keep "a b" closer to "b a" than to unrelated text.
        p = HashingEmbedder(dim=64)
        ab = embed_text(p, "a b")
        ba = embed_text(p, "b a")
        cd = embed_text(p, "c d")
        assert cosine_similarity(ab, ba) >= cosine_similarity(ab, cd)

    def test_normalization_of_input(self):
        p = HashingEmbedder(dim=64)
        np.testing.assert_array_equal(
            embed_text(p, "Rust   Compiler"), embed_text(p, "rust compiler")
        )
        assert normalize_text("  A \t B\n") == "a b"


class TestPrecomputed:
    def test_lookup_and_missing(self):
        pe = PrecomputedEmbeddings({"e1": np.array([1.0, 0.0])})
        np.testing.assert_array_equal(pe.vector("e1"), [1.0, 0.0])
        with pytest.raises(KeyError):
            pe.vector("e2")

    def test_inconsistent_dims_rejected(self):
        with pytest.raises(ValueError):
            PrecomputedEmbeddings({"a": np.ones(2), "b": np.ones(3)})

    def test_file_round_trip(self, tmp_path):
        vecs = {
            "c1": np.array([0.5, -0.25, 1.0 / 3.0]),
            "r1": np.array([1e-17, 2.0, -3.5]),
        }
        path = tmp_path / "vecs.tsv"
        save_embeddings(vecs, path)
        back = load_embeddings(path)
        assert set(back) == {"c1", "r1"}
        for k in vecs:
            np.testing.assert_array_equal(back[k], vecs[k])

    def test_file_format(self, tmp_path):
        path = tmp_path / "vecs.tsv"
        save_embeddings({"e1": np.array([1.0, 2.0])}, path)
        line = path.read_text().splitlines()[0]
        entity, values = line.split("\t")
        assert entity == "e1"
        assert [float(x) for x in values.split(",")] == [1.0, 2.0]


class TestEntityText:
    def test_candidate_text_includes_skills(self, tiny_dataset):
        cand = tiny_dataset.candidates[0]
        names = {s.id: s.name for s in tiny_dataset.skills}
        text = candidate_text(cand, names)
        assert "python" in text and "statistics" in text

    def test_embed_dataset_entities_covers_everything(self, tiny_dataset):
        p = HashingEmbedder(dim=32)
        vectors = embed_dataset_entities(p, tiny_dataset)
        expected = (
            {c.id for c in tiny_dataset.candidates}
            | {r.id for r in tiny_dataset.roles}
            | {s.id for s in tiny_dataset.skills}
        )
        assert set(vectors) == expected
        for v in vectors.values():
            assert v.shape == (32,)
