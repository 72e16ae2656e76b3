"""Index, factorization, and fusion tests. exact_knn is the recall oracle;
the AUC helper is cross-checked against the naive pairwise count."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benchmarks import pairwise_auc
from gesa.recsys import (
    AnnResult,
    ColdStartError,
    FactorModel,
    FusionWeights,
    IvfConfig,
    MfConfig,
    ann_query,
    auc_score,
    build_ivfpq,
    cf_score,
    exact_knn,
    fit_fusion_weights,
    hybrid_score,
    load_index,
    reconstruction_rmse,
    save_index,
    train_mf,
)


def gaussian_vectors(n, d, seed):
    rng = np.random.default_rng(seed)
    return {f"v{i:05d}": rng.normal(size=d) for i in range(n)}


@pytest.fixture(scope="module")
def small_index():
    vectors = gaussian_vectors(300, 32, seed=1)
    index = build_ivfpq(vectors, IvfConfig(nlist=16, m=4, kmeans_iters=8, seed=2))
    return vectors, index


def test_every_id_lands_in_exactly_one_list(small_index):
    vectors, index = small_index
    assert len(index) == len(vectors)
    assert sorted(index.ids) == sorted(vectors)
    assert index.assignments.shape == (len(vectors),)
    assert index.assignments.max() < index.nlist


def test_nlist_one_degenerates_to_single_list():
    vectors = gaussian_vectors(30, 8, seed=3)
    index = build_ivfpq(vectors, IvfConfig(nlist=1, m=2, seed=0))
    assert np.all(index.assignments == 0)


def test_build_is_seed_deterministic():
    vectors = gaussian_vectors(80, 16, seed=4)
    cfg = IvfConfig(nlist=8, m=4, seed=9)
    a = build_ivfpq(vectors, cfg)
    b = build_ivfpq(vectors, cfg)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.codes, b.codes)
    assert np.array_equal(a.assignments, b.assignments)


def test_build_rejects_too_few_vectors():
    with pytest.raises(ValueError, match="nlist"):
        build_ivfpq(gaussian_vectors(5, 8, seed=0), IvfConfig(nlist=10, m=2))


def test_build_rejects_indivisible_dimension():
    with pytest.raises(ValueError, match="divisible"):
        build_ivfpq(gaussian_vectors(20, 10, seed=0), IvfConfig(nlist=2, m=3))


def test_indexed_vector_is_its_own_nearest(small_index):
    vectors, index = small_index
    res = ann_query(index, vectors["v00042"], k=1, nprobe=index.nlist, rerank=True)
    assert res.hits[0][0] == "v00042"
    assert res.hits[0][1] == 0.0
    assert not res.capped


def test_full_probe_rerank_matches_exact_scan(small_index):
    """The 4k re-rank pool covers everything here, so equality is exact."""
    vectors, index = small_index
    rng = np.random.default_rng(7)
    for _ in range(5):
        q = rng.normal(size=32)
        for k in (75, len(vectors)):
            res = ann_query(index, q, k=k, nprobe=index.nlist, rerank=True)
            assert list(res.hits) == exact_knn(vectors, q, k)


def test_recall_non_decreasing_in_nprobe(small_index):
    vectors, index = small_index
    rng = np.random.default_rng(11)
    queries = [rng.normal(size=32) for _ in range(20)]
    truth = [set(i for i, _ in exact_knn(vectors, q, 10)) for q in queries]
    recalls = []
    for nprobe in (1, 2, 4, 8, 16):
        got = [
            set(i for i, _ in ann_query(index, q, 10, nprobe=nprobe).hits)
            for q in queries
        ]
        recalls.append(np.mean([len(g & t) / 10 for g, t in zip(got, truth)]))
    assert all(b >= a for a, b in zip(recalls, recalls[1:]))
    assert recalls[-1] >= 0.9


def test_oversized_k_returns_everything_flagged(small_index):
    vectors, index = small_index
    res = ann_query(index, np.zeros(32), k=5000, nprobe=index.nlist)
    assert res.capped
    assert len(res.hits) == len(vectors)


def test_query_validation(small_index):
    _, index = small_index
    with pytest.raises(ValueError, match="nprobe"):
        ann_query(index, np.zeros(32), k=1, nprobe=0)
    with pytest.raises(ValueError, match="nprobe"):
        ann_query(index, np.zeros(32), k=1, nprobe=index.nlist + 1)
    with pytest.raises(ValueError, match="k must"):
        ann_query(index, np.zeros(32), k=0)
    with pytest.raises(ValueError, match="dimension"):
        ann_query(index, np.zeros(31), k=1)


def test_rerank_reports_true_distances(small_index):
    vectors, index = small_index
    q = np.random.default_rng(13).normal(size=32)
    res = ann_query(index, q, k=5, nprobe=4, rerank=True)
    for vid, dist in res.hits:
        assert math.isclose(dist, float(np.linalg.norm(vectors[vid] - q)), abs_tol=1e-12)


def test_exact_knn_basics():
    vectors = {"a": np.array([0.0, 0.0]), "b": np.array([3.0, 4.0])}
    assert exact_knn(vectors, np.array([0.0, 0.0]), 1) == [("a", 0.0)]
    hits = exact_knn(vectors, np.array([1.0, 1.0]), 2)
    assert [h[0] for h in hits] == ["a", "b"]


def test_exact_knn_breaks_ties_by_id():
    vectors = {"z": np.array([1.0, 0.0]), "a": np.array([0.0, 1.0])}
    hits = exact_knn(vectors, np.array([0.0, 0.0]), 2)
    assert [h[0] for h in hits] == ["a", "z"]


def test_index_roundtrip(tmp_path, small_index):
    vectors, index = small_index
    path = tmp_path / "peers.idx"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.ids == index.ids
    assert np.array_equal(loaded.codes, index.codes)
    assert np.array_equal(loaded.vectors, index.vectors)
    q = np.random.default_rng(17).normal(size=32)
    assert ann_query(loaded, q, 7, nprobe=3) == ann_query(index, q, 7, nprobe=3)
    again = tmp_path / "peers2.idx"
    save_index(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.idx"
    path.write_bytes(b"NOTANIDX" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_index(path)


# ---------------------------------------------------------------------------
# Matrix factorization.


def rank1_interactions(n=18, m=12, seed=0, value=None):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 1.5, size=n)
    b = rng.uniform(0.5, 1.5, size=m)
    out = []
    for i in range(n):
        for j in range(m):
            val = value if value is not None else a[i] * b[j]
            out.append((f"c{i:02d}", f"r{j:02d}", float(val)))
    return out


def test_rank1_matrix_is_recovered():
    inter = rank1_interactions()
    model = train_mf(inter, MfConfig(k=2, mu=1e-6, sweeps=20, seed=1))
    assert reconstruction_rmse(model, inter) <= 1e-3


def test_loss_non_increasing_every_half_sweep():
    rng = np.random.default_rng(5)
    inter = [
        (f"c{i}", f"r{j}", float(rng.uniform()))
        for i in range(15)
        for j in range(10)
        if rng.uniform() < 0.4
    ]
    model = train_mf(inter, MfConfig(k=4, mu=0.1, sweeps=12, seed=2))
    hist = model.loss_history
    assert len(hist) == 24
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_training_is_seed_deterministic():
    inter = rank1_interactions(seed=3)
    a = train_mf(inter, MfConfig(k=3, sweeps=5, seed=7))
    b = train_mf(inter, MfConfig(k=3, sweeps=5, seed=7))
    assert np.array_equal(a.U, b.U) and np.array_equal(a.V, b.V)


def test_empty_interactions_rejected():
    with pytest.raises(ValueError, match="empty"):
        train_mf([])


def test_cf_score_of_zero_factors_is_half():
    model = FactorModel(("c",), ("r",), np.zeros((1, 2)), np.zeros((1, 2)), 0.1, (0.0,))
    assert cf_score(model, "c", "r") == 0.5


def test_cf_score_high_for_trained_positive():
    inter = rank1_interactions(value=1.0)
    model = train_mf(inter, MfConfig(k=2, mu=1e-6, sweeps=20, seed=4))
    assert cf_score(model, "c00", "r00") > 0.9


def test_cold_start_is_a_signal_not_a_number():
    inter = rank1_interactions(n=4, m=3)
    model = train_mf(inter, MfConfig(k=2, sweeps=3, seed=0))
    with pytest.raises(ColdStartError, match="fall back"):
        cf_score(model, "stranger", "r00")


# ---------------------------------------------------------------------------
# Fusion.


def test_hybrid_projects_on_vertex_weights():
    assert hybrid_score(0.37, 0.9, 0.1, FusionWeights(1, 0, 0)) == 0.37


def test_hybrid_arithmetic():
    got = hybrid_score(0.5, 1.0, 0.0, FusionWeights(0.4, 0.4, 0.2))
    assert abs(got - 0.6) < 1e-12


@given(
    s=st.floats(0, 1),
    a=st.floats(0, 1),
    b=st.floats(0, 1),
)
@settings(max_examples=50, deadline=None)
def test_hybrid_of_equal_components_is_that_value(s, a, b):
    if a + b > 1:
        a, b = a / 2, b / 2
    w = FusionWeights(a, b, 1 - a - b)
    assert abs(hybrid_score(s, s, s, w) - s) < 1e-9


@given(
    scores=st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)),
)
@settings(max_examples=50, deadline=None)
def test_hybrid_stays_inside_component_hull(scores):
    got = hybrid_score(*scores, FusionWeights(0.2, 0.5, 0.3))
    assert min(scores) - 1e-12 <= got <= max(scores) + 1e-12


def test_weight_invariants_enforced():
    with pytest.raises(ValueError):
        FusionWeights(-0.1, 0.6, 0.5)
    with pytest.raises(ValueError):
        FusionWeights(0.5, 0.5, 0.5)
    with pytest.raises(ValueError, match="content"):
        hybrid_score(1.5, 0.5, 0.5, FusionWeights(1, 0, 0))


def test_auc_matches_pairwise_count_oracle():
    rng = np.random.default_rng(19)
    for _ in range(10):
        scores = rng.uniform(size=30).round(1)  # rounding forces ties
        labels = rng.integers(0, 2, size=30)
        if labels.sum() in (0, 30):
            labels[0] = 1 - labels[0]
        oracle = pairwise_auc(scores[labels == 1], scores[labels == 0])
        assert abs(auc_score(scores, labels) - oracle) < 1e-12


def test_auc_needs_both_classes():
    with pytest.raises(ValueError, match="both classes"):
        auc_score([0.1, 0.2], [1, 1])


def fusion_history(seed, n=60, content_signal=True):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        y = i % 2
        if content_signal:
            content = 0.75 + 0.2 * rng.uniform() if y else 0.05 + 0.2 * rng.uniform()
        else:
            content = 0.5
        out.append(((content, float(rng.uniform()), float(rng.uniform())), y))
    return out


def test_fusion_finds_content_when_it_alone_separates():
    w = fit_fusion_weights(fusion_history(seed=23), folds=5, step=0.05, seed=1)
    assert w == FusionWeights(1.0, 0.0, 0.0)


def test_fusion_tiebreak_on_uninformative_scores():
    history = [((0.5, 0.5, 0.5), i % 2) for i in range(40)]
    w = fit_fusion_weights(history, folds=5, step=0.05, seed=2)
    assert w == FusionWeights(1.0, 0.0, 0.0)


def test_fusion_is_seed_deterministic():
    hist = fusion_history(seed=29, content_signal=False)
    hist = [((float(np.random.default_rng(i).uniform()), s[1], s[2]), y) for i, (s, y) in enumerate(hist)]
    a = fit_fusion_weights(hist, seed=3)
    b = fit_fusion_weights(hist, seed=3)
    assert a == b


def test_fusion_rejects_class_starvation():
    history = [((0.5, 0.5, 0.5), 1)] * 20 + [((0.4, 0.4, 0.4), 0)] * 3
    with pytest.raises(ValueError, match="each class"):
        fit_fusion_weights(history, folds=5)
