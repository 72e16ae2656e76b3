"""Reversal layer semantics, loss-head gradients vs finite differences,
training bookkeeping, the leakage probe, and the fairness metric suite."""

import math

import numpy as np
import pytest

from gesa.debias import (
    DebiasConfig,
    DebiasedEncoder,
    FairnessReport,
    adversary_loss,
    allocation_loss,
    build_fairness_report,
    calibration_error,
    composite_fairness_score,
    demographic_parity_difference,
    equalized_opportunity_difference,
    expected_calibration_error,
    individual_score_gap,
    leakage_probe,
    reconstruction_loss,
    reverse_scale,
    reverse_scale_backward,
    train_adversarial,
)


class TestReverseScale:
    def test_forward_identity(self):
        x = np.array([1.0, -2.0, 3.5])
        np.testing.assert_array_equal(reverse_scale(x), x)

    def test_backward_scales_and_negates(self):
        g = np.array([2.0, -4.0])
        np.testing.assert_array_equal(reverse_scale_backward(g, 0.5), [-1.0, 2.0])

    def test_backward_lambda_zero(self):
        g = np.array([2.0, -4.0])
        np.testing.assert_array_equal(reverse_scale_backward(g, 0.0), [0.0, 0.0])


def small_instance(seed=17):
    """8 labeled candidates plus 2 unlabeled rows, all with embeddings."""
    rng = np.random.default_rng(seed)
    ids = [f"c{i}" for i in range(8)] + ["r0", "r1"]
    emb = {i: rng.normal(size=6) for i in ids}
    pairs = [
        ("c0", "r0", 1), ("c1", "r0", 0), ("c2", "r1", 1), ("c3", "r1", 0),
        ("c4", "r0", 1), ("c5", "r1", 0),
    ]
    sensitive = {
        f"c{i}": {"gender": "a" if i % 2 else "b", "region": ["n", "s", "e"][i % 3]}
        for i in range(8)
    }
    return emb, pairs, sensitive


def small_model(seed=3):
    cats = (("gender", ("a", "b")), ("region", ("e", "n", "s")))
    cfg = DebiasConfig(encoder_hidden=5, repr_dim=4, adversary_hidden=3,
                       decoder_hidden=5, epochs=1, seed=seed)
    return DebiasedEncoder(6, cfg, cats, seed=seed)


def rel_gap(a, f):
    return abs(a - f) / max(abs(a) + abs(f), 1e-6)


def sweep_fd(param_arrays, loss_fn, analytic, h=1e-5, tol=1e-4):
    """Check every entry of every array against central differences."""
    worst = 0.0
    for name, arr in param_arrays.items():
        grad = analytic[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            lp = loss_fn()
            arr[idx] = orig - h
            lm = loss_fn()
            arr[idx] = orig
            fd = (lp - lm) / (2 * h)
            worst = max(worst, rel_gap(float(grad[idx]), fd))
    assert worst <= tol, f"worst relative gradient gap {worst}"


class TestGradients:
    def setup_method(self):
        rng = np.random.default_rng(29)
        self.model = small_model()
        self.X = rng.normal(size=(10, 6))
        self.pairs = [(0, 8, 1), (1, 8, 0), (2, 9, 1), (3, 9, 0), (4, 8, 1)]
        self.rows = np.arange(8)
        self.labels = {
            "gender": np.array([0, 1, 0, 1, 0, 1, 0, 1]),
            "region": np.array([0, 1, 2, 0, 1, 2, 0, 1]),
        }

    def test_allocation_head(self):
        _, grads = allocation_loss(self.model, self.X, self.pairs)
        sweep_fd(
            self.model.encoder_params(),
            lambda: allocation_loss(self.model, self.X, self.pairs)[0],
            grads,
        )

    def test_adversary_head_own_params(self):
        _, adv_grads, _ = adversary_loss(self.model, self.X, self.rows, self.labels)
        sweep_fd(
            self.model.adversary_params(),
            lambda: adversary_loss(self.model, self.X, self.rows, self.labels)[0],
            adv_grads,
        )

    def test_adversary_head_through_encoder(self):
        _, _, enc_grads = adversary_loss(self.model, self.X, self.rows, self.labels)
        sweep_fd(
            self.model.encoder_params(),
            lambda: adversary_loss(self.model, self.X, self.rows, self.labels)[0],
            enc_grads,
        )

    def test_reconstruction_head(self):
        _, dec_grads, enc_grads = reconstruction_loss(self.model, self.X)
        sweep_fd(
            self.model.decoder_params(),
            lambda: reconstruction_loss(self.model, self.X)[0],
            dec_grads,
        )
        sweep_fd(
            self.model.encoder_params(),
            lambda: reconstruction_loss(self.model, self.X)[0],
            enc_grads,
        )

    def test_reversal_is_applied_to_encoder_update(self):
        # The encoder's adversarial step must equal reverse_scale_backward of
        # the raw gradient, entry for entry.
        _, _, enc_grads = adversary_loss(self.model, self.X, self.rows, self.labels)
        lam = 0.7
        for k, g in enc_grads.items():
            np.testing.assert_allclose(
                reverse_scale_backward(g, lam), -lam * g, atol=0
            )


class TestTraining:
    def test_loss_identity_every_epoch(self):
        emb, pairs, sensitive = small_instance()
        cfg = DebiasConfig(lam=0.5, beta=0.1, epochs=25, seed=2,
                           encoder_hidden=8, repr_dim=4, adversary_hidden=4,
                           decoder_hidden=8)
        _, history = train_adversarial(emb, pairs, sensitive, cfg)
        assert len(history) == 25
        for h in history:
            expected = h.allocation - 0.5 * h.adversarial + 0.1 * h.reconstruction
            assert h.total == pytest.approx(expected, abs=1e-9)

    def test_deterministic(self):
        emb, pairs, sensitive = small_instance()
        cfg = DebiasConfig(epochs=10, seed=5)
        _, h1 = train_adversarial(emb, pairs, sensitive, cfg)
        _, h2 = train_adversarial(emb, pairs, sensitive, cfg)
        assert h1 == h2

    def test_degenerate_match_labels_rejected(self):
        emb, pairs, sensitive = small_instance()
        all_pos = [(i, j, 1) for i, j, _ in pairs]
        with pytest.raises(ValueError):
            train_adversarial(emb, all_pos, sensitive, DebiasConfig(epochs=1))

    def test_missing_embedding_rejected(self):
        emb, pairs, sensitive = small_instance()
        del emb["c0"]
        with pytest.raises(ValueError):
            train_adversarial(emb, pairs, sensitive, DebiasConfig(epochs=1))

    def test_encode_shape(self):
        emb, pairs, sensitive = small_instance()
        cfg = DebiasConfig(epochs=2, repr_dim=7, seed=1)
        model, _ = train_adversarial(emb, pairs, sensitive, cfg)
        z = model.encode(emb["c1"])
        assert z.shape == (7,)
        Z = model.encode(np.stack([emb["c1"], emb["c2"]]))
        assert Z.shape == (2, 7)
        np.testing.assert_allclose(Z[0], z)


class TestLeakageProbe:
    def test_no_signal_matches_majority_rate(self):
        n = 1000
        reps = {f"c{i}": np.ones(4) for i in range(n)}
        labels = {f"c{i}": "a" if i < 600 else "b" for i in range(n)}
        acc = leakage_probe(reps, labels, seed=0)
        assert acc == pytest.approx(0.6, abs=0.05)

    def test_perfect_signal(self):
        rng = np.random.default_rng(0)
        labels = {f"c{i}": "ab"[int(rng.integers(0, 2))] for i in range(200)}
        reps = {
            cid: np.array([1.0, 0.0]) if l == "a" else np.array([0.0, 1.0])
            for cid, l in labels.items()
        }
        assert leakage_probe(reps, labels, seed=1) >= 0.99

    def test_reproducible(self):
        rng = np.random.default_rng(4)
        reps = {f"c{i}": rng.normal(size=5) for i in range(100)}
        labels = {
            f"c{i}": "a" if reps[f"c{i}"][0] + 0.5 * rng.normal() > 0 else "b"
            for i in range(100)
        }
        a1 = leakage_probe(reps, labels, seed=9)
        a2 = leakage_probe(reps, labels, seed=9)
        assert a1 == a2

    def test_single_class_rejected(self):
        reps = {"c0": np.ones(2), "c1": np.ones(2)}
        with pytest.raises(ValueError):
            leakage_probe(reps, {"c0": "a", "c1": "a"})


class TestParityMetrics:
    def test_dp_examples(self):
        sel = [1, 0, 1, 0]
        grp = ["A", "A", "B", "B"]
        assert demographic_parity_difference(sel, grp) == 0.0
        assert demographic_parity_difference([1, 1, 0, 0], grp) == 1.0
        sel3 = [1, 1, 1, 0, 0, 1, 0, 0, 1, 0, 1, 0]
        grp3 = ["A"] * 5 + ["B"] * 5 + ["C"] * 2
        assert demographic_parity_difference(sel3, grp3) == pytest.approx(0.2)

    def test_dp_permutation_invariant(self):
        sel = [1, 0, 1, 1, 0, 0]
        grp = ["A", "B", "A", "B", "A", "B"]
        base = demographic_parity_difference(sel, grp)
        order = [3, 1, 4, 0, 5, 2]
        assert demographic_parity_difference(
            [sel[i] for i in order], [grp[i] for i in order]
        ) == pytest.approx(base)

    def test_dp_single_group_rejected(self):
        with pytest.raises(ValueError):
            demographic_parity_difference([1, 0], ["A", "A"])

    def test_eo_examples(self):
        sel = [1, 1, 1, 0]
        qual = [1, 1, 1, 1]
        grp = ["A", "A", "B", "B"]
        assert equalized_opportunity_difference([1, 1, 1, 1], qual, grp) == 0.0
        assert equalized_opportunity_difference(sel, qual, grp) == pytest.approx(0.5)

    def test_eo_three_groups(self):
        sel = [1, 1, 1, 1, 1, 1, 1, 0, 1, 0]
        qual = [1] * 10
        grp = ["A"] * 5 + ["B"] * 0 + ["C"] * 5
        # TPR A = 1.0, C = 0.6
        assert equalized_opportunity_difference(sel, qual, grp) == pytest.approx(0.4)

    def test_eo_zero_qualified_rejected(self):
        with pytest.raises(ValueError):
            equalized_opportunity_difference([1, 0], [1, 0], ["A", "B"])


class TestCalibration:
    def test_identical_perfect_groups(self):
        scores = [0.25, 0.25, 0.75, 0.75] * 2
        outcomes = [0, 1, 1, 1, 0, 1, 1, 1]  # bin means match confidences
        # 0.25-bin: conf 0.25 acc 0.5 per group -> equal ECEs, gap 0
        grp = ["A"] * 4 + ["B"] * 4
        assert calibration_error(scores, outcomes, grp) == pytest.approx(0.0)

    def test_extreme_gap(self):
        scores = [1.0, 1.0, 1.0, 1.0]
        outcomes = [1, 1, 0, 0]
        grp = ["A", "A", "B", "B"]
        assert calibration_error(scores, outcomes, grp) == pytest.approx(1.0)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(23)
        scores = rng.random(400)
        outcomes = (rng.random(400) < scores).astype(float)
        grp = np.where(rng.random(400) < 0.5, "A", "B")

        def naive_ece(s, o, bins=10):
            total = 0.0
            for b in range(bins):
                lo, hi = b / bins, (b + 1) / bins
                if b == bins - 1:
                    mask = (s >= lo) & (s <= hi)
                else:
                    mask = (s >= lo) & (s < hi)
                if not mask.any():
                    continue
                total += (mask.sum() / len(s)) * abs(s[mask].mean() - o[mask].mean())
            return total

        eces = [naive_ece(scores[grp == g], outcomes[grp == g]) for g in ("A", "B")]
        want = max(eces) - min(eces)
        got = calibration_error(scores, outcomes, grp)
        assert got == pytest.approx(want, abs=1e-12)

    def test_scores_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            expected_calibration_error([1.2], [1])


class TestComposite:
    def test_extremes(self):
        assert composite_fairness_score(0, 0, 0) == 1.0
        assert composite_fairness_score(1, 1, 1) == 0.0

    def test_arithmetic(self):
        assert composite_fairness_score(0.2, 0.1, 0.0) == pytest.approx(0.9)

    def test_monotone_in_each_component(self):
        base = composite_fairness_score(0.2, 0.2, 0.2)
        for bumped in (
            composite_fairness_score(0.3, 0.2, 0.2),
            composite_fairness_score(0.2, 0.3, 0.2),
            composite_fairness_score(0.2, 0.2, 0.3),
        ):
            assert bumped <= base


class TestReport:
    def test_build_and_export(self):
        n = 40
        rng = np.random.default_rng(3)
        selected = (rng.random(n) < 0.5).astype(int)
        qualified = np.ones(n, dtype=int)
        scores = rng.random(n)
        labels = {
            "gender": np.where(rng.random(n) < 0.5, "a", "b"),
            "region": np.where(rng.random(n) < 0.5, "n", "s"),
        }
        report = build_fairness_report(selected, qualified, scores, labels)
        assert set(report.per_category) == {"gender", "region"}
        assert 0.0 <= report.composite <= 1.0
        doc = report.to_dict()
        assert doc["composite"] == report.composite
        assert "individual_gap" not in doc

    def test_individual_gap_diagnostic(self):
        emb = {"c1": np.zeros(3), "c2": np.zeros(3), "c3": np.ones(3) * 10}
        scores = {("c1", "r1"): 0.9, ("c2", "r1"): 0.4, ("c3", "r1"): 0.0}
        # c1/c2 are identical so their 0.5 gap counts; c3 is far away.
        assert individual_score_gap(emb, scores, epsilon=0.1) == pytest.approx(0.5)
        assert individual_score_gap({"c1": np.zeros(2)}, {("c1", "r1"): 1.0}, 0.1) == 0.0
