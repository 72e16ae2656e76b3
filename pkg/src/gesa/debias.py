"""Adversarial debiasing of entity representations, plus fairness metrics.

A small encoder maps input embeddings to representations z. Three heads pull
on z during training:

- an allocation head scoring pairs by sigmoid(z_i . z_j) against match
  labels (binary cross-entropy),
- an adversary predicting each sensitive category from z (softmax
  cross-entropy per category, summed), wired through a gradient-reversal
  scale so the encoder is pushed to *remove* what the adversary needs,
- a decoder reconstructing the input embedding (mean squared error), which
  keeps non-demographic information alive.

One optimizer, full batch, seeded. The adversary's own parameters descend
its plain cross-entropy; only the gradient flowing back into the encoder is
reversed and scaled by lambda. All gradients are written out explicitly so
finite differences can audit every head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


def reverse_scale(x: np.ndarray) -> np.ndarray:
    """Forward pass of the reversal layer: identity."""
    return x


def reverse_scale_backward(grad: np.ndarray, lam: float) -> np.ndarray:
    """Backward pass: negate and scale by lambda."""
    return -lam * grad


class NonFiniteLoss(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class DebiasConfig:
    lam: float = 0.5
    beta: float = 0.1
    encoder_hidden: int = 48
    repr_dim: int = 24
    adversary_hidden: int = 16
    decoder_hidden: int = 48
    epochs: int = 150
    learning_rate: float = 0.05
    # Relative step size for the adversary. The encoder moves its targets
    # every epoch; letting the adversary track faster keeps the reversed
    # gradient pointed at information that is actually still present.
    adversary_lr_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lambda and beta must be non-negative")
        for name in ("encoder_hidden", "repr_dim", "adversary_hidden", "decoder_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 1 or self.learning_rate <= 0:
            raise ValueError("epochs and learning_rate must be positive")
        if self.adversary_lr_scale <= 0:
            raise ValueError("adversary_lr_scale must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    allocation: float
    adversarial: float
    reconstruction: float


def _tanh_layer(X, W, b):
    return np.tanh(X @ W.T + b)


class DebiasedEncoder:
    """Encoder with paired adversary and decoder heads; immutable after
    training apart from explicit parameter access for tests."""

    def __init__(self, input_dim: int, config: DebiasConfig,
                 categories: Sequence[tuple[str, tuple[str, ...]]], seed: int):
        rng = np.random.default_rng(seed)
        d, he, r = input_dim, config.encoder_hidden, config.repr_dim
        ha, hd = config.adversary_hidden, config.decoder_hidden

        def mat(rows, cols):
            return rng.normal(0.0, 1.0 / math.sqrt(cols), (rows, cols))

        self.input_dim = d
        self.repr_dim = r
        self.categories = tuple((name, tuple(labels)) for name, labels in categories)
        self.W1, self.b1 = mat(he, d), np.zeros(he)
        self.W2, self.b2 = mat(r, he), np.zeros(r)
        self.A1, self.c1 = mat(ha, r), np.zeros(ha)
        self.heads = {
            name: (mat(len(labels), ha), np.zeros(len(labels)))
            for name, labels in self.categories
        }
        self.D1, self.e1 = mat(hd, r), np.zeros(hd)
        self.D2, self.e2 = mat(d, hd), np.zeros(d)

    def encode(self, x: np.ndarray) -> np.ndarray:
        single = x.ndim == 1
        X = x[None, :] if single else x
        Z = _tanh_layer(X, self.W1, self.b1) @ self.W2.T + self.b2
        return Z[0] if single else Z

    def encoder_params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def adversary_params(self) -> dict[str, np.ndarray]:
        out = {"A1": self.A1, "c1": self.c1}
        for name, (Ak, bk) in self.heads.items():
            out[f"head_{name}_W"] = Ak
            out[f"head_{name}_b"] = bk
        return out

    def decoder_params(self) -> dict[str, np.ndarray]:
        return {"D1": self.D1, "e1": self.e1, "D2": self.D2, "e2": self.e2}


def _encoder_forward(model, X):
    H = _tanh_layer(X, model.W1, model.b1)
    Z = H @ model.W2.T + model.b2
    return H, Z


def _backprop_encoder(model, X, H, dZ):
    grads = {
        "W2": dZ.T @ H,
        "b2": dZ.sum(axis=0),
    }
    dH = dZ @ model.W2
    dpre = dH * (1.0 - H * H)
    grads["W1"] = dpre.T @ X
    grads["b1"] = dpre.sum(axis=0)
    return grads


def allocation_loss(model: DebiasedEncoder, X: np.ndarray, pairs):
    """BCE over sigmoid(z_i . z_j); returns (loss, encoder grads)."""
    if not pairs:
        raise ValueError("no pairs")
    H, Z = _encoder_forward(model, X)
    us = np.array([p[0] for p in pairs])
    vs = np.array([p[1] for p in pairs])
    ys = np.array([float(p[2]) for p in pairs])
    s = np.einsum("ij,ij->i", Z[us], Z[vs])
    loss = float(np.mean(ys * np.logaddexp(0.0, -s) + (1 - ys) * np.logaddexp(0.0, s)))

    coeff = (1.0 / (1.0 + np.exp(-s)) - ys) / len(pairs)
    dZ = np.zeros_like(Z)
    np.add.at(dZ, us, coeff[:, None] * Z[vs])
    np.add.at(dZ, vs, coeff[:, None] * Z[us])
    return loss, _backprop_encoder(model, X, H, dZ)


def adversary_loss(model: DebiasedEncoder, X: np.ndarray,
                   rows: np.ndarray, label_idx: Mapping[str, np.ndarray]):
    """Summed per-category softmax cross-entropy on the labeled rows.

    Returns (loss, adversary grads, raw encoder grads). The encoder grads are
    unreversed; training applies reverse_scale_backward to them.
    """
    H, Z = _encoder_forward(model, X)
    Zc = Z[rows]
    n = len(rows)
    Ha = _tanh_layer(Zc, model.A1, model.c1)

    loss = 0.0
    adv_grads = {"A1": np.zeros_like(model.A1), "c1": np.zeros_like(model.c1)}
    dHa = np.zeros_like(Ha)
    for name, (Ak, bk) in model.heads.items():
        logits = Ha @ Ak.T + bk
        logits -= logits.max(axis=1, keepdims=True)
        ex = np.exp(logits)
        probs = ex / ex.sum(axis=1, keepdims=True)
        idx = label_idx[name]
        loss += float(-np.mean(np.log(probs[np.arange(n), idx] + 1e-300)))
        dlogits = probs.copy()
        dlogits[np.arange(n), idx] -= 1.0
        dlogits /= n
        adv_grads[f"head_{name}_W"] = dlogits.T @ Ha
        adv_grads[f"head_{name}_b"] = dlogits.sum(axis=0)
        dHa += dlogits @ Ak

    dpreHa = dHa * (1.0 - Ha * Ha)
    adv_grads["A1"] = dpreHa.T @ Zc
    adv_grads["c1"] = dpreHa.sum(axis=0)

    dZ = np.zeros_like(Z)
    dZ[rows] = dpreHa @ model.A1
    enc_grads = _backprop_encoder(model, X, H, dZ)
    return loss, adv_grads, enc_grads


def reconstruction_loss(model: DebiasedEncoder, X: np.ndarray):
    """MSE of decoding z back to the input; returns (loss, decoder grads,
    encoder grads)."""
    H, Z = _encoder_forward(model, X)
    Hd = _tanh_layer(Z, model.D1, model.e1)
    Xhat = Hd @ model.D2.T + model.e2
    diff = Xhat - X
    loss = float(np.mean(diff * diff))

    dXhat = 2.0 * diff / diff.size
    dec_grads = {
        "D2": dXhat.T @ Hd,
        "e2": dXhat.sum(axis=0),
    }
    dHd = dXhat @ model.D2
    dpreHd = dHd * (1.0 - Hd * Hd)
    dec_grads["D1"] = dpreHd.T @ Z
    dec_grads["e1"] = dpreHd.sum(axis=0)

    dZ = dpreHd @ model.D1
    enc_grads = _backprop_encoder(model, X, H, dZ)
    return loss, dec_grads, enc_grads


def train_adversarial(
    embeddings: Mapping[str, np.ndarray],
    pairs: Sequence[tuple[str, str, int]],
    sensitive: Mapping[str, Mapping[str, str]],
    config: DebiasConfig = DebiasConfig(),
) -> tuple[DebiasedEncoder, list[LossBreakdown]]:
    """Train the encoder against all three heads; deterministic per seed."""
    if not pairs:
        raise ValueError("no training pairs")
    ys = {p[2] for p in pairs}
    if ys != {0, 1}:
        raise ValueError(f"match labels must contain both classes, got {sorted(ys)}")
    ids = sorted(embeddings)
    index = {v: i for i, v in enumerate(ids)}
    for i, j, _ in pairs:
        if i not in index or j not in index:
            raise ValueError(f"pair ({i!r}, {j!r}) references a missing embedding")
    for cid in sensitive:
        if cid not in index:
            raise ValueError(f"sensitive labels for unknown id {cid!r}")

    X = np.stack([np.asarray(embeddings[i], dtype=float) for i in ids])
    idx_pairs = [(index[i], index[j], y) for i, j, y in pairs]

    cand_ids = sorted(sensitive)
    if not cand_ids:
        raise ValueError("no sensitive labels given")
    cat_names = sorted({c for labels in sensitive.values() for c in labels})
    categories = []
    label_idx: dict[str, np.ndarray] = {}
    for name in cat_names:
        labels = sorted({sensitive[cid].get(name) for cid in cand_ids} - {None})
        if any(name not in sensitive[cid] for cid in cand_ids):
            raise ValueError(f"category {name!r} missing for some candidates")
        categories.append((name, tuple(labels)))
        lut = {l: k for k, l in enumerate(labels)}
        label_idx[name] = np.array([lut[sensitive[cid][name]] for cid in cand_ids])
    rows = np.array([index[cid] for cid in cand_ids])

    model = DebiasedEncoder(X.shape[1], config, categories, seed=config.seed)
    lr, lam, beta = config.learning_rate, config.lam, config.beta

    history: list[LossBreakdown] = []
    for epoch in range(config.epochs):
        l_alloc, g_alloc = allocation_loss(model, X, idx_pairs)
        l_adv, g_adv, g_adv_enc = adversary_loss(model, X, rows, label_idx)
        l_rec, g_dec, g_rec_enc = reconstruction_loss(model, X)
        total = l_alloc - lam * l_adv + beta * l_rec
        if not math.isfinite(total):
            raise NonFiniteLoss(epoch, total)
        history.append(LossBreakdown(total, l_alloc, l_adv, l_rec))

        enc = model.encoder_params()
        for k in enc:
            step = g_alloc[k] + beta * g_rec_enc[k] + reverse_scale_backward(g_adv_enc[k], lam)
            enc[k] -= lr * step
        adv = model.adversary_params()
        for k in adv:
            adv[k] -= lr * config.adversary_lr_scale * g_adv[k]
        dec = model.decoder_params()
        for k in dec:
            dec[k] -= lr * beta * g_dec[k]
    return model, history


def leakage_probe(
    representations: Mapping[str, np.ndarray],
    labels: Mapping[str, str],
    seed: int = 0,
    hidden: int = 16,
    epochs: int = 300,
    learning_rate: float = 0.1,
) -> float:
    """Held-out accuracy of a fresh classifier predicting labels from z.

    80/20 seeded split; single hidden layer, softmax output, full-batch GD.
    Features are standardized with training-split statistics so the probe
    reads representations of any scale; that makes it a stronger attacker,
    which is the honest direction for a leakage measurement. High accuracy
    means the representation still leaks the attribute.
    """
    ids = sorted(labels)
    if any(i not in representations for i in ids):
        raise ValueError("every labeled id needs a representation")
    classes = sorted(set(labels.values()))
    if len(classes) < 2:
        raise ValueError("need at least two distinct classes to probe")
    lut = {c: k for k, c in enumerate(classes)}
    X = np.stack([np.asarray(representations[i], dtype=float) for i in ids])
    y = np.array([lut[labels[i]] for i in ids])

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    cut = max(1, int(round(0.8 * len(ids))))
    if cut >= len(ids):
        cut = len(ids) - 1
    tr, te = order[:cut], order[cut:]
    mu = X[tr].mean(axis=0)
    sd = X[tr].std(axis=0) + 1e-9
    X = (X - mu) / sd

    d, k = X.shape[1], len(classes)
    W1 = rng.normal(0, 1 / math.sqrt(d), (hidden, d))
    b1 = np.zeros(hidden)
    W2 = rng.normal(0, 1 / math.sqrt(hidden), (k, hidden))
    b2 = np.zeros(k)
    Xtr, ytr = X[tr], y[tr]
    n = len(tr)
    for _ in range(epochs):
        H = np.tanh(Xtr @ W1.T + b1)
        logits = H @ W2.T + b2
        logits -= logits.max(axis=1, keepdims=True)
        ex = np.exp(logits)
        probs = ex / ex.sum(axis=1, keepdims=True)
        dlog = probs.copy()
        dlog[np.arange(n), ytr] -= 1.0
        dlog /= n
        gW2 = dlog.T @ H
        gb2 = dlog.sum(axis=0)
        dH = dlog @ W2
        dpre = dH * (1 - H * H)
        gW1 = dpre.T @ Xtr
        gb1 = dpre.sum(axis=0)
        W1 -= learning_rate * gW1
        b1 -= learning_rate * gb1
        W2 -= learning_rate * gW2
        b2 -= learning_rate * gb2

    Hte = np.tanh(X[te] @ W1.T + b1)
    pred = (Hte @ W2.T + b2).argmax(axis=1)
    return float(np.mean(pred == y[te]))


def _group_arrays(groups):
    groups = np.asarray(groups)
    uniq = sorted(set(groups.tolist()))
    if len(uniq) < 2:
        raise ValueError("need at least two groups")
    return groups, uniq


def demographic_parity_difference(selected, groups) -> float:
    """Max pairwise gap in selection rate across groups."""
    selected = np.asarray(selected, dtype=float)
    groups, uniq = _group_arrays(groups)
    rates = []
    for g in uniq:
        mask = groups == g
        if not mask.any():
            raise ValueError(f"group {g!r} is empty")
        rates.append(float(selected[mask].mean()))
    return max(rates) - min(rates)


def equalized_opportunity_difference(selected, qualified, groups) -> float:
    """Max pairwise gap in TPR (selected among qualified) across groups."""
    selected = np.asarray(selected, dtype=float)
    qualified = np.asarray(qualified, dtype=bool)
    groups, uniq = _group_arrays(groups)
    tprs = []
    for g in uniq:
        mask = (groups == g) & qualified
        if not mask.any():
            raise ValueError(f"group {g!r} has no qualified members")
        tprs.append(float(selected[mask].mean()))
    return max(tprs) - min(tprs)


def expected_calibration_error(scores, outcomes, bins: int = 10) -> float:
    """Standard ECE over equal-width bins; empty bins are skipped."""
    scores = np.asarray(scores, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if scores.size == 0:
        raise ValueError("empty score set")
    if scores.min() < 0 or scores.max() > 1:
        raise ValueError("scores must lie in [0, 1]")
    which = np.minimum((scores * bins).astype(int), bins - 1)
    ece = 0.0
    for b in range(bins):
        mask = which == b
        if not mask.any():
            continue
        conf = scores[mask].mean()
        acc = outcomes[mask].mean()
        ece += (mask.sum() / scores.size) * abs(conf - acc)
    return float(ece)


def calibration_error(scores, outcomes, groups, bins: int = 10) -> float:
    """Max pairwise gap between per-group expected calibration errors."""
    scores = np.asarray(scores, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    groups, uniq = _group_arrays(groups)
    eces = []
    for g in uniq:
        mask = groups == g
        if not mask.any():
            raise ValueError(f"group {g!r} is empty")
        eces.append(expected_calibration_error(scores[mask], outcomes[mask], bins))
    return max(eces) - min(eces)


def composite_fairness_score(dp: float, eo: float, cal: float) -> float:
    """Complement of the mean disparity, clamped to [0, 1]."""
    return float(min(1.0, max(0.0, 1.0 - (dp + eo + cal) / 3.0)))


def individual_score_gap(
    embeddings: Mapping[str, np.ndarray],
    scores: Mapping[tuple[str, str], float],
    epsilon: float,
) -> float:
    """Diagnostic only: max score gap between near-identical candidates.

    Scans pairs of candidates whose embeddings sit within epsilon of each
    other and reports the largest |score(c1, r) - score(c2, r)| over roles
    both were scored for. 0.0 when no close pairs exist.
    """
    by_candidate: dict[str, dict[str, float]] = {}
    for (cid, rid), s in scores.items():
        by_candidate.setdefault(cid, {})[rid] = s
    cids = sorted(by_candidate)
    worst = 0.0
    for i, c1 in enumerate(cids):
        for c2 in cids[i + 1:]:
            if c1 not in embeddings or c2 not in embeddings:
                continue
            if np.linalg.norm(embeddings[c1] - embeddings[c2]) >= epsilon:
                continue
            shared = by_candidate[c1].keys() & by_candidate[c2].keys()
            for rid in shared:
                worst = max(worst, abs(by_candidate[c1][rid] - by_candidate[c2][rid]))
    return worst


@dataclass(frozen=True)
class FairnessReport:
    """Per-category disparities plus the composite score.

    Components are averaged across categories before entering the
    composite, so one noisy small category cannot dominate the headline
    number; per-category values stay available for drill-down.
    """

    per_category: Mapping[str, Mapping[str, float]]
    demographic_parity: float
    equalized_opportunity: float
    calibration: float
    composite: float
    individual_gap: float | None = None

    def to_dict(self) -> dict:
        doc = {
            "per_category": {k: dict(v) for k, v in sorted(self.per_category.items())},
            "demographic_parity": self.demographic_parity,
            "equalized_opportunity": self.equalized_opportunity,
            "calibration": self.calibration,
            "composite": self.composite,
        }
        if self.individual_gap is not None:
            doc["individual_gap"] = self.individual_gap
        return doc


def build_fairness_report(
    selected,
    qualified,
    scores,
    category_labels: Mapping[str, Sequence[str]],
    bins: int = 10,
    individual_gap: float | None = None,
) -> FairnessReport:
    """Compute all three disparities for every category and the composite."""
    per_category = {}
    dps, eos, cals = [], [], []
    for cat, labels in sorted(category_labels.items()):
        dp = demographic_parity_difference(selected, labels)
        eo = equalized_opportunity_difference(selected, qualified, labels)
        cal = calibration_error(scores, qualified, labels, bins)
        per_category[cat] = {
            "demographic_parity": dp,
            "equalized_opportunity": eo,
            "calibration": cal,
        }
        dps.append(dp)
        eos.append(eo)
        cals.append(cal)
    dp_m, eo_m, cal_m = (float(np.mean(v)) for v in (dps, eos, cals))
    return FairnessReport(
        per_category=per_category,
        demographic_parity=dp_m,
        equalized_opportunity=eo_m,
        calibration=cal_m,
        composite=composite_fairness_score(dp_m, eo_m, cal_m),
        individual_gap=individual_gap,
    )
