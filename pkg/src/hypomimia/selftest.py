"""Built-in invariant checks runnable without a test harness.

Each check is a small, fast property probe; ``run_selftest`` prints one
line per check and returns False if any fails.  The pytest suite covers
the same ground far more thoroughly; this exists so a deployed install
can vouch for itself.
"""

from __future__ import annotations

import numpy as np

from .backbones import build_fr_backbone, build_resnet7, build_vgg8, freeze_layers
from .metrics import cohen_kappa, pca_project, roc_auc_eer
from .nn import Dense, Network
from .sequence import SequenceSpec, StageParams, ValenceCurve, assemble_sequence, detect_stages
from .svm import SvmHyperParams, dual_objective, kernel_matrix, train_svm
from .synthetic import split_folds
from .triplet import MetricTransform, generate_triplets, mahalanobis_distance, triplet_loss, TripletConfig


def _gradcheck_dense(seed: int) -> float:
    rng = np.random.default_rng(seed)
    net = Network([Dense(6, 4, rng)], (6,))
    x = rng.normal(size=(3, 6))
    w = rng.normal(size=(3, 4))
    _, tape = net.train_forward(x, rng)
    grads = tape.backward(w)
    worst = 0.0
    h = 1e-4
    for key, g in grads.items():
        p = net.parameters()[key]
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            lp = float((net.forward(x) * w).sum())
            p[i] = old - h
            lm = float((net.forward(x) * w).sum())
            p[i] = old
            num = (lp - lm) / (2 * h)
            denom = max(abs(g[i]) + abs(num), 1e-8)
            worst = max(worst, abs(g[i] - num) / denom)
    return worst


def _checks():
    yield "dense gradient vs finite differences", lambda: _gradcheck_dense(0) < 1e-4

    def conv_oracle():
        from .nn import Conv2d
        rng = np.random.default_rng(1)
        layer = Conv2d(1, 1, 3, rng)
        net = Network([layer], (5, 5, 1))
        x = rng.normal(size=(5, 5, 1))
        out = net.forward(x)
        w = layer.weight[:, :, 0, 0]
        ref = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                ref[i, j] = np.sum(x[i:i + 3, j:j + 3, 0] * w) + layer.bias[0]
        return np.abs(out[:, :, 0] - ref).max() < 1e-10

    yield "convolution vs quadruple-loop oracle", conv_oracle

    def param_counts():
        return (abs(build_vgg8().param_count() - 295_448) / 295_448 < 0.05
                and abs(build_resnet7().param_count() - 366_626) / 366_626 < 0.05)

    yield "architecture parameter totals", param_counts

    def freeze_all():
        net = build_fr_backbone(embed_dim=16, seed=0)
        freeze_layers(net, 1.0)
        return net.trainable_count() == 0

    yield "freeze 1.0 leaves nothing trainable", freeze_all

    def maha_equivalence():
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(20):
            T = rng.normal(size=(4, 4))
            tr = MetricTransform(T=T)
            x, y = rng.normal(size=4), rng.normal(size=4)
            d = mahalanobis_distance(x, y, tr)
            ref = float(np.sum((T @ (x - y)) ** 2))
            worst = max(worst, abs(d - ref))
        return worst < 1e-8

    yield "quadratic form equals transformed euclidean", maha_equivalence

    def hinge_cases():
        return (triplet_loss([1, 0], [1, 0], [1, 0], 0.3) == 0.3
                and triplet_loss([0.0], [1.0], [2.0], 0.2) == 0.0)

    yield "triplet hinge exactness", hinge_cases

    def triplet_constraints():
        labels = ["HC", "HC", "PD", "PD"]
        exprs = ["smile", "anger", "smile", "anger"]
        trips = generate_triplets(labels, exprs, TripletConfig(seed=3, triplets_per_epoch=64))
        return all(labels[t.anchor] == labels[t.positive]
                   and labels[t.anchor] != labels[t.negative]
                   and exprs[t.anchor] != exprs[t.positive] for t in trips)

    yield "triplet constraint satisfaction", triplet_constraints

    def svm_kkt():
        rng = np.random.default_rng(4)
        X = np.vstack([rng.normal(-1, 1, (15, 3)), rng.normal(1, 1, (15, 3))])
        y = np.array([-1] * 15 + [1] * 15)
        model = train_svm(X, y, SvmHyperParams("gaussian", 10.0, 0.1))
        if model.kkt > 1e-3:
            return False
        K = kernel_matrix(model.params, model.X_train, model.X_train)
        opt = dual_objective(K, model.y_train, model.alpha)
        for _ in range(2000):
            a = rng.uniform(0, model.params.C, len(y))
            p, n = a[y == 1].sum(), a[y == -1].sum()
            if p > n:
                a[y == 1] *= n / max(p, 1e-12)
            else:
                a[y == -1] *= p / max(n, 1e-12)
            if dual_objective(K, model.y_train, a) > opt + 1e-9:
                return False
        return True

    yield "svm kkt and dual near-optimality", svm_kkt

    def auc_equivalence():
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(4, 40))
            scores = rng.normal(size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                continue
            roc = roc_auc_eer(scores, labels)
            pos = scores[labels == 1][:, None]
            neg = scores[labels == 0][None, :]
            conc = (np.sum(pos > neg) + 0.5 * np.sum(pos == neg)) / pos.size / neg.shape[1]
            if abs(roc.auc - conc) > 1e-9:
                return False
        return True

    yield "trapezoid auc equals concordance", auc_equivalence

    def kappa_cases():
        if cohen_kappa(np.eye(3) * 10) != 1.0:
            return False
        return abs(cohen_kappa(np.array([[25, 25], [25, 25]]))) < 1e-12

    yield "kappa on diagonal and uninformative matrices", kappa_cases

    def stage_detection():
        v = np.array([0, 0, .5, 1, 1, 1, .5, 0, 0], dtype=float)
        curve = ValenceCurve(np.arange(len(v)), v)
        s = detect_stages(curve, StageParams())
        flipped = detect_stages(ValenceCurve(np.arange(len(v)), -v), StageParams())
        return s.as_tuple() == (1, 2, 3, 6, 7) and flipped.as_tuple() == s.as_tuple()

    yield "stage detection hand trace and sign flip", stage_detection

    def sequence_prefix():
        rng = np.random.default_rng(6)
        stages = {s: rng.normal(size=4) for s in
                  ("neutral_pre", "onset", "apex", "offset", "neutral_post")}
        full = assemble_sequence(stages, SequenceSpec("NOnAOffN"))
        head = assemble_sequence(stages, SequenceSpec("NOnA"))
        return np.array_equal(full[:12], head)

    yield "sequence prefix consistency", sequence_prefix

    def fold_partition():
        subs = [f"S{i}" for i in range(54)]
        labs = ["HC"] * 24 + ["PD"] * 30
        fa = split_folds(subs, labs, 5, seed=7)
        sizes = sorted(fa.sizes())
        return sizes == [10, 11, 11, 11, 11] and len(fa.folds) == 54

    yield "stratified fold partition", fold_partition

    def pca_planar():
        rng = np.random.default_rng(8)
        X2 = rng.normal(size=(30, 2))
        X = np.column_stack([X2, np.zeros(30)])
        res = pca_project(X, dims=2)
        return abs(res.explained.sum() - 1.0) < 1e-9

    yield "pca explains planar data fully", pca_planar


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, check in _checks():
        try:
            passed = bool(check())
        except Exception as exc:  # noqa: BLE001 - report, then fail the suite
            passed = False
            if verbose:
                print(f"[error] {name}: {exc}")
        ok &= passed
        if verbose:
            print(f"[{'ok' if passed else 'FAIL'}] {name}")
    return ok
