"""Evaluation arithmetic: binary metrics, ROC/AUC/EER, kappa, PCA.

All functions are pure.  Rates are reported as percentages except AUC,
which stays in [0, 1].  Metrics that are undefined for a given input
(e.g. sensitivity with no positives) come back as ``None`` rather than a
silent zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingleClassError(ValueError):
    """Score-based metrics need at least one sample of each class."""


class RankError(ValueError):
    """Data rank is too low for the requested projection."""


@dataclass
class BinaryReport:
    acc: float
    sens: float | None
    spec: float | None
    f1: float | None
    auc: float | None = None
    eer: float | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("acc", "sens", "spec", "f1", "auc", "eer")}


@dataclass
class ConfusionMatrix:
    """Row = true class, column = predicted class."""

    counts: np.ndarray
    labels: tuple

    @classmethod
    def from_predictions(cls, y_true, y_pred, labels=None) -> "ConfusionMatrix":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        if labels is None:
            labels = tuple(sorted(set(y_true.tolist()) | set(y_pred.tolist())))
        index = {lab: i for i, lab in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[index[t], index[p]] += 1
        return cls(counts, tuple(labels))

    def normalized(self) -> np.ndarray:
        """Row-normalized percentage view; empty rows stay all-zero."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(sums > 0, 100.0 * self.counts / sums, 0.0)
        return out


def binary_metrics(y_true, y_pred) -> BinaryReport:
    """Accuracy / sensitivity / specificity / F1 in percent, positive = 1."""
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred lengths differ")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    n = tp + tn + fp + fn
    acc = 100.0 * (tp + tn) / n
    sens = 100.0 * tp / (tp + fn) if tp + fn else None
    spec = 100.0 * tn / (tn + fp) if tn + fp else None
    if tp + fp == 0 or sens is None:
        f1 = None
    else:
        prec = tp / (tp + fp)
        rec = tp / (tp + fn)
        f1 = 100.0 * 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return BinaryReport(acc=acc, sens=sens, spec=spec, f1=f1)


@dataclass
class RocResult:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    eer: float  # percent

    @property
    def points(self):
        return np.column_stack([self.fpr, self.tpr])


def roc_auc_eer(scores, y_true) -> RocResult:
    """ROC by threshold sweep over the unique scores.

    AUC is the trapezoid integral (equal to pairwise concordance with ties
    counted half).  EER interpolates linearly between the two ROC points
    bracketing FPR == FNR and is returned in percent.
    """
    scores = np.asarray(scores, dtype=float)
    y_true = np.asarray(y_true).astype(int)
    n_pos = int((y_true == 1).sum())
    n_neg = int((y_true == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC needs both classes present")
    thresholds = np.unique(scores)[::-1]
    fpr = [0.0]
    tpr = [0.0]
    ths = [np.inf]
    for thr in thresholds:
        pred = scores >= thr
        tpr.append(float(np.sum(pred & (y_true == 1))) / n_pos)
        fpr.append(float(np.sum(pred & (y_true == 0))) / n_neg)
        ths.append(float(thr))
    fpr = np.array(fpr)
    tpr = np.array(tpr)
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    eer = _interpolate_eer(fpr, tpr)
    return RocResult(np.array(ths), fpr, tpr, auc, eer)


def _interpolate_eer(fpr: np.ndarray, tpr: np.ndarray) -> float:
    fnr = 1.0 - tpr
    diff = fpr - fnr
    for i in range(len(diff) - 1):
        if diff[i] <= 0.0 <= diff[i + 1]:
            dfpr = fpr[i + 1] - fpr[i]
            dtpr = tpr[i + 1] - tpr[i]
            denom = dfpr + dtpr
            if denom == 0.0:
                return 100.0 * fpr[i]
            t = (1.0 - tpr[i] - fpr[i]) / denom
            return 100.0 * (fpr[i] + t * dfpr)
    # No crossing: the curve stays on one side; return the closest point.
    i = int(np.argmin(np.abs(diff)))
    return 100.0 * (fpr[i] + fnr[i]) / 2.0


def cohen_kappa(confusion) -> float | None:
    """Chance-corrected agreement from a (possibly weighted) confusion matrix.

    Returns None when expected agreement is 1 (degenerate marginals).
    """
    m = confusion.counts if isinstance(confusion, ConfusionMatrix) else np.asarray(confusion, dtype=float)
    total = m.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    po = np.trace(m) / total
    pe = float((m.sum(axis=1) * m.sum(axis=0)).sum()) / (total * total)
    if pe >= 1.0 - 1e-15:
        return None
    return float((po - pe) / (1.0 - pe))


def macro_f1(confusion: ConfusionMatrix) -> float:
    """Macro-averaged F1 in percent; classes with no support or no
    predictions contribute 0."""
    m = confusion.counts
    f1s = []
    for i in range(m.shape[0]):
        tp = m[i, i]
        fp = m[:, i].sum() - tp
        fn = m[i, :].sum() - tp
        denom = 2 * tp + fp + fn
        f1s.append(200.0 * tp / denom if denom else 0.0)
    return float(np.mean(f1s))


@dataclass
class PcaResult:
    points: np.ndarray            # (n, dims)
    axes: np.ndarray              # (dims, d) orthonormal rows
    mean: np.ndarray
    eigenvalues: np.ndarray       # all d, descending
    explained: np.ndarray         # fraction per kept component

    @property
    def explained_pct(self):
        return 100.0 * self.explained


def pca_project(X, dims: int = 2) -> PcaResult:
    """Mean-centered projection onto the top principal axes.

    Uses the covariance eigen-decomposition.  Component signs are fixed so
    the largest-magnitude loading of each axis is positive.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < dims + 1:
        raise ValueError(f"need at least {dims + 1} samples, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    tol = max(eigvals[0], 1.0) * 1e-12
    rank = int((eigvals > tol).sum())
    if rank < dims:
        raise RankError(f"effective rank {rank} < requested dims {dims}")
    axes = eigvecs[:, :dims].T
    for i in range(dims):
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    points = Xc @ axes.T
    total = eigvals.sum()
    explained = eigvals[:dims] / total if total > 0 else np.zeros(dims)
    return PcaResult(points, axes, mean, eigvals, explained)


# -- artifact emission --------------------------------------------------------

def write_roc_csv(path, roc: RocResult) -> None:
    with open(path, "w") as fh:
        fh.write("threshold,fpr,tpr\n")
        for thr, f, t in zip(roc.thresholds, roc.fpr, roc.tpr):
            fh.write(f"{thr!r},{f!r},{t!r}\n")


def write_pca_csv(path, points: np.ndarray, labels) -> None:
    with open(path, "w") as fh:
        fh.write("pc1,pc2,label\n")
        for (p1, p2), lab in zip(points, labels):
            fh.write(f"{p1!r},{p2!r},{lab}\n")


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_roc_svg(path, curves: dict[str, RocResult], size: int = 420) -> None:
    """Standalone SVG: FPR on x, TPR on y, one polyline per model."""
    pad = 50
    span = size - 2 * pad

    def sx(v):
        return pad + v * span

    def sy(v):
        return size - pad - v * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(0)}" stroke="black"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(0)}" y2="{sy(1)}" stroke="black"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" '
        f'stroke="#bbbbbb" stroke-dasharray="4 4"/>',
        f'<text x="{size / 2:.0f}" y="{size - 12}" text-anchor="middle" '
        f'font-size="13">False positive rate</text>',
        f'<text x="14" y="{size / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {size / 2:.0f})">True positive rate</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{sy(0) + 16:.1f}" text-anchor="middle" '
            f'font-size="10">{tick:g}</text>'
        )
        parts.append(
            f'<text x="{sx(0) - 8:.1f}" y="{sy(tick) + 3:.1f}" text-anchor="end" '
            f'font-size="10">{tick:g}</text>'
        )
    for k, (name, roc) in enumerate(sorted(curves.items())):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(f):.2f},{sy(t):.2f}" for f, t in zip(roc.fpr, roc.tpr))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        parts.append(
            f'<text x="{sx(0.52):.1f}" y="{sy(0.05) - 14 * k:.1f}" font-size="11" '
            f'fill="{color}">{name} (AUC {roc.auc:.3f})</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
