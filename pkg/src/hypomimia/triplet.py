"""Affective triplet loss: distance metric, triplet generation, training.

The distance is a Mahalanobis quadratic form d2(x, y) = (x-y)^T M (x-y)
with M positive semi-definite, equivalently the squared Euclidean distance
after the linear map T with M = T^T T; the deep variant replaces T by a
network embedding.  Triplets (anchor, positive, negative) pair same-class
samples showing *different expressions* against a different-class sample,
and the hinge loss max(d2(a,p) - d2(a,n) + alpha, 0) pulls classes apart
by at least the margin.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .nn import Network, NonFiniteError
from .nn.optim import make_optimizer


class TripletConstraintError(ValueError):
    """The expression constraint cannot be satisfied on this dataset."""


class TransformError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


class MetricTransform:
    """Either an explicit PSD matrix M = T^T T or a network embedding."""

    def __init__(self, M: np.ndarray | None = None, T: np.ndarray | None = None,
                 network: Network | None = None):
        given = sum(x is not None for x in (M, T, network))
        if given != 1:
            raise TransformError("provide exactly one of M, T or network")
        self.network = network
        self.T = None
        self.M = None
        if T is not None:
            self.T = np.asarray(T, dtype=float)
            self.M = self.T.T @ self.T
        elif M is not None:
            M = np.asarray(M, dtype=float)
            if M.shape[0] != M.shape[1]:
                raise TransformError("M must be square")
            if np.abs(M - M.T).max() > 1e-10:
                raise TransformError("M must be symmetric within 1e-10")
            eigvals, eigvecs = np.linalg.eigh(M)
            if eigvals.min() < -1e-10:
                raise TransformError(
                    f"M must be positive semi-definite (min eigenvalue "
                    f"{eigvals.min():.3e})"
                )
            self.M = M
            self.T = np.sqrt(np.clip(eigvals, 0.0, None))[:, None] * eigvecs.T

    @property
    def dim(self) -> int | None:
        return None if self.M is None else self.M.shape[0]

    def embed(self, x: np.ndarray) -> np.ndarray:
        if self.network is not None:
            return self.network.extract_features(x)
        return np.asarray(x, dtype=float) @ self.T.T


def mahalanobis_distance(x, y, transform: MetricTransform | None = None) -> float:
    """Squared distance (x-y)^T M (x-y); plain squared Euclidean when no
    transform is given.  For a network transform, the squared Euclidean
    distance between the two embeddings."""
    if transform is not None and transform.network is not None:
        ex = transform.network.extract_features(np.asarray(x, dtype=float))
        ey = transform.network.extract_features(np.asarray(y, dtype=float))
        d = ex - ey
        return float(d @ d)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise TransformError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x - y
    if transform is None:
        return float(d @ d)
    if transform.dim != d.shape[0]:
        raise TransformError(
            f"transform dimension {transform.dim} != vectors {d.shape[0]}"
        )
    return float(d @ transform.M @ d)


def triplet_loss(emb_a, emb_p, emb_n, alpha: float) -> float:
    """Hinge loss max(d2(a,p) - d2(a,n) + alpha, 0) on given embeddings."""
    if alpha < 0:
        raise ValueError("margin alpha must be non-negative")
    a = np.asarray(emb_a, dtype=float).ravel()
    p = np.asarray(emb_p, dtype=float).ravel()
    n = np.asarray(emb_n, dtype=float).ravel()
    if not (a.shape == p.shape == n.shape):
        raise ValueError("embeddings must share one dimension")
    d_ap = float((a - p) @ (a - p))
    d_an = float((a - n) @ (a - n))
    return max(d_ap - d_an + alpha, 0.0)


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int


@dataclass(frozen=True)
class TripletConfig:
    alpha: float = 0.2
    triplets_per_epoch: int | None = None   # default 4x dataset size
    mining: str = "random"                  # "random" | "semi-hard"
    seed: int = 0
    epochs: int = 5
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    l2_normalize: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("margin alpha must be non-negative")
        if self.mining not in ("random", "semi-hard"):
            raise ValueError(f"unknown mining strategy {self.mining!r}")


def _index_pools(labels, expressions):
    labels = list(labels)
    expressions = list(expressions)
    classes = sorted(set(labels), key=str)
    if len(classes) < 2:
        raise TripletConstraintError("need at least two classes")
    offenders = []
    for c in classes:
        exprs = {e for l, e in zip(labels, expressions) if l == c}
        if len(exprs) < 2:
            offenders.append(c)
    if offenders:
        raise TripletConstraintError(
            "classes with fewer than two distinct expressions cannot anchor "
            f"triplets: {offenders}"
        )
    pos_pool = {}
    neg_pool = {}
    for i, (l, e) in enumerate(zip(labels, expressions)):
        pos_pool.setdefault(l, {}).setdefault(e, [])
    for i, (l, e) in enumerate(zip(labels, expressions)):
        for expr, pool in pos_pool[l].items():
            if expr != e:
                pool.append(i)
    for c in classes:
        neg_pool[c] = [i for i, l in enumerate(labels) if l != c]
    return pos_pool, neg_pool


def generate_triplets(labels, expressions, config: TripletConfig,
                      embeddings: np.ndarray | None = None) -> list[Triplet]:
    """Sample triplets honoring y(a)=y(p), y(a)!=y(n), e(a)!=e(p).

    Random mining draws uniformly; semi-hard mining additionally requires
    d2(a,p) < d2(a,n) < d2(a,p) + alpha on the provided embeddings, falling
    back to a random negative when no semi-hard one exists.
    """
    labels = list(labels)
    expressions = list(expressions)
    if len(labels) != len(expressions):
        raise ValueError("labels and expressions lengths differ")
    pos_pool, neg_pool = _index_pools(labels, expressions)
    if config.mining == "semi-hard" and embeddings is None:
        raise ValueError("semi-hard mining needs embeddings")
    count = config.triplets_per_epoch or 4 * len(labels)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    out = []
    n = len(labels)
    while len(out) < count:
        a = int(rng.integers(n))
        ppool = pos_pool[labels[a]][expressions[a]]
        if not ppool:
            continue
        p = int(ppool[rng.integers(len(ppool))])
        npool = neg_pool[labels[a]]
        if config.mining == "semi-hard":
            ea = embeddings[a]
            d_ap = float(np.sum((ea - embeddings[p]) ** 2))
            d_an = np.sum((ea - embeddings[npool]) ** 2, axis=1)
            ok = np.nonzero((d_an > d_ap) & (d_an < d_ap + config.alpha))[0]
            if len(ok):
                neg = int(npool[ok[rng.integers(len(ok))]])
            else:
                neg = int(npool[rng.integers(len(npool))])
        else:
            neg = int(npool[rng.integers(len(npool))])
        out.append(Triplet(a, p, neg))
    return out


def triplet_set_loss(embeddings: np.ndarray, triplets: list[Triplet],
                     alpha: float) -> float:
    """Summed hinge loss of a triplet set on fixed embeddings."""
    a = embeddings[[t.anchor for t in triplets]]
    p = embeddings[[t.positive for t in triplets]]
    n = embeddings[[t.negative for t in triplets]]
    d_ap = np.sum((a - p) ** 2, axis=1)
    d_an = np.sum((a - n) ** 2, axis=1)
    return float(np.clip(d_ap - d_an + alpha, 0.0, None).sum())


def class_distance_ratio(embeddings: np.ndarray, labels) -> float:
    """Mean inter-class over mean intra-class squared distance."""
    labels = np.asarray(labels)
    sq = (
        np.sum(embeddings ** 2, axis=1)[:, None]
        + np.sum(embeddings ** 2, axis=1)[None, :]
        - 2.0 * embeddings @ embeddings.T
    )
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(len(labels), dtype=bool)
    intra = sq[same & off_diag]
    inter = sq[~same]
    if len(intra) == 0 or len(inter) == 0:
        raise ValueError("need both intra- and inter-class pairs")
    return float(inter.mean() / max(intra.mean(), 1e-300))


@dataclass
class TripletTrainResult:
    epoch_losses: list[float]              # mean batch hinge loss per epoch
    heldout_loss_before: float             # summed loss, fixed triplet set
    heldout_loss_after: float
    ratio_before: float
    ratio_after: float


def train_triplet(network: Network, images: np.ndarray, labels, expressions,
                  config: TripletConfig) -> TripletTrainResult:
    """Fine-tune a network embedding with the triplet hinge loss.

    The network is trained in place through its full layer stack (detach
    any task head first).  A fixed held-out triplet set measures the summed
    loss before and after; a non-finite batch loss restores the last
    epoch's parameters and raises TrainingError.
    """
    labels = list(labels)
    expressions = list(expressions)
    images = np.asarray(images, dtype=float)
    if len(images) != len(labels):
        raise ValueError("images and labels lengths differ")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    opt = make_optimizer(config.optimizer, config.lr)

    heldout = generate_triplets(
        labels, expressions,
        replace(config, seed=config.seed + 0x5EED, mining="random"))
    emb0 = network.extract_features(images)
    before = triplet_set_loss(emb0, heldout, config.alpha)
    ratio_before = class_distance_ratio(emb0, labels)

    losses = []
    checkpoint = {k: v.copy() for k, v in network.parameters().items()}
    for epoch in range(config.epochs):
        if config.mining == "semi-hard":
            current = network.extract_features(images)
            triplets = generate_triplets(labels, expressions,
                                         _with_seed(config, config.seed + epoch),
                                         embeddings=current)
        else:
            triplets = generate_triplets(labels, expressions,
                                         _with_seed(config, config.seed + epoch))
        batch_losses = []
        for start in range(0, len(triplets), config.batch_size):
            batch = triplets[start:start + config.batch_size]
            loss = _triplet_step(network, images, batch, config, opt, rng)
            if not np.isfinite(loss):
                for key, value in checkpoint.items():
                    network.set_param(key, value)
                raise TrainingError(
                    f"triplet loss diverged in epoch {epoch}; parameters "
                    f"restored to the last epoch checkpoint"
                )
            batch_losses.append(loss)
        losses.append(float(np.mean(batch_losses)))
        checkpoint = {k: v.copy() for k, v in network.parameters().items()}

    emb1 = network.extract_features(images)
    return TripletTrainResult(
        epoch_losses=losses,
        heldout_loss_before=before,
        heldout_loss_after=triplet_set_loss(emb1, heldout, config.alpha),
        ratio_before=ratio_before,
        ratio_after=class_distance_ratio(emb1, labels),
    )


def _with_seed(config: TripletConfig, seed: int) -> TripletConfig:
    return replace(config, seed=seed)


def _triplet_step(network, images, batch, config, opt, rng) -> float:
    idx_a = [t.anchor for t in batch]
    idx_p = [t.positive for t in batch]
    idx_n = [t.negative for t in batch]
    stacked = images[idx_a + idx_p + idx_n]
    emb, tape = network.train_forward(stacked, rng)
    m = len(batch)
    if config.l2_normalize:
        norms = np.linalg.norm(emb, axis=1, keepdims=True)
        norms = np.where(norms < 1e-12, 1.0, norms)
        unit = emb / norms
    else:
        unit = emb
    a, p, n = unit[:m], unit[m:2 * m], unit[2 * m:]
    d_ap = np.sum((a - p) ** 2, axis=1)
    d_an = np.sum((a - n) ** 2, axis=1)
    z = d_ap - d_an + config.alpha
    active = (z > 0).astype(float)[:, None]
    loss = float(np.clip(z, 0.0, None).mean())
    # dL/da = 2(n - p), dL/dp = 2(p - a), dL/dn = 2(a - n) on active rows
    ga = 2.0 * (n - p) * active / m
    gp = 2.0 * (p - a) * active / m
    gn = 2.0 * (a - n) * active / m
    grad = np.concatenate([ga, gp, gn], axis=0)
    if config.l2_normalize:
        inner = np.sum(grad * unit, axis=1, keepdims=True)
        grad = (grad - unit * inner) / norms
    if loss > 0.0:
        grads = tape.backward(grad)
        opt.step(network.trainable_params(), grads)
    return loss


# -- audit serialization -------------------------------------------------------

def save_triplets_csv(path, triplets: list[Triplet], sample_ids=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anchor_id", "positive_id", "negative_id"])
        for t in triplets:
            if sample_ids is None:
                writer.writerow([t.anchor, t.positive, t.negative])
            else:
                writer.writerow([sample_ids[t.anchor], sample_ids[t.positive],
                                 sample_ids[t.negative]])


def load_triplets_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append((row["anchor_id"], row["positive_id"], row["negative_id"]))
    return out
