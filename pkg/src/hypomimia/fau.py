"""Face action unit head: attachment, multi-label training, per-AU scoring.

The head is a dense layer from the backbone's feature vector to 8 sigmoid
outputs, one per action unit in the fixed order AU 1, 2, 4, 5, 6, 12, 25,
26.  Training minimizes mean binary cross-entropy over the 8 outputs;
evaluation reports AUC and EER per unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .metrics import SingleClassError, roc_auc_eer
from .nn import Dense, Network, NonFiniteError, Sigmoid
from .nn.losses import mean_bce
from .nn.optim import make_optimizer
from .synthetic import AU_ORDER, ImageSample

N_AUS = len(AU_ORDER)


class HeadError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class FauTrainConfig:
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    pos_weight: tuple[float, ...] | None = None  # optional per-AU weighting

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.pos_weight is not None and len(self.pos_weight) != N_AUS:
            raise ValueError(f"pos_weight needs {N_AUS} entries")


@dataclass(frozen=True)
class AuMetrics:
    au: int
    auc: float | None
    eer_pct: float | None

    @property
    def defined(self) -> bool:
        return self.auc is not None


@dataclass
class AuDetectionReport:
    model_id: str
    dataset_id: str
    entries: list[AuMetrics]

    def __post_init__(self):
        if tuple(e.au for e in self.entries) != AU_ORDER:
            raise ValueError(f"report must carry exactly the AUs {AU_ORDER}")

    def auc_of(self, au: int) -> float | None:
        return next(e.auc for e in self.entries if e.au == au)

    def as_dict(self) -> dict:
        return {
            "model": self.model_id,
            "dataset": self.dataset_id,
            "aus": [
                {"au": e.au, "auc": e.auc, "eer_pct": e.eer_pct,
                 "defined": e.defined}
                for e in self.entries
            ],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def attach_fau_head(network: Network, seed: int = 0) -> Network:
    """Append the dense->sigmoid detection head after the feature layer."""
    if network.has_head():
        raise HeadError("a task head is already attached")
    rng = np.random.Generator(np.random.PCG64(seed))
    network.attach_head([Dense(network.feature_dim, N_AUS, rng), Sigmoid()])
    return network


def _stack(samples: list[ImageSample]):
    X = np.stack([s.image for s in samples])
    Y = np.array([s.au_labels for s in samples], dtype=float)
    if Y.shape[1] != N_AUS:
        raise ValueError(f"AU label vectors must have length {N_AUS}")
    return X, Y


def train_fau(network: Network, samples: list[ImageSample],
              config: FauTrainConfig) -> list[float]:
    """Train the head (and any unfrozen backbone layers) on labelled images.

    Returns the loss history: full-dataset eval-mode BCE before training,
    then after each epoch.  A non-finite loss aborts with diagnostics.
    """
    if not samples:
        raise ValueError("empty dataset")
    if not network.has_head():
        raise HeadError("attach the detection head before training")
    X, Y = _stack(samples)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    opt = make_optimizer(config.optimizer, config.lr)
    pos_weight = (np.asarray(config.pos_weight)
                  if config.pos_weight is not None else None)

    def full_loss():
        loss, _ = mean_bce(network.forward(X), Y, pos_weight)
        return float(loss)

    history = [full_loss()]
    n = len(X)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            try:
                probs, tape = network.train_forward(X[idx], rng)
            except NonFiniteError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            loss, grad = mean_bce(probs, Y[idx], pos_weight)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"epoch {epoch}: non-finite training loss at batch "
                    f"starting {start}"
                )
            grads = tape.backward(grad)
            opt.step(network.trainable_params(), grads)
        history.append(full_loss())
    return history


def evaluate_fau(network: Network, samples: list[ImageSample],
                 model_id: str = "model",
                 dataset_id: str = "dataset") -> AuDetectionReport:
    """Per-AU AUC and EER of the head's scores on a labelled dataset.

    An AU with a single class present is flagged undefined (None entries)
    rather than silently scored.
    """
    if not samples:
        raise ValueError("empty dataset")
    X, Y = _stack(samples)
    scores = network.forward(X)
    entries = []
    for j, au in enumerate(AU_ORDER):
        try:
            roc = roc_auc_eer(scores[:, j], Y[:, j].astype(int))
            entries.append(AuMetrics(au, roc.auc, roc.eer))
        except SingleClassError:
            entries.append(AuMetrics(au, None, None))
    return AuDetectionReport(model_id, dataset_id, entries)


def split_au_dataset(samples: list[ImageSample], train_fraction: float = 0.8,
                     seed: int = 0):
    """Deterministic train/validation split stratified by AU label pattern."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    by_pattern: dict[tuple, list[int]] = {}
    for i, s in enumerate(samples):
        by_pattern.setdefault(tuple(s.au_labels), []).append(i)
    train_idx, val_idx = [], []
    for pattern in sorted(by_pattern):
        members = np.array(by_pattern[pattern])
        rng.shuffle(members)
        cut = int(round(train_fraction * len(members)))
        train_idx.extend(members[:cut].tolist())
        val_idx.extend(members[cut:].tolist())
    return ([samples[i] for i in sorted(train_idx)],
            [samples[i] for i in sorted(val_idx)])
