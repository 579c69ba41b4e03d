"""End-to-end experiment runners.

Five experiment kinds cover the three-level adaptation framework:

- ``exp1_single`` / ``exp1_sequence``: PD detection from recognition-domain
  features of single stage frames vs fused stage sequences.
- ``exp2_adaptation``: action-unit adaptation, either by freezing a share
  of the recognition backbone and retraining the rest, or by training the
  compact architectures from scratch; PD detection on the adapted features.
- ``exp3_triplet``: embedding fine-tuning with the expression-constrained
  triplet loss on a subject pool disjoint from the classification folds.
- ``exp4_triclass``: one-vs-all grading of patients into three impairment
  groups by motor score thresholds, on patients only.

Everything is deterministic given (config, seed): dataset seeds and
training seeds all derive from the experiment seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines
from .backbones import build_fr_backbone, build_resnet7, build_vgg8, freeze_layers
from .fau import AuDetectionReport, FauTrainConfig, attach_fau_head, evaluate_fau, split_au_dataset, train_fau
from .metrics import (
    ConfusionMatrix,
    RankError,
    binary_metrics,
    pca_project,
    roc_auc_eer,
)
from .metrics import write_pca_csv as metrics_write_pca_csv
from .metrics import write_roc_csv as metrics_write_roc_csv
from .metrics import write_roc_svg as metrics_write_roc_svg
from .nn import ConfigError, Dense, Network
from .nn.losses import softmax_cross_entropy
from .nn.optim import make_optimizer
from .sequence import SequenceSpec, assemble_sequence
from .svm import (
    CvResult,
    SvmHyperParams,
    fast_grid,
    full_grid,
    grid_search_cv,
    grid_search_cv_multiclass,
)
from .synthetic import (
    AuConfig,
    ExpressionCorpus,
    FoldAssignment,
    HypomimiaConfig,
    IdentityConfig,
    generate_au_dataset,
    generate_expression_dataset,
    generate_identity_dataset,
    load_expression_corpus,
    split_folds,
)
from .triplet import TripletConfig, TripletTrainResult, train_triplet

EXPERIMENTS = ("exp1_single", "exp1_sequence", "exp2_adaptation",
               "exp3_triplet", "exp4_triclass")
BACKBONES = ("fr", "vgg8", "resnet7")


class ValidationError(ValueError):
    """Configuration rejected before any compute."""


class MissingDatasetError(ValidationError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class TrainBudget:
    embed_dim: int = 64
    fr_epochs: int = 8
    fau_epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-3


@dataclass(frozen=True)
class TripletSettings:
    alpha: float = 0.2
    epochs: int = 3
    triplets_per_epoch: int = 256
    batch_size: int = 48
    lr: float = 1e-4
    mining: str = "random"
    pool_fraction: float = 0.5   # share of subjects reserved for adaptation


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    out: str = "runs/out"
    backbone: str = "fr"
    freeze: tuple[float, ...] = (0.75, 1.0)
    sequences: tuple[str, ...] = ()
    kernels: tuple[str, ...] = ("gaussian", "linear")
    grid: str = "full"
    fusion: str = "concat"
    folds: int = 5
    corpus_dir: str | None = None
    corpus: HypomimiaConfig = field(default_factory=lambda: HypomimiaConfig.uniform(0.5))
    identity: IdentityConfig = field(default_factory=IdentityConfig)
    au: AuConfig = field(default_factory=AuConfig)
    train: TrainBudget = field(default_factory=TrainBudget)
    triplet: TripletSettings = field(default_factory=TripletSettings)
    triplet_adapt: bool = False   # exp4: triplet route instead of freezing

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}; "
                                  f"expected one of {EXPERIMENTS}")
        if self.backbone not in BACKBONES:
            raise ValidationError(f"unknown backbone {self.backbone!r}")
        if self.experiment in ("exp1_single", "exp1_sequence") and self.backbone != "fr":
            raise ValidationError("recognition-domain experiments require backbone 'fr'")
        if self.grid not in ("full", "fast"):
            raise ValidationError(f"grid must be 'full' or 'fast', got {self.grid!r}")
        if self.fusion not in ("concat", "score_mean"):
            raise ValidationError(f"unknown fusion mode {self.fusion!r}")
        for k in self.kernels:
            if k not in ("linear", "gaussian"):
                raise ValidationError(f"unknown kernel {k!r}")
        if not self.kernels:
            raise ValidationError("at least one kernel required")
        for r in self.freeze:
            if not 0.0 < r <= 1.0:
                raise ValidationError(f"freeze ratio {r} outside (0, 1]")
        if self.backbone == "fr" and self.experiment in ("exp2_adaptation", "exp3_triplet") \
                and not self.freeze:
            raise ValidationError("freeze ratios required for backbone adaptation")
        if self.folds < 2:
            raise ValidationError("need at least 2 folds")
        for s in self.effective_sequences():
            SequenceSpec.parse(s)
        if self.corpus_dir is not None and not Path(self.corpus_dir).exists():
            raise MissingDatasetError(
                f"dataset directory not found: {self.corpus_dir}"
            )

    def effective_sequences(self) -> tuple[str, ...]:
        if self.sequences:
            return self.sequences
        if self.experiment == "exp1_single":
            return ("neutral", "onset", "apex", "offset")
        if self.experiment == "exp4_triclass":
            return ("NOnAOffN",)
        return ("NOnA", "AOffN", "NOnAOffN")

    def grid_for(self, kernel: str):
        return full_grid(kernel) if self.grid == "full" else fast_grid(kernel)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return json.loads(json.dumps(d))  # tuples -> lists, canonical types

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    nested = {
        "corpus": HypomimiaConfig, "identity": IdentityConfig, "au": AuConfig,
        "train": TrainBudget, "triplet": TripletSettings,
    }
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            sub = dict(value)
            if key == "corpus" and "attenuation" in sub:
                level = sub.pop("attenuation")
                sub.setdefault("attenuation_pd1", level)
                sub.setdefault("attenuation_pd2", level)
                sub.setdefault("attenuation_pd3", level)
            kwargs[key] = nested[key](**sub)
        elif key in ("freeze", "sequences", "kernels"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    """Read a TOML experiment config, with optional seed/out overrides."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["out"] = out
    return config_from_dict(data)


def _subseed(seed: int, *tags) -> int:
    digest = hashlib.sha256(
        json.dumps([seed, *tags]).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "little")


# -- pipeline stages ------------------------------------------------------------

def prepare_corpus(config: ExperimentConfig) -> ExpressionCorpus:
    if config.corpus_dir is not None:
        path = Path(config.corpus_dir)
        if not path.exists():
            raise MissingDatasetError(f"dataset directory not found: {path}")
        return load_expression_corpus(path)
    cfg = replace(config.corpus, seed=_subseed(config.seed, "corpus"))
    return generate_expression_dataset(cfg)


def pretrain_fr_backbone(identity_cfg: IdentityConfig, budget: TrainBudget,
                         seed: int) -> Network:
    """Supervised identity pretraining of the recognition backbone."""
    samples = generate_identity_dataset(replace(identity_cfg,
                                                seed=_subseed(seed, "ids")))
    net = build_fr_backbone(embed_dim=budget.embed_dim,
                            seed=_subseed(seed, "fr-init") % 2**32)
    ids = sorted({s.subject_id for s in samples})
    index = {sid: i for i, sid in enumerate(ids)}
    rng = np.random.Generator(np.random.PCG64(_subseed(seed, "fr-head")))
    net.attach_head([Dense(net.feature_dim, len(ids), rng)])
    X = np.stack([s.image for s in samples])
    y = np.array([index[s.subject_id] for s in samples])
    opt = make_optimizer("adam", budget.lr)
    order_rng = np.random.Generator(np.random.PCG64(_subseed(seed, "fr-order")))
    for _ in range(budget.fr_epochs):
        order = order_rng.permutation(len(X))
        for start in range(0, len(X), budget.batch_size):
            idx = order[start:start + budget.batch_size]
            logits, tape = net.train_forward(X[idx], order_rng)
            _, grad = softmax_cross_entropy(logits, y[idx])
            opt.step(net.trainable_params(), tape.backward(grad))
    net.detach_head()
    return net


def build_scratch_backbone(arch: str, seed: int) -> Network:
    if arch == "vgg8":
        return build_vgg8(seed=_subseed(seed, "vgg8") % 2**32)
    if arch == "resnet7":
        return build_resnet7(seed=_subseed(seed, "resnet7") % 2**32)
    raise ValidationError(f"unknown scratch architecture {arch!r}")


def adapt_to_au_domain(backbone: Network, au_cfg: AuConfig, budget: TrainBudget,
                       freeze_ratio: float | None, seed: int,
                       model_id: str) -> tuple[Network, AuDetectionReport, list[float]]:
    """Attach the AU head, train it, and score AU detection on a held-out split.

    ``freeze_ratio`` None trains everything (scratch models); ratio 1.0
    leaves the backbone untouched (the no-adaptation baseline).
    """
    net = backbone.clone()
    if freeze_ratio is not None:
        freeze_layers(net, freeze_ratio)
    attach_fau_head(net, seed=_subseed(seed, "fau-head", model_id) % 2**32)
    samples = generate_au_dataset(replace(au_cfg, seed=_subseed(seed, "au")))
    train, val = split_au_dataset(samples, 0.8, seed=_subseed(seed, "au-split"))
    cfg = FauTrainConfig(epochs=budget.fau_epochs, batch_size=budget.batch_size,
                         lr=budget.lr, seed=_subseed(seed, "fau", model_id))
    history = train_fau(net, train, cfg)
    report = evaluate_fau(net, val, model_id=model_id, dataset_id="au-heldout")
    return net, report, history


def stage_feature_table(net: Network, corpus: ExpressionCorpus,
                        subjects: set[str] | None = None,
                        batch: int = 256) -> dict:
    """Features per (subject, expression): {stage: vector}."""
    samples = [s for s in corpus.samples
               if subjects is None or s.subject_id in subjects]
    if not samples:
        raise ValueError("no samples selected for feature extraction")
    X = np.stack([s.image for s in samples])
    feats = np.concatenate([net.extract_features(X[i:i + batch])
                            for i in range(0, len(X), batch)])
    table: dict = {}
    for s, vec in zip(samples, feats):
        table.setdefault((s.subject_id, s.expression), {})[s.stage] = vec
    return table


def sequence_dataset(table: dict, subject_labels: dict[str, str],
                     spec: SequenceSpec):
    """Fused per-video design matrix with +-1 PD labels and subject ids."""
    X, y, subjects = [], [], []
    for (subject, _expr), stages in sorted(table.items()):
        X.append(assemble_sequence(stages, spec))
        y.append(1 if subject_labels[subject] == "PD" else -1)
        subjects.append(subject)
    return np.array(X), np.array(y), subjects


def frame_dataset(table: dict, subject_labels: dict[str, str],
                  spec: SequenceSpec):
    """Single-frame rows for score-level fusion, keyed back to videos."""
    X, y, subjects, videos = [], [], [], []
    for (subject, expr), stages in sorted(table.items()):
        for stage in spec.stages():
            X.append(np.asarray(stages[stage], dtype=float).ravel())
            y.append(1 if subject_labels[subject] == "PD" else -1)
            subjects.append(subject)
            videos.append((subject, expr))
    return np.array(X), np.array(y), subjects, videos


def pd_classification(X, y, subjects, fold_assignment: FoldAssignment,
                      grid, seed: int, inner_k: int = 4) -> CvResult:
    return grid_search_cv(X, y, subjects, grid, fold_assignment,
                          seed=seed, inner_k=inner_k)


def pd_classification_score_fusion(table, subject_labels, spec: SequenceSpec,
                                   fold_assignment: FoldAssignment, grid,
                                   seed: int, inner_k: int = 4) -> CvResult:
    """Score-level fusion: classify stage frames, average the decision
    values per video, then score the fused prediction."""
    X, y, subjects, videos = frame_dataset(table, subject_labels, spec)
    frame_cv = grid_search_cv(X, y, subjects, grid, fold_assignment,
                              seed=seed, inner_k=inner_k, keep_models=True)
    folds = np.array([fold_assignment.fold_of(s) for s in subjects])
    fold_results = []
    all_scores, all_labels = [], []
    from .svm import FoldResult  # local import to avoid cycle noise
    for f, model in enumerate(frame_cv.models):
        test = folds == f
        scores = model.decision(X[test])
        vids = [v for v, t in zip(videos, test) if t]
        agg: dict = {}
        for v, s, lab in zip(vids, scores, y[test]):
            agg.setdefault(v, {"scores": [], "label": lab})["scores"].append(s)
        video_scores = np.array([np.mean(v["scores"]) for v in agg.values()])
        video_labels = np.array([(v["label"] + 1) // 2 for v in agg.values()])
        pred = (video_scores >= 0).astype(int)
        report = binary_metrics(video_labels, pred)
        fold_results.append(FoldResult(f, frame_cv.folds[f].params, report,
                                       len(video_labels)))
        all_scores.append(video_scores)
        all_labels.append(video_labels)
    pooled_scores = np.concatenate(all_scores)
    pooled_labels = np.concatenate(all_labels)
    roc = roc_auc_eer(pooled_scores, pooled_labels)
    accs = [fr.report.acc for fr in fold_results]
    sens = [fr.report.sens for fr in fold_results if fr.report.sens is not None]
    spec_ = [fr.report.spec for fr in fold_results if fr.report.spec is not None]
    f1 = [fr.report.f1 for fr in fold_results if fr.report.f1 is not None]
    return CvResult(
        folds=fold_results, selected=frame_cv.selected,
        acc_mean=float(np.mean(accs)), acc_std=float(np.std(accs)),
        sens_mean=float(np.mean(sens)) if sens else None,
        spec_mean=float(np.mean(spec_)) if spec_ else None,
        f1_mean=float(np.mean(f1)) if f1 else None,
        auc=roc.auc, eer=roc.eer,
        pooled_scores=pooled_scores, pooled_labels=pooled_labels,
        warnings=list(frame_cv.warnings),
    )


def split_triplet_pool(corpus: ExpressionCorpus, pool_fraction: float,
                       seed: int) -> tuple[set[str], set[str]]:
    """Class-stratified split into adaptation subjects and evaluation
    subjects; the two sets are disjoint so embedding training never sees
    classification test folds."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pool, evaluation = set(), set()
    for label in ("HC", "PD"):
        members = sorted(s.subject_id for s in corpus.subjects if s.label == label)
        rng.shuffle(members)
        cut = int(round(pool_fraction * len(members)))
        cut = min(max(cut, 1), len(members) - 2)
        pool.update(members[:cut])
        evaluation.update(members[cut:])
    return pool, evaluation


def triplet_adapt(base: Network, corpus: ExpressionCorpus, pool: set[str],
                  settings: TripletSettings, budget: TrainBudget,
                  seed: int) -> tuple[Network, TripletTrainResult]:
    samples = [s for s in corpus.samples if s.subject_id in pool]
    images = np.stack([s.image for s in samples])
    labels = [s.label for s in samples]
    expressions = [s.expression for s in samples]
    net = base.clone()
    net.detach_head()
    cfg = TripletConfig(alpha=settings.alpha, epochs=settings.epochs,
                        triplets_per_epoch=settings.triplets_per_epoch,
                        batch_size=settings.batch_size, lr=settings.lr,
                        mining=settings.mining,
                        seed=_subseed(seed, "triplet") % 2**32)
    result = train_triplet(net, images, labels, expressions, cfg)
    return net, result


def impairment_group_from_score(score: float) -> str:
    """Motor-score thresholds: 0..23 mild, (23, 33] intermediate, >33 severe.

    The boundary 23 belongs to the mild group and 33 to the intermediate
    one (closed upper ends)."""
    if score <= 23.0:
        return "PD-1"
    if score <= 33.0:
        return "PD-2"
    return "PD-3"


# -- report bundle ---------------------------------------------------------------

@dataclass
class ResultRow:
    experiment: str
    model: str
    sequence: str
    kernel: str
    C: float
    gamma: float | None
    view: str
    fusion: str
    acc_mean: float
    acc_std: float
    sens: float | None
    spec: float | None
    f1: float | None
    auc: float | None
    eer: float | None

    CSV_FIELDS = ("experiment", "model", "sequence", "kernel", "C", "gamma",
                  "view", "fusion", "acc_mean", "acc_std", "sens", "spec",
                  "f1", "auc", "eer")

    def csv_values(self):
        def fmt(v):
            return "" if v is None else repr(v) if isinstance(v, float) else str(v)
        return [fmt(getattr(self, name)) for name in self.CSV_FIELDS]


@dataclass
class TriClassRow:
    experiment: str
    model: str
    sequence: str
    kernel: str
    C: float
    view: str
    acc_mean: float
    acc_std: float
    f1_macro: float
    kappa: float | None

    CSV_FIELDS = ("experiment", "model", "sequence", "kernel", "C", "view",
                  "acc_mean", "acc_std", "f1_macro", "kappa")

    def csv_values(self):
        def fmt(v):
            return "" if v is None else repr(v) if isinstance(v, float) else str(v)
        return [fmt(getattr(self, name)) for name in self.CSV_FIELDS]


@dataclass
class ReportBundle:
    config: ExperimentConfig
    config_hash: str
    rows: list[ResultRow] = field(default_factory=list)
    triclass_rows: list[TriClassRow] = field(default_factory=list)
    rocs: dict = field(default_factory=dict)          # name -> RocResult
    pcas: dict = field(default_factory=dict)          # model -> (points, labels, explained)
    confusions: dict = field(default_factory=dict)    # name -> ConfusionMatrix
    au_reports: dict = field(default_factory=dict)    # model -> AuDetectionReport
    baseline_deltas: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def is_empty(self) -> bool:
        return not self.rows and not self.triclass_rows

# -- runners ----------------------------------------------------------------------

def _binary_rows_for_model(bundle: ReportBundle, config: ExperimentConfig,
                           model_name: str, table: dict,
                           subject_labels: dict, fold_assignment: FoldAssignment,
                           seed: int) -> None:
    """Classify every configured sequence x kernel for one feature model."""
    best = None
    for seq_name in config.effective_sequences():
        spec = SequenceSpec.parse(seq_name)
        for kernel in config.kernels:
            grid = config.grid_for(kernel)
            if config.fusion == "score_mean":
                cv = pd_classification_score_fusion(
                    table, subject_labels, spec, fold_assignment, grid,
                    seed=_subseed(seed, "cv", model_name, seq_name, kernel))
            else:
                X, y, subjects = sequence_dataset(table, subject_labels, spec)
                cv = pd_classification(
                    X, y, subjects, fold_assignment, grid,
                    seed=_subseed(seed, "cv", model_name, seq_name, kernel))
            row = ResultRow(
                experiment=config.experiment, model=model_name,
                sequence=spec.name, kernel=kernel,
                C=cv.selected.C, gamma=cv.selected.gamma,
                view="per_video", fusion=config.fusion,
                acc_mean=cv.acc_mean, acc_std=cv.acc_std,
                sens=cv.sens_mean, spec=cv.spec_mean, f1=cv.f1_mean,
                auc=cv.auc, eer=cv.eer)
            bundle.rows.append(row)
            bundle.warnings.extend(cv.warnings)
            key = f"{model_name}_{spec.name}_{kernel}"
            bundle.rocs[key] = roc_auc_eer(cv.pooled_scores, cv.pooled_labels)
            ref = baselines.lookup_pd_baseline(config.experiment, model_name,
                                               spec.name, kernel)
            if ref is not None:
                bundle.baseline_deltas.append({
                    "experiment": config.experiment, "model": model_name,
                    "sequence": spec.name, "kernel": kernel,
                    "computed_acc": cv.acc_mean, "baseline_acc": ref["acc"],
                    "delta": cv.acc_mean - ref["acc"],
                    "label": baselines.BASELINE_LABEL,
                })
            if best is None or cv.acc_mean > best[0]:
                best = (cv.acc_mean, spec, cv)
    if best is not None:
        _, spec, cv = best
        X, y, _ = sequence_dataset(table, subject_labels, spec)
        try:
            pca = pca_project(X, dims=2)
            labels = np.where(y > 0, "PD", "HC")
            bundle.pcas[model_name] = (pca.points, labels, pca.explained)
        except (RankError, ValueError) as exc:
            bundle.warnings.append(f"pca skipped for {model_name}: {exc}")


def _models_for_config(config: ExperimentConfig, corpus_seed_tag: str = "") -> dict:
    """Build the feature models the configured experiment calls for.

    Returns {model_name: (network, au_report_or_None)}.
    """
    seed = config.seed
    models: dict = {}
    try:
        if config.backbone == "fr":
            base = pretrain_fr_backbone(config.identity, config.train, seed)
        else:
            base = build_scratch_backbone(config.backbone, seed)
    except Exception as exc:
        raise StageError("backbone", exc) from exc

    exp = config.experiment
    try:
        if exp in ("exp1_single", "exp1_sequence"):
            models["fr"] = (base, None)
        elif config.backbone == "fr":
            for ratio in config.freeze:
                pct = int(round(ratio * 100))
                name = "fr-freeze100" if pct == 100 else f"fr-freeze{pct}"
                net, report, _ = adapt_to_au_domain(
                    base, config.au, config.train, ratio, seed, name)
                models[name] = (net, report)
        else:
            name = config.backbone
            net, report, _ = adapt_to_au_domain(
                base, config.au, config.train, None, seed, name)
            models[name] = (net, report)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("affective-adaptation", exc) from exc
    return models


def _triplet_model_name(base_name: str) -> str:
    if base_name.startswith("fr-freeze"):
        return "triplet" + base_name.removeprefix("fr-freeze")
    return f"triplet-{base_name}"


def run_experiment(config: ExperimentConfig) -> ReportBundle:
    """Execute the configured experiment chain and collect the report bundle."""
    config.validate()
    bundle = ReportBundle(config=config, config_hash=config.hash())
    seed = config.seed

    try:
        corpus = prepare_corpus(config)
    except MissingDatasetError:
        raise
    except Exception as exc:
        raise StageError("corpus", exc) from exc
    subject_labels = corpus.subject_labels()

    if config.experiment == "exp4_triclass":
        _run_exp4(config, corpus, bundle)
        return bundle

    if config.experiment == "exp3_triplet":
        pool, evaluation = split_triplet_pool(
            corpus, config.triplet.pool_fraction, _subseed(seed, "pool"))
    else:
        pool, evaluation = set(), {s.subject_id for s in corpus.subjects}

    eval_subjects = sorted(evaluation)
    eval_labels = [subject_labels[s] for s in eval_subjects]
    try:
        fold_assignment = split_folds(eval_subjects, eval_labels, config.folds,
                                      seed=_subseed(seed, "folds"))
    except ValueError as exc:
        raise StageError("fold-assignment", exc) from exc

    models = _models_for_config(config)
    for name, (net, au_report) in models.items():
        if au_report is not None:
            bundle.au_reports[name] = au_report

    if config.experiment == "exp3_triplet":
        adapted = {}
        for name, (net, _) in models.items():
            try:
                tnet, tres = triplet_adapt(net, corpus, pool, config.triplet,
                                           config.train, seed)
            except Exception as exc:
                raise StageError("triplet-training", exc) from exc
            adapted[_triplet_model_name(name)] = (tnet, None)
            bundle.warnings.append(
                f"{_triplet_model_name(name)}: held-out triplet loss "
                f"{tres.heldout_loss_before:.3f} -> {tres.heldout_loss_after:.3f}, "
                f"distance ratio {tres.ratio_before:.3f} -> {tres.ratio_after:.3f}")
        models.update(adapted)

    for name, (net, _) in models.items():
        try:
            table = stage_feature_table(net, corpus, subjects=evaluation)
        except Exception as exc:
            raise StageError("feature-extraction", exc) from exc
        try:
            _binary_rows_for_model(bundle, config, name, table, subject_labels,
                                   fold_assignment, seed)
        except MissingDatasetError:
            raise
        except StageError:
            raise
        except Exception as exc:
            raise StageError("classification", exc) from exc
    return bundle


def _run_exp4(config: ExperimentConfig, corpus: ExpressionCorpus,
              bundle: ReportBundle) -> None:
    """Tri-class impairment grading on patients only."""
    seed = config.seed
    pd_subjects = [s for s in corpus.subjects if s.label == "PD"]
    if not pd_subjects:
        raise StageError("exp4-groups", ValueError("no PD subjects in corpus"))
    groups = {}
    for s in pd_subjects:
        if s.updrs is None:
            raise StageError("exp4-groups",
                             ValueError(f"subject {s.subject_id} has no motor score"))
        groups[s.subject_id] = impairment_group_from_score(s.updrs)

    if config.triplet_adapt:
        base_name = config.backbone if config.backbone != "fr" else \
            f"fr-freeze{int(round(config.freeze[0] * 100))}"
        models = _models_for_config(config)
        name, (net, _) = next(iter(models.items()))
        pool, evaluation = split_triplet_pool(
            corpus, config.triplet.pool_fraction, _subseed(seed, "pool"))
        net, _tres = triplet_adapt(net, corpus, pool, config.triplet,
                                   config.train, seed)
        model_name = _triplet_model_name(name)
        keep = {s.subject_id for s in pd_subjects} & evaluation
    else:
        models = _models_for_config(config)
        model_name, (net, au_report) = next(iter(models.items()))
        if au_report is not None:
            bundle.au_reports[model_name] = au_report
        keep = {s.subject_id for s in pd_subjects}

    subjects_in = sorted(keep)
    subject_groups = [groups[s] for s in subjects_in]
    try:
        fold_assignment = split_folds(subjects_in, subject_groups, config.folds,
                                      seed=_subseed(seed, "folds"))
    except ValueError as exc:
        raise StageError("fold-assignment", exc) from exc

    table = stage_feature_table(net, corpus, subjects=keep)
    spec = SequenceSpec.parse(config.effective_sequences()[0])
    X, y, subjects = [], [], []
    for (subject, _expr), stages in sorted(table.items()):
        X.append(assemble_sequence(stages, spec))
        y.append(groups[subject])
        subjects.append(subject)
    X = np.array(X)
    y = np.array(y)

    grid = config.grid_for("linear")  # multi-class uses linear kernels only
    cv = grid_search_cv_multiclass(
        X, y, subjects, grid, fold_assignment,
        seed=_subseed(seed, "cv4"), keep_models=True)
    bundle.triclass_rows.append(TriClassRow(
        experiment=config.experiment, model=model_name, sequence=spec.name,
        kernel="linear", C=cv.selected.C, view="per_video",
        acc_mean=cv.acc_mean, acc_std=cv.acc_std, f1_macro=cv.f1_macro,
        kappa=cv.kappa))
    bundle.confusions[f"{model_name}_per_video"] = cv.confusion
    bundle.warnings.extend(cv.warnings)

    # Aggregated per-subject view: mean decision value across a subject's
    # sequences, then argmax.
    folds = np.array([fold_assignment.fold_of(s) for s in subjects])
    subj_true, subj_pred = [], []
    per_fold_acc = []
    for f, model in enumerate(cv.models):
        test = folds == f
        D = model.decision(X[test])
        test_subjects = [s for s, t in zip(subjects, test) if t]
        agg: dict = {}
        for col, s in enumerate(test_subjects):
            agg.setdefault(s, []).append(D[:, col])
        correct = 0
        for s, cols in sorted(agg.items()):
            mean_dec = np.mean(np.stack(cols, axis=1), axis=1)
            pred = model.classes[int(np.argmax(mean_dec))]
            subj_true.append(groups[s])
            subj_pred.append(pred)
            correct += int(pred == groups[s])
        per_fold_acc.append(100.0 * correct / len(agg))
    confusion = ConfusionMatrix.from_predictions(subj_true, subj_pred,
                                                 tuple(sorted(set(subject_groups))))
    from .metrics import cohen_kappa, macro_f1
    bundle.triclass_rows.append(TriClassRow(
        experiment=config.experiment, model=model_name, sequence=spec.name,
        kernel="linear", C=cv.selected.C, view="per_subject",
        acc_mean=float(np.mean(per_fold_acc)), acc_std=float(np.std(per_fold_acc)),
        f1_macro=macro_f1(confusion), kappa=cohen_kappa(confusion)))
    bundle.confusions[f"{model_name}_per_subject"] = confusion

    try:
        pca = pca_project(X, dims=2)
        bundle.pcas[model_name] = (pca.points, np.array(y), pca.explained)
    except (RankError, ValueError) as exc:
        bundle.warnings.append(f"pca skipped for {model_name}: {exc}")


# -- export -----------------------------------------------------------------------

class ExportError(RuntimeError):
    pass


def export_reports(bundle: ReportBundle, out_dir, formats=("csv", "json", "svg")):
    """Write the bundle's tables and figures; returns the written paths.

    Raises ExportError on an empty bundle: partial runs must never produce
    innocent-looking empty files.
    """
    if bundle.is_empty():
        raise ExportError("refusing to export an empty report bundle")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if "csv" in formats:
        if bundle.rows:
            path = out / "results.csv"
            with open(path, "w", newline="") as fh:
                fh.write(",".join(ResultRow.CSV_FIELDS) + "\n")
                for row in bundle.rows:
                    fh.write(",".join(row.csv_values()) + "\n")
            written.append(path)
        if bundle.triclass_rows:
            path = out / "results_triclass.csv"
            with open(path, "w", newline="") as fh:
                fh.write(",".join(TriClassRow.CSV_FIELDS) + "\n")
                for row in bundle.triclass_rows:
                    fh.write(",".join(row.csv_values()) + "\n")
            written.append(path)
        for name, roc in sorted(bundle.rocs.items()):
            path = out / f"roc_{name}.csv"
            metrics_write_roc_csv(path, roc)
            written.append(path)
        for name, (points, labels, _explained) in sorted(bundle.pcas.items()):
            path = out / f"pca_{name}.csv"
            metrics_write_pca_csv(path, points, labels)
            written.append(path)
        for name, confusion in sorted(bundle.confusions.items()):
            path = out / f"confusion_{name}.csv"
            _write_confusion_csv(path, confusion)
            written.append(path)

    if "json" in formats:
        path = out / "results.json"
        with open(path, "w") as fh:
            json.dump(_bundle_json(bundle), fh, indent=2, sort_keys=True)
        written.append(path)
        for name, report in sorted(bundle.au_reports.items()):
            path = out / f"au_report_{name}.json"
            report.write_json(path)
            written.append(path)

    if "svg" in formats and bundle.rocs:
        # One figure per sequence/kernel pane, one curve per model.
        panes: dict = {}
        for key, roc in bundle.rocs.items():
            model, seq, kernel = key.rsplit("_", 2)
            panes.setdefault((seq, kernel), {})[model] = roc
        for (seq, kernel), curves in sorted(panes.items()):
            path = out / f"roc_{seq}_{kernel}.svg"
            metrics_write_roc_svg(path, curves)
            written.append(path)
    return written


def _write_confusion_csv(path, confusion: ConfusionMatrix) -> None:
    pct = confusion.normalized()
    with open(path, "w", newline="") as fh:
        fh.write("true_class," + ",".join(str(l) for l in confusion.labels)
                 + ",row_count\n")
        for i, label in enumerate(confusion.labels):
            cells = ",".join(repr(float(v)) for v in pct[i])
            fh.write(f"{label},{cells},{int(confusion.counts[i].sum())}\n")


def _bundle_json(bundle: ReportBundle) -> dict:
    def row_dict(row):
        return {k: getattr(row, k) for k in row.CSV_FIELDS}

    return {
        "config": bundle.config.to_dict(),
        "config_hash": bundle.config_hash,
        "rows": [row_dict(r) for r in bundle.rows],
        "triclass_rows": [row_dict(r) for r in bundle.triclass_rows],
        "au_reports": {k: v.as_dict() for k, v in sorted(bundle.au_reports.items())},
        "baseline_deltas": bundle.baseline_deltas,
        "confusions": {
            k: {"labels": list(map(str, c.labels)),
                "counts": c.counts.tolist(),
                "row_pct": c.normalized().tolist()}
            for k, c in sorted(bundle.confusions.items())
        },
        "warnings": bundle.warnings,
    }


def verify_config_hash(results_json_path) -> bool:
    """Re-derive the stored config's hash and compare with the stored one."""
    with open(results_json_path) as fh:
        data = json.load(fh)
    config = config_from_dict(data["config"])
    return config.hash() == data["config_hash"]
