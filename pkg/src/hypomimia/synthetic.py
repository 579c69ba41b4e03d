"""Seeded generators standing in for the three unavailable corpora.

Three datasets are produced, all built from the same image model: a
subject-specific smooth base face plus additive region patterns plus
bounded noise, with values guaranteed inside [0, 1] by construction.

- expression corpus (clinical-video surrogate): per subject and expression
  a trapezoidal intensity profile drives an expression pattern; patients
  get the profile scaled by a per-group attenuation factor (hypomimia).
  The ground-truth valence curve is exactly the signed profile.
- AU corpus (annotated-image surrogate): each active action unit adds its
  own spatial pattern in a distinct face region.
- identity corpus (recognition-pretraining surrogate): per-identity base
  faces under pose/illumination jitter.

Expressions are weighted combinations of the action-unit patterns, so the
affective domain genuinely shares structure with the expression videos.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sequence import STAGES, StageParams, ValenceCurve, detect_stages, save_valence_csv, load_valence_csv

AU_ORDER = (1, 2, 4, 5, 6, 12, 25, 26)
EXPRESSIONS = ("smile", "anger", "surprise", "wink_left", "wink_right")
IMPAIRMENT_GROUPS = ("PD-1", "PD-2", "PD-3")

# Region boxes (row0, row1, col0, col1) on the unit 32-grid, scaled to size.
_AU_REGIONS = {
    1: (5, 9, 12, 20),     # inner brow
    2: (5, 9, 2, 10),      # outer brow (left side)
    4: (9, 12, 8, 24),     # brow lowerer
    5: (12, 15, 8, 24),    # upper lid
    6: (16, 20, 4, 12),    # cheek
    12: (21, 25, 4, 11),   # lip corner
    25: (22, 26, 13, 19),  # lips part
    26: (27, 31, 10, 22),  # jaw
}

# expression -> ((au, weight), ...), signed peak valence
_EXPRESSION_MIX = {
    "smile": (((12, 1.0), (6, 0.7), (25, 0.4)), 1.0),
    "anger": (((4, 1.0), (5, 0.6)), -1.0),
    "surprise": (((1, 0.8), (2, 0.8), (5, 0.6), (26, 0.9)), 0.7),
    "wink_left": (((6, 1.0), (2, 0.4)), 0.5),
    "wink_right": (((5, 1.0), (1, 0.4)), 0.5),
}

_PATTERN_AMPLITUDE = 0.3
_BASE_MIN, _BASE_SPAN = 0.28, 0.16


class GeneratorConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImageSample:
    image: np.ndarray            # (H, W, 1) float64 in [0, 1]
    subject_id: str
    label: str                   # "HC" | "PD"
    impairment_group: str        # "none" | "PD-1" | "PD-2" | "PD-3"
    expression: str
    stage: str
    au_labels: tuple[int, ...] | None = None
    sample_id: str = ""


@dataclass(frozen=True)
class SubjectInfo:
    subject_id: str
    label: str
    impairment_group: str
    attenuation: float
    updrs: float | None
    base: np.ndarray


@dataclass
class ExpressionCorpus:
    samples: list[ImageSample]
    curves: dict[tuple[str, str], ValenceCurve]
    subjects: list[SubjectInfo]

    def subject_labels(self) -> dict[str, str]:
        return {s.subject_id: s.label for s in self.subjects}


@dataclass(frozen=True)
class HypomimiaConfig:
    """Expression-corpus knobs; attenuation 1.0 means no deficit.

    ``rest_level`` is the residual expressiveness outside the evoked
    episode (masked faces show reduced tone at rest as well); it must stay
    below the neutral-stage detection fraction so neutral frames are still
    found on the curve.
    """

    hc_subjects: int = 24
    pd_subjects: int = 30
    attenuation_pd1: float = 0.7
    attenuation_pd2: float = 0.5
    attenuation_pd3: float = 0.3
    hc_attenuation: float = 1.0
    rest_level: float = 0.08
    intensity_jitter: float = 0.2   # per-frame execution variability
    noise: float = 0.02
    frames: int = 48
    size: int = 32
    seed: int = 0

    def __post_init__(self):
        a1, a2, a3 = (self.attenuation_pd1, self.attenuation_pd2,
                      self.attenuation_pd3)
        if not all(0.0 <= a <= 1.0 for a in (a1, a2, a3, self.hc_attenuation)):
            raise GeneratorConfigError("attenuations must lie in [0, 1]")
        if not a3 <= a2 <= a1:
            raise GeneratorConfigError(
                "attenuation ordering violated: require PD-3 <= PD-2 <= PD-1 <= 1"
            )
        if not 0.0 <= self.rest_level < 1.0:
            raise GeneratorConfigError("rest_level must lie in [0, 1)")
        if not 0.0 <= self.intensity_jitter < 0.5:
            raise GeneratorConfigError("intensity_jitter must lie in [0, 0.5)")

    @classmethod
    def uniform(cls, attenuation: float, **kw) -> "HypomimiaConfig":
        return cls(attenuation_pd1=attenuation, attenuation_pd2=attenuation,
                   attenuation_pd3=attenuation, **kw)

    def group_attenuation(self, group: str) -> float:
        return {"PD-1": self.attenuation_pd1, "PD-2": self.attenuation_pd2,
                "PD-3": self.attenuation_pd3, "none": self.hc_attenuation}[group]


@dataclass(frozen=True)
class AuConfig:
    n_samples: int = 240
    intensity: float = 1.0
    noise: float = 0.02
    p_active: float = 0.35
    size: int = 32
    seed: int = 0


@dataclass(frozen=True)
class IdentityConfig:
    identities: int = 16
    images_per_identity: int = 16
    jitter: float = 1.0   # scales both pixel shift and brightness wobble
    noise: float = 0.02
    size: int = 32
    seed: int = 0


# -- image building blocks ----------------------------------------------------

def _smooth_field(rng: np.random.Generator, size: int, cells: int = 8) -> np.ndarray:
    """Bilinear upsampling of a coarse random grid; values in [-1, 1]."""
    coarse = rng.uniform(-1.0, 1.0, size=(cells, cells))
    src = np.linspace(0, cells - 1, size)
    i0 = np.clip(src.astype(int), 0, cells - 2)
    frac = src - i0
    rows = (coarse[i0, :] * (1 - frac)[:, None] + coarse[i0 + 1, :] * frac[:, None])
    cols = (rows[:, i0] * (1 - frac)[None, :] + rows[:, i0 + 1] * frac[None, :])
    return cols


def _region_bump(size: int, box) -> np.ndarray:
    """Cosine-window bump inside a region box, zero elsewhere, peak 1."""
    r0, r1, c0, c1 = (int(round(b * size / 32)) for b in box)
    r1, c1 = max(r1, r0 + 1), max(c1, c0 + 1)
    out = np.zeros((size, size))
    rr = np.sin(np.linspace(0, np.pi, r1 - r0))
    cc = np.sin(np.linspace(0, np.pi, c1 - c0))
    out[r0:r1, c0:c1] = rr[:, None] * cc[None, :]
    return out


_pattern_cache: dict[int, dict[int, np.ndarray]] = {}


def au_patterns(size: int = 32) -> dict[int, np.ndarray]:
    """Fixed spatial pattern per action unit, amplitude 0.3, disjoint regions."""
    if size not in _pattern_cache:
        pats = {}
        for au, box in _AU_REGIONS.items():
            p = _region_bump(size, box)
            if au == 2:  # outer brow and lateral patterns get mirrored copies
                p = p + p[:, ::-1]
            pats[au] = _PATTERN_AMPLITUDE * np.clip(p, 0.0, 1.0)
        _pattern_cache[size] = pats
    return _pattern_cache[size]


def expression_pattern(expression: str, size: int = 32) -> np.ndarray:
    """Expression map as a weighted combination of AU patterns."""
    mix, _ = _EXPRESSION_MIX[expression]
    pats = au_patterns(size)
    out = np.zeros((size, size))
    for au, w in mix:
        p = pats[au]
        if expression == "wink_left":
            p = np.where(np.arange(size)[None, :] < size // 2, p, 0.0)
        elif expression == "wink_right":
            p = np.where(np.arange(size)[None, :] >= size // 2, p, 0.0)
        out = np.maximum(out, w * p)
    return out


def expression_valence_sign(expression: str) -> float:
    return _EXPRESSION_MIX[expression][1]


def _base_face(rng: np.random.Generator, size: int) -> np.ndarray:
    field_ = _smooth_field(rng, size)
    return _BASE_MIN + _BASE_SPAN * 0.5 * (field_ + 1.0)


def trapezoid_profile(frames: int) -> np.ndarray:
    """Unit trapezoid: flat zero, ramp up, plateau at 1, ramp down, zero."""
    t0, t1, t2, t3 = (int(frames * f) for f in (0.15, 0.35, 0.62, 0.85))
    prof = np.zeros(frames)
    prof[t0:t1] = np.linspace(0, 1, t1 - t0, endpoint=False)
    prof[t1:t2] = 1.0
    prof[t2:t3] = np.linspace(1, 0, t3 - t2, endpoint=False)
    return prof


def _finalize(img: np.ndarray) -> np.ndarray:
    if img.min() < 0.0 or img.max() > 1.0:
        raise AssertionError("image values escaped [0, 1]; check amplitude budget")
    return img[:, :, None]


# -- expression corpus --------------------------------------------------------

def generate_expression_dataset(config: HypomimiaConfig,
                                stage_params: StageParams | None = None
                                ) -> ExpressionCorpus:
    """Build the clinical-video surrogate.

    Per subject and expression: a valence curve equal to the signed,
    attenuation-scaled trapezoid profile, plus image samples rendered at
    the five detected stage frames.
    """
    if config.hc_subjects < 1 or config.pd_subjects < 1:
        raise GeneratorConfigError("need at least one subject per class")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    subjects: list[SubjectInfo] = []
    for i in range(config.hc_subjects):
        subjects.append(SubjectInfo(
            subject_id=f"HC{i + 1:03d}", label="HC", impairment_group="none",
            attenuation=config.hc_attenuation, updrs=None,
            base=_base_face(rng, config.size)))
    updrs_ranges = {"PD-1": (12.0, 23.0), "PD-2": (23.0, 33.0), "PD-3": (33.0, 60.0)}
    for i in range(config.pd_subjects):
        group = IMPAIRMENT_GROUPS[i % 3]
        lo, hi = updrs_ranges[group]
        updrs = float(rng.uniform(lo, hi))
        subjects.append(SubjectInfo(
            subject_id=f"PD{i + 1:03d}", label="PD", impairment_group=group,
            attenuation=config.group_attenuation(group), updrs=updrs,
            base=_base_face(rng, config.size)))

    base_profile = trapezoid_profile(config.frames)
    profile = config.rest_level + (1.0 - config.rest_level) * base_profile
    samples: list[ImageSample] = []
    curves: dict[tuple[str, str], ValenceCurve] = {}
    for subj in subjects:
        for expr in EXPRESSIONS:
            intensity = subj.attenuation * profile
            # The curve is the clean profile (stage detection ground truth);
            # the *rendered* intensity additionally carries the slowed
            # transitions of the deficit (ramps warped by the attenuation,
            # plateau untouched) plus per-frame execution jitter.
            curve = ValenceCurve(np.arange(config.frames),
                                 expression_valence_sign(expr) * intensity)
            curves[(subj.subject_id, expr)] = curve
            warped = base_profile ** (1.0 / max(subj.attenuation, 0.05))
            rendered = subj.attenuation * (
                config.rest_level + (1.0 - config.rest_level) * warped)
            rendered = rendered * (
                1.0 + config.intensity_jitter
                * rng.uniform(-1.0, 1.0, size=config.frames))
            stages = detect_stages(curve, stage_params)
            pattern = expression_pattern(expr, config.size)
            for stage_name, frame in zip(STAGES, stages.as_tuple()):
                noise = rng.uniform(-config.noise, config.noise,
                                    size=subj.base.shape) if config.noise else 0.0
                img = subj.base + rendered[frame] * pattern + noise
                samples.append(ImageSample(
                    image=_finalize(img), subject_id=subj.subject_id,
                    label=subj.label, impairment_group=subj.impairment_group,
                    expression=expr, stage=stage_name,
                    sample_id=f"{subj.subject_id}_{expr}_{stage_name}"))
    return ExpressionCorpus(samples, curves, subjects)


# -- AU corpus ----------------------------------------------------------------

def generate_au_dataset(config: AuConfig) -> list[ImageSample]:
    """AU-labelled images: each active unit adds its pattern, exactly."""
    if config.n_samples < 100:
        raise GeneratorConfigError("AU dataset needs at least 100 samples")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    pats = au_patterns(config.size)
    samples = []
    for i in range(config.n_samples):
        base = _base_face(rng, config.size)
        labels = tuple(int(b) for b in rng.random(len(AU_ORDER)) < config.p_active)
        img = base.copy()
        for au, active in zip(AU_ORDER, labels):
            if active:
                img = img + config.intensity * pats[au]
        if config.noise:
            img = img + rng.uniform(-config.noise, config.noise, size=img.shape)
        samples.append(ImageSample(
            image=_finalize(np.clip(img, 0.0, 1.0)), subject_id=f"AU{i + 1:05d}",
            label="HC", impairment_group="none", expression="", stage="",
            au_labels=labels, sample_id=f"AU{i + 1:05d}"))
    return samples


# -- identity corpus ----------------------------------------------------------

def generate_identity_dataset(config: IdentityConfig) -> list[ImageSample]:
    """Per-identity base faces under integer pose shift and brightness jitter."""
    if config.identities < 10:
        raise GeneratorConfigError("need at least 10 identities")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    samples = []
    for ident in range(config.identities):
        base = _base_face(rng, config.size)
        sid = f"ID{ident + 1:04d}"
        for j in range(config.images_per_identity):
            img = base
            if config.jitter > 0:
                max_shift = max(1, int(round(2 * config.jitter)))
                dr, dc = rng.integers(-max_shift, max_shift + 1, size=2)
                img = np.roll(np.roll(img, int(dr), axis=0), int(dc), axis=1)
                img = img * (1.0 + 0.1 * config.jitter * rng.uniform(-1, 1))
            if config.noise:
                img = img + rng.uniform(-config.noise, config.noise, size=img.shape)
            samples.append(ImageSample(
                image=_finalize(np.clip(img, 0.0, 1.0)), subject_id=sid,
                label="HC", impairment_group="none", expression="", stage="",
                sample_id=f"{sid}_{j:03d}"))
    return samples


# -- fold assignment ----------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    folds: dict[str, int]
    k: int

    def __post_init__(self):
        if any(not 0 <= f < self.k for f in self.folds.values()):
            raise ValueError("fold index out of range")

    def fold_of(self, subject_id: str) -> int:
        return self.folds[subject_id]

    def sizes(self) -> list[int]:
        out = [0] * self.k
        for f in self.folds.values():
            out[f] += 1
        return out


def split_folds(subject_ids, labels, k: int, seed: int = 0) -> FoldAssignment:
    """Stratified subject-level partition.

    Round-robin deal per class with a pointer carried across classes, so
    total fold sizes differ by at most one and each class is balanced
    within one subject across folds.
    """
    subject_ids = list(subject_ids)
    labels = list(labels)
    if len(subject_ids) != len(labels):
        raise ValueError("subject_ids and labels lengths differ")
    if len(set(subject_ids)) != len(subject_ids):
        raise ValueError("duplicate subject ids")
    by_class: dict[object, list[str]] = {}
    for sid, lab in zip(subject_ids, labels):
        by_class.setdefault(lab, []).append(sid)
    smallest = min(len(v) for v in by_class.values())
    if k > smallest:
        raise ValueError(f"k={k} exceeds smallest class size {smallest}")
    rng = np.random.Generator(np.random.PCG64(seed))
    folds: dict[str, int] = {}
    pointer = 0
    for lab in sorted(by_class, key=str):
        members = sorted(by_class[lab])
        rng.shuffle(members)
        for sid in members:
            folds[sid] = pointer % k
            pointer += 1
    return FoldAssignment(folds, k)


# -- persistence --------------------------------------------------------------
#
# Images are stored one file per sample: a 12-byte header of three
# little-endian u32 (height, width, channels) followed by row-major
# little-endian float64 pixels.  See docs/formats.md.

def write_image(path, image: np.ndarray) -> None:
    h, w, c = image.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<III", h, w, c))
        fh.write(np.ascontiguousarray(image, dtype="<f8").tobytes())


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        h, w, c = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(8 * h * w * c), dtype="<f8")
    return data.reshape(h, w, c).astype(np.float64)


def save_expression_corpus(corpus: ExpressionCorpus, out_dir) -> None:
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    with open(out / "subjects.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "class", "group", "attenuation", "updrs"])
        for s in corpus.subjects:
            writer.writerow([s.subject_id, s.label, s.impairment_group,
                             repr(s.attenuation),
                             "" if s.updrs is None else repr(s.updrs)])
    for (sid, expr), curve in sorted(corpus.curves.items()):
        save_valence_csv(out / "curves" / f"{sid}_{expr}.csv", curve)
    with open(out / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "subject_id", "class", "group",
                         "expression", "stage", "image_path", "valence_csv"])
        for s in corpus.samples:
            img_rel = f"images/{s.sample_id}.f64"
            write_image(out / img_rel, s.image)
            writer.writerow([s.sample_id, s.subject_id, s.label,
                             s.impairment_group, s.expression, s.stage,
                             img_rel, f"curves/{s.subject_id}_{s.expression}.csv"])


def load_expression_corpus(in_dir) -> ExpressionCorpus:
    root = Path(in_dir)
    subjects = []
    with open(root / "subjects.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            subjects.append(SubjectInfo(
                subject_id=row["subject_id"], label=row["class"],
                impairment_group=row["group"],
                attenuation=float(row["attenuation"]),
                updrs=float(row["updrs"]) if row["updrs"] else None,
                base=np.zeros((0, 0))))
    samples = []
    curves: dict[tuple[str, str], ValenceCurve] = {}
    with open(root / "manifest.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["subject_id"], row["expression"])
            if key not in curves:
                curves[key] = load_valence_csv(root / row["valence_csv"])
            samples.append(ImageSample(
                image=read_image(root / row["image_path"]),
                subject_id=row["subject_id"], label=row["class"],
                impairment_group=row["group"], expression=row["expression"],
                stage=row["stage"], sample_id=row["sample_id"]))
    return ExpressionCorpus(samples, curves, subjects)


def save_au_manifest(samples: list[ImageSample], out_dir) -> None:
    """Write the AU corpus with the manifest schema image_path,au1..au26."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    with open(out / "au_manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_path"] + [f"au{a}" for a in AU_ORDER])
        for s in samples:
            img_rel = f"images/{s.sample_id}.f64"
            write_image(out / img_rel, s.image)
            writer.writerow([img_rel] + list(s.au_labels))


def load_au_manifest(in_dir) -> list[ImageSample]:
    root = Path(in_dir)
    samples = []
    with open(root / "au_manifest.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["image_path"] + [f"au{a}" for a in AU_ORDER]
        if reader.fieldnames != expected:
            raise ValueError(f"au manifest columns must be {expected}")
        for i, row in enumerate(reader):
            labels = tuple(int(row[f"au{a}"]) for a in AU_ORDER)
            samples.append(ImageSample(
                image=read_image(root / row["image_path"]),
                subject_id=f"AU{i + 1:05d}", label="HC", impairment_group="none",
                expression="", stage="", au_labels=labels,
                sample_id=Path(row["image_path"]).stem))
    return samples
