"""Expression stage detection from valence curves and sequence fusion.

A valence curve is a per-frame signed scalar in [-1, 1]; the five stages
(neutral, onset, apex, offset, neutral) are located from its magnitude.
Stage feature vectors are fused into a single sequence vector by
concatenation in stage order (the primary mode); score-level fusion is
implemented separately in the experiment layer.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

STAGES = ("neutral_pre", "onset", "apex", "offset", "neutral_post")
SINGLE_STAGES = ("neutral", "onset", "apex", "offset")
SEQUENCE_VARIANTS = {
    "NOnA": ("neutral_pre", "onset", "apex"),
    "AOffN": ("apex", "offset", "neutral_post"),
    "NOnAOffN": STAGES,
}


class FlatExpressionError(ValueError):
    """Apex amplitude below the detection floor.

    Surfaced rather than patched: a flat curve is clinically meaningful
    (severe hypomimia) and must not yield fabricated stages.
    """


class MissingStageError(KeyError):
    pass


@dataclass(frozen=True)
class ValenceCurve:
    t: np.ndarray  # frame indices, strictly increasing
    v: np.ndarray  # valence per frame, in [-1, 1]
    frame_rate: float = 30.0

    def __post_init__(self):
        t = np.asarray(self.t)
        v = np.asarray(self.v, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        if len(t) != len(v):
            raise ValueError("t and v lengths differ")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("frame indices must be strictly increasing")
        if not np.isfinite(v).all():
            raise ValueError("valence values must be finite")


@dataclass(frozen=True)
class StageIndices:
    neutral_pre: int
    onset: int
    apex: int
    offset: int
    neutral_post: int

    def __post_init__(self):
        seq = self.as_tuple()
        if not all(a <= b for a, b in zip(seq, seq[1:])):
            raise ValueError(f"stage ordering violated: {seq}")

    def as_tuple(self):
        return (self.neutral_pre, self.onset, self.apex,
                self.offset, self.neutral_post)

    def as_dict(self):
        return dict(zip(STAGES, self.as_tuple()))


@dataclass(frozen=True)
class SequenceSpec:
    """Single(stage) or one of the multi-frame variants."""

    variant: str            # "single" | "NOnA" | "AOffN" | "NOnAOffN"
    stage: str | None = None

    def __post_init__(self):
        if self.variant == "single":
            if self.stage not in SINGLE_STAGES:
                raise ValueError(f"single stage must be one of {SINGLE_STAGES}")
        elif self.variant not in SEQUENCE_VARIANTS:
            raise ValueError(f"unknown sequence variant {self.variant!r}")

    @classmethod
    def parse(cls, text: str) -> "SequenceSpec":
        if text in SEQUENCE_VARIANTS:
            return cls(text)
        return cls("single", text)

    def stages(self) -> tuple[str, ...]:
        if self.variant == "single":
            # "neutral" as a single-frame choice means the leading neutral.
            return ("neutral_pre" if self.stage == "neutral" else self.stage,)
        return tuple(SEQUENCE_VARIANTS[self.variant])

    @property
    def name(self) -> str:
        return self.stage if self.variant == "single" else self.variant


@dataclass(frozen=True)
class StageParams:
    min_amplitude: float = 0.1
    half_fraction: float = 0.5     # onset/offset threshold as a share of apex
    neutral_fraction: float = 0.1  # neutral threshold as a share of apex


def detect_stages(curve: ValenceCurve, params: StageParams | None = None) -> StageIndices:
    """Locate the five expression stages on the magnitude of the curve.

    apex: earliest global maximum of |v|.  onset: last frame before the apex
    at or below half the apex amplitude; offset: first such frame after it.
    The neutrals are the nearest frames before the onset / after the offset
    at or below a tenth of the apex amplitude, falling back to the curve
    endpoints.  Plateau ties break toward the earliest qualifying frame.
    """
    params = params or StageParams()
    mag = np.abs(curve.v)
    if len(mag) < 5:
        raise ValueError("curve too short for stage detection")
    apex = int(np.argmax(mag))
    amp = mag[apex]
    if amp < params.min_amplitude:
        raise FlatExpressionError(
            f"apex amplitude {amp:.4f} below minimum {params.min_amplitude}"
        )
    half = params.half_fraction * amp
    low = params.neutral_fraction * amp

    before = np.nonzero(mag[:apex] <= half)[0]
    onset = int(before[-1]) if len(before) else 0
    after = np.nonzero(mag[apex + 1:] <= half)[0]
    offset = int(after[0]) + apex + 1 if len(after) else len(mag) - 1

    pre = np.nonzero(mag[:onset] <= low)[0]
    neutral_pre = int(pre[-1]) if len(pre) else 0
    post = np.nonzero(mag[offset + 1:] <= low)[0]
    neutral_post = int(post[0]) + offset + 1 if len(post) else len(mag) - 1

    return StageIndices(neutral_pre, onset, apex, offset, neutral_post)


def assemble_sequence(stage_features: dict[str, np.ndarray],
                      spec: SequenceSpec) -> np.ndarray:
    """Concatenate per-stage feature vectors in the spec's stage order."""
    parts = []
    dim = None
    for stage in spec.stages():
        if stage not in stage_features:
            raise MissingStageError(f"stage {stage!r} missing from features")
        vec = np.asarray(stage_features[stage], dtype=float).ravel()
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ValueError(
                f"stage {stage!r} has dimension {vec.shape[0]}, expected {dim}"
            )
        parts.append(vec)
    return np.concatenate(parts)


# -- file interfaces ----------------------------------------------------------

def load_valence_csv(path, frame_rate: float = 30.0) -> ValenceCurve:
    frames, values = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                {"frame_index", "valence"} - set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns frame_index,valence")
        for row in reader:
            frames.append(int(row["frame_index"]))
            values.append(float(row["valence"]))
    return ValenceCurve(np.array(frames), np.array(values), frame_rate)


def save_valence_csv(path, curve: ValenceCurve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("frame_index,valence\n")
        for t, v in zip(curve.t, curve.v):
            fh.write(f"{int(t)},{v!r}\n")


def write_stage_manifest(path, stages: dict[str, StageIndices]) -> None:
    rows = [dict(video_id=vid, **s.as_dict()) for vid, s in sorted(stages.items())]
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2)


def read_stage_manifest(path) -> dict[str, StageIndices]:
    with open(path) as fh:
        rows = json.load(fh)
    return {
        row["video_id"]: StageIndices(*[int(row[s]) for s in STAGES])
        for row in rows
    }
