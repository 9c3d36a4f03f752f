"""Classifier surrogate producing per-observation pose distributions.

Replaces a learned detector/classifier stack with a deterministic pipeline:
noisy silhouette observations -> moment features -> Gaussian naive Bayes.
The moments are translation- and scale-normalized but deliberately
rotation-VARIANT: poses on the track differ by wall yaw, so rotation
invariants would erase exactly the signal that separates them. What remains
hard to separate are silhouettes that are identical or near-mirror-images,
which is the structured confusion the downstream pose-reduction consumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshError, RecordError
from .geometry import BinaryMask, Rotation, TriMesh, render_silhouette
from .stable_poses import PoseSet, StablePose


@dataclass(frozen=True)
class ObservationConfig:
    resolution: int = 96
    pixels_per_meter: float = 64.0
    yaw_jitter_std: float = 0.03  # radians
    translation_jitter_std: float = 0.01  # meters
    pixel_flip_rate: float = 0.01
    samples_per_pose: int = 40
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.pixel_flip_rate <= 0.2:
            raise ValueError("pixel_flip_rate must be in [0, 0.2]")
        if self.samples_per_pose < 10:
            raise ValueError("samples_per_pose must be >= 10")
        if self.resolution < 16:
            raise ValueError("resolution must be >= 16")
        if self.yaw_jitter_std < 0 or self.translation_jitter_std < 0:
            raise ValueError("jitter deviations must be non-negative")


@dataclass(frozen=True)
class FeatureVector:
    """Silhouette shape descriptor: pixel area, normalized central moments
    (eta_pq = mu_pq / mu00^(1+(p+q)/2)) and the bounding-box aspect ratio."""

    area: float
    eta20: float
    eta11: float
    eta02: float
    eta30: float
    eta21: float
    eta12: float
    eta03: float
    aspect: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.area, self.eta20, self.eta11, self.eta02,
             self.eta30, self.eta21, self.eta12, self.eta03, self.aspect]
        )


FEATURE_DIM = 9


@dataclass(frozen=True)
class ClassificationRecord:
    """One observation: ground-truth pose id and the estimated distribution
    over pose ids (dist[i] is the probability of pose id i+1)."""

    part_id: str
    true_pose: int
    dist: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 1 or len(d) == 0 or not np.all(np.isfinite(d)):
            raise RecordError("dist must be a finite 1-d probability vector")
        if d.min() < 0:
            raise RecordError("dist entries must be non-negative")
        if abs(float(d.sum()) - 1.0) > 1e-6:
            raise RecordError(f"dist sums to {float(d.sum())!r}, expected 1")
        if not 1 <= self.true_pose <= len(d):
            raise RecordError(f"true_pose {self.true_pose} outside 1..{len(d)}")
        object.__setattr__(self, "dist", d)


@dataclass(frozen=True)
class ClassifierModel:
    """Gaussian naive Bayes over silhouette features, one class per pose.

    The variance is shared across classes (pooled within-class, one value
    per feature dimension, floored). Per-class variances would let sampling
    luck manufacture confidence between visually identical poses.
    """

    pose_ids: tuple[int, ...]
    means: np.ndarray  # (C, D)
    variances: np.ndarray  # (D,), pooled within-class, floored
    log_priors: np.ndarray  # (C,)

    def to_json(self) -> str:
        return json.dumps(
            {
                "pose_ids": list(self.pose_ids),
                "means": self.means.tolist(),
                "variances": self.variances.tolist(),
                "log_priors": self.log_priors.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ClassifierModel":
        data = json.loads(text)
        return cls(
            pose_ids=tuple(int(i) for i in data["pose_ids"]),
            means=np.array(data["means"], dtype=float),
            variances=np.array(data["variances"], dtype=float),
            log_priors=np.array(data["log_priors"], dtype=float),
        )


# ---------------------------------------------------------------------------
# Observation generation
# ---------------------------------------------------------------------------

def generate_observation(
    mesh: TriMesh,
    pose: StablePose,
    cfg: ObservationConfig,
    sample_index: int,
) -> BinaryMask:
    """Render the pose with yaw/translation jitter and pixel flip noise.

    Deterministic given (cfg.seed, pose.id, sample_index); the jitter is
    resampled up to 10 times if it pushes the part out of frame.
    """
    rng = np.random.default_rng([cfg.seed, pose.id, sample_index])
    for _ in range(10):
        yaw = rng.normal(0.0, cfg.yaw_jitter_std) if cfg.yaw_jitter_std > 0 else 0.0
        shift = (
            rng.normal(0.0, cfg.translation_jitter_std, size=2)
            if cfg.translation_jitter_std > 0
            else np.zeros(2)
        )
        q = Rotation.from_axis_angle([0.0, 0.0, 1.0], yaw) * pose.representative
        world = q.apply(mesh.vertices)
        center = -(world.max(axis=0) + world.min(axis=0)) / 2.0
        offset = (center[0] + shift[0], center[1] + shift[1], 0.0)
        try:
            mask = render_silhouette(mesh, q, offset, cfg.resolution, cfg.pixels_per_meter)
        except MeshError:
            continue
        if cfg.pixel_flip_rate > 0.0:
            flips = rng.random(mask.bits.shape) < cfg.pixel_flip_rate
            mask = BinaryMask(mask.width, mask.height, mask.bits ^ flips)
        return mask
    raise MeshError(
        f"observation for pose {pose.id} sample {sample_index} stayed out of frame "
        "after 10 jitter draws"
    )


def extract_features(mask: BinaryMask) -> FeatureVector:
    """Normalized central moments plus area and bounding-box aspect."""
    ys, xs = np.nonzero(mask.bits)
    n = len(xs)
    if n == 0:
        raise ValueError("cannot extract features from an empty mask")
    x = xs.astype(float)
    y = ys.astype(float)
    dx = x - x.mean()
    dy = y - y.mean()

    def mu(p: int, q: int) -> float:
        return float(np.sum(dx**p * dy**q))

    def eta(p: int, q: int) -> float:
        return mu(p, q) / n ** (1.0 + (p + q) / 2.0)

    aspect = (x.max() - x.min() + 1.0) / (y.max() - y.min() + 1.0)
    return FeatureVector(
        area=float(n),
        eta20=eta(2, 0), eta11=eta(1, 1), eta02=eta(0, 2),
        eta30=eta(3, 0), eta21=eta(2, 1), eta12=eta(1, 2), eta03=eta(0, 3),
        aspect=float(aspect),
    )


# ---------------------------------------------------------------------------
# Gaussian naive Bayes
# ---------------------------------------------------------------------------

def train_classifier(features_by_pose, priors) -> ClassifierModel:
    """Fit per-class feature means and a pooled per-dimension variance.

    `features_by_pose` maps pose id -> sequence of FeatureVector (>= 10 per
    pose); `priors` maps pose id -> prior probability. The variance is
    floored at max(1e-8, 1e-3 * global feature variance) per dimension.
    """
    pose_ids = tuple(sorted(features_by_pose))
    if not pose_ids:
        raise ValueError("no classes to train on")
    for pid in priors:
        if pid not in features_by_pose:
            raise ValueError(f"missing feature samples for pose {pid}")
    rows = []
    for pid in pose_ids:
        if pid not in priors:
            raise ValueError(f"missing prior for pose {pid}")
        feats = list(features_by_pose[pid])
        if len(feats) < 10:
            raise ValueError(f"pose {pid} has {len(feats)} samples, need >= 10")
        rows.append(np.array([f.as_array() for f in feats]))
    means = np.array([r.mean(axis=0) for r in rows])
    counts = np.array([len(r) for r in rows], dtype=float)
    within = np.array([r.var(axis=0) for r in rows])
    variances = (counts[:, None] * within).sum(axis=0) / counts.sum()
    pooled = np.concatenate(rows, axis=0)
    floor = np.maximum(1e-8, 1e-3 * pooled.var(axis=0))
    variances = np.maximum(variances, floor)
    log_priors = np.log(np.maximum(np.array([float(priors[p]) for p in pose_ids]), 1e-300))
    return ClassifierModel(
        pose_ids=pose_ids, means=means, variances=variances, log_priors=log_priors
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def classify(model: ClassifierModel, feature: FeatureVector) -> np.ndarray:
    """Posterior over pose classes (ordered like model.pose_ids); sums to 1."""
    x = feature.as_array()
    if x.shape[0] != model.means.shape[1]:
        raise ValueError("feature dimension does not match the model")
    diff = x[None, :] - model.means
    loglik = -0.5 * np.sum(
        np.log(2.0 * math.pi * model.variances)[None, :] + diff**2 / model.variances[None, :],
        axis=1,
    )
    return _softmax(loglik + model.log_priors)


# ---------------------------------------------------------------------------
# Dataset generation and record IO
# ---------------------------------------------------------------------------

def generate_dataset(mesh: TriMesh, poses: PoseSet, cfg: ObservationConfig) -> list[ClassificationRecord]:
    """Per pose: render samples, train on the first half, emit held-out
    classification records for the second half. Deterministic per cfg.seed."""
    if cfg.samples_per_pose < 20:
        raise ValueError(
            "samples_per_pose must be >= 20 so the train half has >= 10 samples per pose"
        )
    half = cfg.samples_per_pose // 2
    train_feats: dict[int, list[FeatureVector]] = {}
    eval_feats: dict[int, list[FeatureVector]] = {}
    for pose in poses.poses:
        feats = [
            extract_features(generate_observation(mesh, pose, cfg, i))
            for i in range(cfg.samples_per_pose)
        ]
        train_feats[pose.id] = feats[:half]
        eval_feats[pose.id] = feats[half:]
    model = train_classifier(train_feats, {p.id: p.prior for p in poses.poses})
    records = []
    for pose in poses.poses:
        for f in eval_feats[pose.id]:
            records.append(
                ClassificationRecord(
                    part_id=poses.part_id, true_pose=pose.id, dist=classify(model, f)
                )
            )
    return records


def records_to_jsonl(records) -> bytes:
    """Serialize records as UTF-8 JSONL, one object per line."""
    lines = [
        json.dumps(
            {"part": r.part_id, "true_pose": r.true_pose, "dist": list(map(float, r.dist))},
            sort_keys=True,
        )
        for r in records
    ]
    return ("\n".join(lines) + ("\n" if lines else "")).encode()


def load_records(data: bytes) -> list[ClassificationRecord]:
    """Parse and validate JSONL classification records.

    Each line holds {"part": str, "true_pose": int, "dist": [...]}; dist is
    renormalized when its sum is within 1e-6 of 1 and rejected otherwise.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RecordError(f"records are not valid UTF-8: {exc}") from exc
    records: list[ClassificationRecord] = []
    expected_len: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        try:
            part = str(obj["part"])
            true_pose = int(obj["true_pose"])
            dist = np.array(obj["dist"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(f"line {lineno}: malformed record ({exc})") from exc
        if expected_len is None:
            expected_len = len(dist)
        elif len(dist) != expected_len:
            raise RecordError(
                f"line {lineno}: dist length {len(dist)} != {expected_len} from first record"
            )
        if dist.min() < 0:
            raise RecordError(f"line {lineno}: negative probability")
        total = float(dist.sum())
        if abs(total - 1.0) > 1e-6:
            raise RecordError(f"line {lineno}: dist sums to {total!r}")
        try:
            records.append(
                ClassificationRecord(part_id=part, true_pose=true_pose, dist=dist / total)
            )
        except RecordError as exc:
            raise RecordError(f"line {lineno}: {exc}") from exc
    return records
