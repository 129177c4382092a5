"""
Preprocessing pipeline for motion datasets.

Order: label remap -> Savitzky-Golay smoothing -> origin translation ->
normalization statistics fitted on train+val -> normalize every split ->
frame subsampling -> zero-padding to a common length.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import savgol_filter

from config import config as app_config
from models.skeleton import MotionSample, SkeletonTopology
from utils.error_handling import (
    ApplicationError,
    EmptyDatasetError,
    NotChildOfRootError,
    PreprocessError,
    TargetTooSmallError,
    TooFewFramesError,
    ValidationError,
)
from utils.validation import array_validator, range_validator

logger = logging.getLogger(__name__)

SAVGOL_WINDOW = 5
SAVGOL_ORDER = 3
SPLIT_NAMES = ("train", "val", "test")


@dataclass
class NormalizationStats:
    """Per-joint, per-axis mean and floored standard deviation."""

    mu: np.ndarray
    sigma: np.ndarray
    floor: float = 1e-6
    split_ids: List[str] = field(default_factory=list)
    floored_channels: int = 0

    def __post_init__(self):
        self.mu = np.array(array_validator.as_float_array(self.mu, "mu"))
        self.sigma = np.array(array_validator.as_float_array(self.sigma, "sigma"))
        array_validator.require_shape(self.mu, (None, 3), "mu")
        array_validator.require_shape(self.sigma, self.mu.shape, "sigma")
        array_validator.require_finite(self.mu, "mu")
        array_validator.require_finite(self.sigma, "sigma")
        if np.any(self.sigma <= 0.0):
            raise ValidationError(message="sigma must be strictly positive", field="sigma")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "floor": self.floor,
            "split_ids": list(self.split_ids),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NormalizationStats":
        return cls(
            mu=data["mu"],
            sigma=data["sigma"],
            floor=float(data.get("floor", 1e-6)),
            split_ids=list(data.get("split_ids", [])),
        )


@dataclass
class PreprocessConfig:
    """Pipeline settings."""

    hip_left: int = 12
    hip_right: int = 16
    interval: int = app_config.SUBSAMPLE_INTERVAL
    target_frames: Optional[int] = None
    sigma_floor: float = app_config.SIGMA_FLOOR
    label_remap: Optional[Dict[int, int]] = None
    smooth: bool = True

    def __post_init__(self):
        range_validator.require_positive_int(self.interval, "interval")
        if self.target_frames is not None:
            range_validator.require_positive_int(self.target_frames, "target_frames")
        range_validator.require_range(self.sigma_floor, "sigma_floor", 0.0, None, closed=(False, True))
        if self.label_remap is not None:
            self.label_remap = {int(k): int(v) for k, v in self.label_remap.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hip_left": self.hip_left,
            "hip_right": self.hip_right,
            "interval": self.interval,
            "target_frames": self.target_frames,
            "sigma_floor": self.sigma_floor,
            "label_remap": self.label_remap,
            "smooth": self.smooth,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PreprocessConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


def savitzky_golay(motion: MotionSample) -> MotionSample:
    """
    Five-point smoothing of the valid frames.

    Interior frames 2..V-3 are replaced by the window-5 cubic filter of the
    unfiltered input; the first two and last two valid frames pass through.

    Raises:
        TooFewFramesError: if fewer than 5 valid frames
    """
    valid = motion.valid_frames
    if valid < 5:
        raise TooFewFramesError(
            message=f"Savitzky-Golay needs at least 5 valid frames, got {valid}",
            context={"sample_id": motion.sample_id},
        )
    source = motion.coords[:valid]
    out = np.array(motion.coords, copy=True)
    smoothed = savgol_filter(source, SAVGOL_WINDOW, SAVGOL_ORDER, axis=0)
    out[2 : valid - 2] = smoothed[2 : valid - 2]
    return motion.with_coords(out)


def translate_to_origin(
    motion: MotionSample, topo: SkeletonTopology, hip_left: int, hip_right: int
) -> MotionSample:
    """
    Shift every valid frame so the mean of the root and both hips is the origin.

    Raises:
        NotChildOfRootError: if either hip is not a child of the root
    """
    motion.check_topology(topo)
    for hip in (hip_left, hip_right):
        topo.check_joint(hip)
        if topo.parent(hip) != topo.root:
            raise NotChildOfRootError(
                message=f"Joint {hip} is not a child of root {topo.root}", joint=hip
            )
    valid = motion.valid_frames
    frames = motion.coords[:valid]
    origin = (frames[:, topo.root] + frames[:, hip_left] + frames[:, hip_right]) / 3.0
    out = np.array(motion.coords, copy=True)
    out[:valid] = frames - origin[:, None, :]
    return motion.with_coords(out)


def fit_normalization(
    samples: Sequence[MotionSample], floor: float = 1e-6, split_ids: Optional[List[str]] = None
) -> NormalizationStats:
    """
    Pooled mean and population std over every valid frame of every sample.

    Channels whose std falls below ``floor`` get sigma = 1.

    Raises:
        EmptyDatasetError: if there are no samples or no valid frames
    """
    frames = [s.valid_coords for s in samples if s.valid_frames > 0]
    if not frames:
        raise EmptyDatasetError(message="Cannot fit normalization statistics on no frames")
    pooled = np.concatenate(frames, axis=0)
    mu = pooled.mean(axis=0)
    sigma = np.sqrt(np.mean((pooled - mu) ** 2, axis=0))

    small = sigma < floor
    if np.any(small):
        logger.warning(f"{int(small.sum())} channels have sigma below {floor}; using 1.0")
    sigma = np.where(small, 1.0, sigma)
    return NormalizationStats(
        mu=mu,
        sigma=sigma,
        floor=floor,
        split_ids=list(split_ids or []),
        floored_channels=int(small.sum()),
    )


def normalize(motion: MotionSample, stats: NormalizationStats) -> MotionSample:
    """(q - mu) / sigma entrywise on the valid frames."""
    valid = motion.valid_frames
    out = np.array(motion.coords, copy=True)
    out[:valid] = (motion.coords[:valid] - stats.mu) / stats.sigma
    return motion.with_coords(out)


def denormalize(motion: MotionSample, stats: NormalizationStats) -> MotionSample:
    """Inverse of normalize."""
    valid = motion.valid_frames
    out = np.array(motion.coords, copy=True)
    out[:valid] = motion.coords[:valid] * stats.sigma + stats.mu
    return motion.with_coords(out)


def subsample_and_pad(motion: MotionSample, interval: int, target_frames: int) -> MotionSample:
    """
    Keep frames 0, interval, 2*interval, ... and zero-pad to ``target_frames``.

    Raises:
        TargetTooSmallError: if the kept frames do not fit in ``target_frames``
    """
    range_validator.require_positive_int(interval, "interval")
    kept = motion.coords[: motion.valid_frames : interval]
    count = kept.shape[0]
    if target_frames < count:
        raise TargetTooSmallError(
            message=f"target_frames={target_frames} < {count} kept frames",
            context={"sample_id": motion.sample_id},
        )
    out = np.zeros((target_frames, motion.joint_count, 3))
    out[:count] = kept
    return motion.with_coords(out, valid_frames=count)


def remap_labels(samples: Sequence[MotionSample], remap: Optional[Mapping[int, int]]) -> List[MotionSample]:
    """Apply an old-class -> new-class map; labels absent from the map are kept."""
    if not remap:
        return list(samples)
    return [replace(s, label=remap.get(s.label, s.label)) for s in samples]


def check_splits(dataset: Sequence[MotionSample], splits: Mapping[str, Sequence[str]]):
    """
    Raise ValidationError unless the split id lists partition the dataset ids.
    """
    ids = [s.sample_id for s in dataset]
    if None in ids or len(set(ids)) != len(ids):
        raise ValidationError(message="Every sample needs a unique sample_id", field="sample_id")
    unknown = set(splits) - set(SPLIT_NAMES)
    if unknown:
        raise ValidationError(message=f"Unknown split names: {sorted(unknown)}", field="splits")

    seen: Dict[str, str] = {}
    for name, members in splits.items():
        for sid in members:
            if sid in seen:
                raise ValidationError(
                    message=f"Sample {sid} is in both '{seen[sid]}' and '{name}'", field="splits"
                )
            seen[sid] = name
    missing = set(ids) - set(seen)
    extra = set(seen) - set(ids)
    if missing or extra:
        raise ValidationError(
            message=f"Splits do not partition the dataset: {len(missing)} unassigned, "
            f"{len(extra)} unknown ids",
            field="splits",
        )


def _per_sample(samples: Sequence[MotionSample], fn, failures: List[Tuple[str, str]]):
    out = []
    for sample in samples:
        try:
            out.append(fn(sample))
        except ApplicationError as e:
            failures.append((sample.sample_id or "?", e.message))
    return out


def preprocess_pipeline(
    dataset: Sequence[MotionSample],
    splits: Mapping[str, Sequence[str]],
    topo: SkeletonTopology,
    config: PreprocessConfig,
) -> Tuple[Dict[str, List[MotionSample]], NormalizationStats]:
    """
    Run the full pipeline and return processed splits plus the fitted stats.

    Statistics come from train+val only and are applied to every split.
    Padding targets ``config.target_frames`` or, if unset, the longest
    subsampled sequence.

    Raises:
        ValidationError: if the splits do not partition the dataset
        PreprocessError: listing every sample that failed a per-sample step
        EmptyDatasetError: if train+val hold no frames
    """
    check_splits(dataset, splits)
    samples = remap_labels(dataset, config.label_remap)
    failures: List[Tuple[str, str]] = []

    if config.smooth:
        samples = _per_sample(samples, savitzky_golay, failures)
    samples = _per_sample(
        samples,
        lambda s: translate_to_origin(s, topo, config.hip_left, config.hip_right),
        failures,
    )
    if failures:
        raise PreprocessError(
            message=f"{len(failures)} samples failed preprocessing", failures=failures
        )

    by_id = {s.sample_id: s for s in samples}
    fit_ids = [sid for name in ("train", "val") for sid in splits.get(name, [])]
    stats = fit_normalization(
        [by_id[sid] for sid in fit_ids], floor=config.sigma_floor, split_ids=fit_ids
    )
    samples = [normalize(s, stats) for s in samples]

    target = config.target_frames
    if target is None:
        target = max((math.ceil(s.valid_frames / config.interval) for s in samples), default=1)
        target = max(target, 1)
    samples = _per_sample(
        samples, lambda s: subsample_and_pad(s, config.interval, target), failures
    )
    if failures:
        raise PreprocessError(
            message=f"{len(failures)} samples failed preprocessing", failures=failures
        )

    by_id = {s.sample_id: s for s in samples}
    processed = {name: [by_id[sid] for sid in splits.get(name, [])] for name in SPLIT_NAMES}
    logger.info(
        "Preprocessed "
        + ", ".join(f"{name}={len(processed[name])}" for name in SPLIT_NAMES)
        + f" samples to {target} frames"
    )
    return processed, stats
