"""
Defenses against the bone-length attack: adversarial training and random
rotation augmentation. Both plug into classifier.train through its batch
transform hook, so the shuffling and optimizer trajectory are shared with
clean training.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from models.attack import AttackConfig, Termination
from models.skeleton import MotionSample, SkeletonTopology
from services.attack_engine import attack, attack_batch
from services.classifier import ReferenceClassifier, TrainConfig, TrainingOutcome, train
from services.reparam import bone_lengths
from utils.error_handling import NonFiniteGradientError, error_handler
from utils.seeding import make_rng
from utils.validation import range_validator

logger = logging.getLogger(__name__)

ROTATION_MODES = ("yaw_only", "full_3d")


@dataclass
class AugmentConfig:
    """Random rotation augmentation settings."""

    max_yaw_radians: float = math.pi / 6
    mode: str = "yaw_only"
    probability: float = 1.0
    seed: int = 0

    def __post_init__(self):
        range_validator.require_range(self.max_yaw_radians, "max_yaw_radians", 0.0, math.pi)
        range_validator.require_choice(self.mode, "mode", ROTATION_MODES)
        range_validator.require_range(self.probability, "probability", 0.0, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_yaw_radians": self.max_yaw_radians,
            "mode": self.mode,
            "probability": self.probability,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AugmentConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


def _default_inner_attack() -> AttackConfig:
    return AttackConfig(epsilon=0.1, max_iters=10, termination=Termination.FULL_RUN)


@dataclass
class AdvTrainConfig:
    """Adversarial training settings: inner attack, batch mix and outer training."""

    attack: AttackConfig = field(default_factory=_default_inner_attack)
    mix_ratio: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    monitor_validation: bool = False
    workers: int = 1

    def __post_init__(self):
        range_validator.require_range(self.mix_ratio, "mix_ratio", 0.0, 1.0)
        range_validator.require_positive_int(self.workers, "workers")
        if self.attack.termination != Termination.FULL_RUN:
            logger.warning(
                "Inner attack termination overridden to full_run for adversarial training"
            )
            self.attack = self.attack.evolve(termination=Termination.FULL_RUN)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "attack": self.attack.to_dict(),
            "mix_ratio": self.mix_ratio,
            "train": self.train.to_dict(),
            "monitor_validation": self.monitor_validation,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AdvTrainConfig":
        return cls(
            attack=AttackConfig.from_dict(data.get("attack", _default_inner_attack().to_dict())),
            mix_ratio=float(data.get("mix_ratio", 1.0)),
            train=TrainConfig.from_dict(data.get("train", {})),
            monitor_validation=bool(data.get("monitor_validation", False)),
            workers=int(data.get("workers", 1)),
        )


def _yaw_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def rotation_matrix(config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw one rotation: angle uniform in [-theta, theta], axis per mode."""
    angle = rng.uniform(-config.max_yaw_radians, config.max_yaw_radians)
    if config.mode == "yaw_only":
        return _yaw_matrix(angle)
    axis = rng.normal(size=3)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        return _yaw_matrix(angle)
    return _axis_angle_matrix(axis / norm, angle)


def rotate_motion(motion: MotionSample, rotation: np.ndarray, root: int = 0) -> MotionSample:
    """Apply ``rotation`` to every valid frame about the first frame's root position."""
    valid = motion.valid_frames
    if valid == 0:
        return motion
    center = motion.coords[0, root]
    out = np.zeros_like(motion.coords)
    out[:valid] = (motion.coords[:valid] - center) @ rotation.T + center
    return motion.with_coords(out)


def augment_rotate(
    motion: MotionSample, config: AugmentConfig, rng: np.random.Generator, root: int = 0
) -> MotionSample:
    """
    Randomly rotate one motion.

    With probability 1 - ``config.probability`` the motion is returned as is.
    A zero angle bound returns the motion unchanged without drawing.
    """
    if config.max_yaw_radians == 0.0 or config.probability == 0.0:
        return motion
    if config.probability < 1.0 and rng.uniform() >= config.probability:
        return motion
    return rotate_motion(motion, rotation_matrix(config, rng), root=root)


def max_bone_length_change(
    before: MotionSample, after: MotionSample, topo: SkeletonTopology
) -> float:
    """Largest absolute bone-length difference over all valid frames."""
    valid = min(before.valid_frames, after.valid_frames)
    if valid == 0 or topo.bone_count == 0:
        return 0.0
    delta = bone_lengths(before, topo)[:valid] - bone_lengths(after, topo)[:valid]
    return float(np.max(np.abs(delta)))


def train_with_augmentation(
    model: ReferenceClassifier,
    train_set: Sequence[MotionSample],
    val_set: Sequence[MotionSample],
    augment: AugmentConfig,
    train_config: TrainConfig,
    root: int = 0,
) -> TrainingOutcome:
    """classifier.train with a fresh random rotation per sample per batch."""
    rng = make_rng(augment.seed, "augment", "rotate")

    def rotate_batch(current, batch: List[MotionSample], epoch: int) -> List[MotionSample]:
        return [augment_rotate(s, augment, rng, root=root) for s in batch]

    logger.info(
        f"Training with {augment.mode} rotation augmentation "
        f"(theta={augment.max_yaw_radians:.3f}, p={augment.probability})"
    )
    return train(model, train_set, val_set, train_config, batch_transform=rotate_batch)


def adversarial_train(
    model: ReferenceClassifier,
    train_set: Sequence[MotionSample],
    val_set: Sequence[MotionSample],
    topo: SkeletonTopology,
    config: AdvTrainConfig,
    keep_parameter_history: bool = False,
) -> TrainingOutcome:
    """
    Adversarial training against the bone-length attack.

    In every batch round(mix_ratio * n) samples, chosen by a dedicated
    generator, are replaced by full-run attack outputs against the current
    model. With ``monitor_validation`` the epoch history also records the
    attack success rate on the validation set.

    A sample whose attack gradient turns non-finite stays clean in its batch;
    the failure is logged as a warning through error_handler.

    Raises:
        NonFiniteLossError: if training diverges
    """
    attack_config = config.attack
    mix_rng = make_rng(config.train.seed, "advtrain", "mix")

    def _perturb(current: ReferenceClassifier, sample: MotionSample) -> MotionSample:
        try:
            return attack(current, sample, topo, attack_config).adversarial_motion
        except NonFiniteGradientError as e:
            error_handler.handle_error(
                e, context={"stage": "adversarial_train"}, log_level=logging.WARNING
            )
            return sample

    def adversarial_batch(current, batch: List[MotionSample], epoch: int) -> List[MotionSample]:
        n = len(batch)
        k = int(math.floor(config.mix_ratio * n + 0.5))
        if k == 0:
            return batch
        chosen = list(range(n)) if k == n else sorted(mix_rng.choice(n, size=k, replace=False))

        targets = [batch[i] for i in chosen]
        if config.workers > 1 and k > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                perturbed = list(pool.map(lambda s: _perturb(current, s), targets))
        else:
            perturbed = [_perturb(current, s) for s in targets]

        mixed = list(batch)
        for i, sample in zip(chosen, perturbed):
            mixed[i] = sample
        return mixed

    epoch_callback = None
    if config.monitor_validation and val_set:

        def epoch_callback(current: ReferenceClassifier, epoch: int) -> Dict[str, float]:
            report = attack_batch(current, val_set, topo, attack_config)
            return {"adv_val_success_rate": report.success_rate()}

    logger.info(
        f"Adversarial training: eps={attack_config.epsilon}, "
        f"inner iters={attack_config.max_iters}, mix={config.mix_ratio}"
    )
    return train(
        model,
        train_set,
        val_set,
        config.train,
        batch_transform=adversarial_batch,
        epoch_callback=epoch_callback,
        keep_parameter_history=keep_parameter_history,
    )


def describe_history(outcome: TrainingOutcome) -> Optional[str]:
    """One-line summary of the best epoch, or None if nothing was trained."""
    if not outcome.history:
        return None
    best = next(r for r in outcome.history if r.epoch == outcome.best_epoch)
    return (
        f"best epoch {best.epoch}: val_acc={best.val_accuracy:.3f} "
        f"train_acc={best.train_accuracy:.3f}"
    )
