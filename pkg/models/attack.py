"""
Data models for the bone-length attack.
Contains BoneScaleVector, AttackConfig and AttackResult.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, FrozenSet, Optional

import numpy as np

from config import config
from models.skeleton import MotionSample
from utils.error_handling import ConfigurationError, ValidationError
from utils.validation import array_validator, range_validator


class OptimizerKind(Enum):
    """Update rule used by the attack."""

    PGD_SIGN = "pgd"
    ADAM = "adam"


class Termination(Enum):
    """When the attack loop stops."""

    EARLY_STOP = "es"
    FULL_RUN = "fr"


@dataclass
class BoneScaleVector:
    """Per-bone length ratios beta with an L-infinity radius epsilon around 1."""

    beta: np.ndarray
    epsilon: float

    def __post_init__(self):
        beta = np.array(array_validator.as_float_array(self.beta, "beta"), dtype=np.float64)
        array_validator.require_shape(beta, (None,), "beta")
        array_validator.require_finite(beta, "beta")
        range_validator.require_range(
            float(self.epsilon), "epsilon", 0.0, 1.0, closed=(True, False)
        )
        beta.setflags(write=False)
        self.beta = beta
        self.epsilon = float(self.epsilon)

    @classmethod
    def ones(cls, bone_count: int, epsilon: float) -> "BoneScaleVector":
        """The unperturbed center beta = 1."""
        return cls(beta=np.ones(bone_count), epsilon=epsilon)

    @property
    def bone_count(self) -> int:
        return int(self.beta.shape[0])

    @property
    def lower(self) -> float:
        return 1.0 - self.epsilon

    @property
    def upper(self) -> float:
        return 1.0 + self.epsilon

    def deviation(self) -> float:
        """L-infinity distance from the all-ones center."""
        if self.bone_count == 0:
            return 0.0
        return float(np.max(np.abs(self.beta - 1.0)))

    def with_beta(self, beta: np.ndarray) -> "BoneScaleVector":
        return BoneScaleVector(beta=beta, epsilon=self.epsilon)

    def to_list(self) -> list:
        return self.beta.tolist()


@dataclass
class AttackConfig:
    """Optimizer settings of one bone-length attack."""

    epsilon: float = 0.1
    step_size: float = config.STEP_SIZE
    max_iters: int = config.MAX_ITERS
    optimizer: OptimizerKind = OptimizerKind.PGD_SIGN
    termination: Termination = Termination.EARLY_STOP
    bone_mask: Optional[FrozenSet[int]] = None
    adam_lr: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        """Validate the attack configuration."""
        if isinstance(self.optimizer, str):
            self.optimizer = OptimizerKind(self.optimizer)
        if isinstance(self.termination, str):
            self.termination = Termination(self.termination)

        # epsilon = 0 is accepted: a point box keeps beta at 1
        range_validator.require_range(
            self.epsilon, "epsilon", 0.0, 1.0, closed=(True, False)
        )
        range_validator.require_range(
            self.step_size, "step_size", 0.0, None, closed=(False, True)
        )
        range_validator.require_positive_int(self.max_iters, "max_iters")
        range_validator.require_range(self.adam_lr, "adam_lr", 0.0, None, closed=(False, True))
        range_validator.require_range(self.adam_beta1, "adam_beta1", 0.0, 1.0, closed=(True, False))
        range_validator.require_range(self.adam_beta2, "adam_beta2", 0.0, 1.0, closed=(True, False))
        range_validator.require_range(self.adam_eps, "adam_eps", 0.0, None, closed=(False, True))

        if self.bone_mask is not None:
            self.bone_mask = frozenset(int(b) for b in self.bone_mask)
            if not self.bone_mask:
                raise ConfigurationError(
                    message="bone_mask is empty; the attack could never perturb a bone",
                    recovery_suggestions=["Omit the mask or name at least one bone"],
                )
            if min(self.bone_mask) < 0:
                raise ConfigurationError(message="bone_mask holds negative bone ids")

    def check_bone_count(self, bone_count: int):
        """Raise ConfigurationError if the mask names bones the skeleton lacks."""
        if self.bone_mask is not None and max(self.bone_mask) > bone_count - 1:
            raise ConfigurationError(
                message=f"bone_mask names bone {max(self.bone_mask)} but skeleton has "
                f"bones [0, {bone_count - 1}]"
            )

    def mask_vector(self, bone_count: int) -> np.ndarray:
        """Boolean vector, True where a bone may be perturbed."""
        if self.bone_mask is None:
            return np.ones(bone_count, dtype=bool)
        mask = np.zeros(bone_count, dtype=bool)
        mask[sorted(self.bone_mask)] = True
        return mask

    def evolve(self, **changes) -> "AttackConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "step_size": self.step_size,
            "max_iters": self.max_iters,
            "optimizer": self.optimizer.value,
            "termination": self.termination.value,
            "bone_mask": None if self.bone_mask is None else sorted(self.bone_mask),
            "adam_lr": self.adam_lr,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AttackConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        if known.get("bone_mask") is not None:
            known["bone_mask"] = frozenset(known["bone_mask"])
        return cls(**known)


@dataclass
class AttackResult:
    """Outcome of attacking one correctly classified motion."""

    success: bool
    iterations_used: int
    final_beta: np.ndarray
    original_label: int
    predicted_label: int
    final_confidence: float
    adversarial_motion: Optional[MotionSample] = None
    original_motion: Optional[MotionSample] = None
    epsilon: float = 0.0
    bone_mask: Optional[FrozenSet[int]] = None
    optimizer: str = OptimizerKind.PGD_SIGN.value
    termination: str = Termination.EARLY_STOP.value
    part: str = "all"
    sample_id: Optional[str] = None
    error: Optional[str] = None
    beta_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.final_beta = np.asarray(self.final_beta, dtype=np.float64)
        if self.error is None and self.success != (
            self.predicted_label != self.original_label
        ):
            raise ValidationError(
                message="success must equal (predicted_label != original_label)",
                field="success",
            )

    @property
    def failed_with_error(self) -> bool:
        return self.error is not None

    def to_dict(self) -> Dict[str, Any]:
        """Convert result to one JSON-lines record."""
        return {
            "sample_id": self.sample_id,
            "success": bool(self.success),
            "iterations_used": int(self.iterations_used),
            "original_label": int(self.original_label),
            "predicted_label": int(self.predicted_label),
            "final_confidence": float(self.final_confidence),
            "epsilon": float(self.epsilon),
            "optimizer": self.optimizer,
            "termination": self.termination,
            "part": self.part,
            "bone_mask": None if self.bone_mask is None else sorted(self.bone_mask),
            "final_beta": self.final_beta.tolist(),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AttackResult":
        mask = data.get("bone_mask")
        return cls(
            success=bool(data["success"]),
            iterations_used=int(data["iterations_used"]),
            final_beta=data["final_beta"],
            original_label=int(data["original_label"]),
            predicted_label=int(data["predicted_label"]),
            final_confidence=float(data["final_confidence"]),
            epsilon=float(data.get("epsilon", 0.0)),
            optimizer=data.get("optimizer", OptimizerKind.PGD_SIGN.value),
            termination=data.get("termination", Termination.EARLY_STOP.value),
            part=data.get("part", "all"),
            bone_mask=None if mask is None else frozenset(mask),
            sample_id=data.get("sample_id"),
            error=data.get("error"),
        )
