"""
Adversarial bone-length attack.

Starting from beta = 1 the attack ascends the classifier loss with respect to
the bone scales, projecting onto the epsilon box after every step. Two update
rules (signed PGD and Adam) and two termination modes (stop at the first
misclassification, or run a fixed number of steps) are supported.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from models.attack import (
    AttackConfig,
    AttackResult,
    BoneScaleVector,
    OptimizerKind,
    Termination,
)
from models.skeleton import MotionSample, SkeletonTopology
from services.classifier import (
    ReferenceClassifier,
    forward,
    loss_and_input_gradient,
    predict_batch,
)
from services.reparam import bone_differences, clip_to_box, reparameterize
from utils.error_handling import (
    DimensionMismatchError,
    NonFiniteGradientError,
    error_handler,
)

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates of one attack run."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, bone_count: int) -> "AdamState":
        return cls(m=np.zeros(bone_count), v=np.zeros(bone_count), step=0)


def beta_gradient(
    model: ReferenceClassifier,
    motion: MotionSample,
    topo: SkeletonTopology,
    beta: BoneScaleVector,
    label: int,
) -> np.ndarray:
    """
    Gradient of the cross-entropy loss w.r.t. the bone scales.

    The coordinate gradient is taken at the reparameterized motion and
    contracted with the original bone vectors along each joint's root path.

    Raises:
        DimensionMismatchError: if beta or the motion do not fit ``topo``
    """
    if beta.bone_count != topo.bone_count:
        raise DimensionMismatchError(
            message=f"beta has {beta.bone_count} entries, skeleton has {topo.bone_count} bones"
        )
    adversarial = reparameterize(motion, topo, beta)
    _, grad_coords = loss_and_input_gradient(model, adversarial, label)
    differences = bone_differences(motion, topo)
    return np.einsum("jb,tjc,tbc->b", topo.path_matrix(), grad_coords, differences)


def _apply_mask(beta: np.ndarray, config: AttackConfig) -> np.ndarray:
    if config.bone_mask is None:
        return beta
    return np.where(config.mask_vector(beta.shape[0]), beta, 1.0)


def pgd_step(beta: BoneScaleVector, gradient: np.ndarray, config: AttackConfig) -> BoneScaleVector:
    """beta + step_size * sign(gradient), clipped to the box; masked-out bones reset to 1."""
    stepped = beta.beta + config.step_size * np.sign(gradient)
    clipped = clip_to_box(beta.with_beta(stepped))
    return clipped.with_beta(_apply_mask(clipped.beta, config))


def adam_step(
    beta: BoneScaleVector, gradient: np.ndarray, state: AdamState, config: AttackConfig
) -> Tuple[BoneScaleVector, AdamState]:
    """One bias-corrected Adam ascent step followed by the same clip and mask."""
    step = state.step + 1
    m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * gradient
    v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * gradient * gradient
    m_hat = m / (1.0 - config.adam_beta1**step)
    v_hat = v / (1.0 - config.adam_beta2**step)

    stepped = beta.beta + config.adam_lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    clipped = clip_to_box(beta.with_beta(stepped))
    return clipped.with_beta(_apply_mask(clipped.beta, config)), AdamState(m=m, v=v, step=step)


def _confidence_of(model: ReferenceClassifier, motion: MotionSample) -> Tuple[int, float]:
    confidence, _ = forward(model, motion)
    predicted = int(np.argmax(confidence))
    return predicted, float(confidence[predicted])


def attack(
    model: ReferenceClassifier,
    motion: MotionSample,
    topo: SkeletonTopology,
    config: AttackConfig,
    record_trace: bool = False,
    part: str = "all",
) -> AttackResult:
    """
    Attack one motion whose label is the ground truth.

    Early-stop mode checks the prediction before every update, starting at
    beta = 1, and returns at the first misclassification. Full-run mode
    performs exactly ``max_iters`` updates and evaluates only the final beta.

    Raises:
        DimensionMismatchError: if the motion or model do not fit ``topo``
        ConfigurationError: if the bone mask names bones the skeleton lacks
        NonFiniteGradientError: if a loss gradient becomes NaN or infinite
    """
    motion.check_topology(topo)
    config.check_bone_count(topo.bone_count)
    label = motion.label

    beta = BoneScaleVector.ones(topo.bone_count, config.epsilon)
    adam_state = AdamState.zeros(topo.bone_count)
    trace: List[List[float]] = [beta.to_list()] if record_trace else []
    early_stop = config.termination == Termination.EARLY_STOP

    iterations = config.max_iters
    for n in range(config.max_iters):
        if early_stop:
            adversarial = reparameterize(motion, topo, beta)
            predicted, _ = _confidence_of(model, adversarial)
            if predicted != label:
                iterations = n
                break

        gradient = beta_gradient(model, motion, topo, beta, label)
        if not np.all(np.isfinite(gradient)):
            raise NonFiniteGradientError(
                message=f"Non-finite beta gradient at iteration {n}",
                context={"sample_id": motion.sample_id, "iteration": n},
            )
        if config.optimizer == OptimizerKind.ADAM:
            beta, adam_state = adam_step(beta, gradient, adam_state, config)
        else:
            beta = pgd_step(beta, gradient, config)
        if record_trace:
            trace.append(beta.to_list())

    adversarial = reparameterize(motion, topo, beta)
    predicted, confidence = _confidence_of(model, adversarial)

    return AttackResult(
        success=predicted != label,
        iterations_used=iterations,
        final_beta=beta.beta,
        original_label=label,
        predicted_label=predicted,
        final_confidence=confidence,
        adversarial_motion=adversarial,
        original_motion=motion,
        epsilon=config.epsilon,
        bone_mask=config.bone_mask,
        optimizer=config.optimizer.value,
        termination=config.termination.value,
        part=part,
        sample_id=motion.sample_id,
        beta_trace=trace,
    )


@dataclass
class BatchAttackReport:
    """Results for the correctly classified subset, in input order."""

    results: List[AttackResult] = field(default_factory=list)
    filtered_out: int = 0
    attempted: int = 0

    @property
    def error_count(self) -> int:
        return sum(1 for r in self.results if r.failed_with_error)

    @property
    def success_count(self) -> int:
        return sum(1 for r in self.results if r.success)

    def success_rate(self) -> float:
        """Successes over attacked samples; NaN when nothing was attacked."""
        if not self.results:
            return float("nan")
        return self.success_count / len(self.results)

    def mean_confidence(self) -> float:
        """Mean final confidence over successful attacks; NaN if none."""
        values = [r.final_confidence for r in self.results if r.success]
        return float(np.mean(values)) if values else float("nan")


def _failed_result(
    motion: MotionSample, topo: SkeletonTopology, config: AttackConfig, part: str, error: str
) -> AttackResult:
    return AttackResult(
        success=False,
        iterations_used=0,
        final_beta=np.ones(topo.bone_count),
        original_label=motion.label,
        predicted_label=motion.label,
        final_confidence=float("nan"),
        original_motion=motion,
        epsilon=config.epsilon,
        bone_mask=config.bone_mask,
        optimizer=config.optimizer.value,
        termination=config.termination.value,
        part=part,
        sample_id=motion.sample_id,
        error=error,
    )


def _attack_one(model, motion, topo, config, part) -> AttackResult:
    try:
        return attack(model, motion, topo, config, part=part)
    except NonFiniteGradientError as e:
        error_handler.handle_error(e, context={"part": part, "epsilon": config.epsilon})
        return _failed_result(motion, topo, config, part, e.message)


def attack_batch(
    model: ReferenceClassifier,
    samples: Sequence[MotionSample],
    topo: SkeletonTopology,
    config: AttackConfig,
    part: str = "all",
    workers: int = 1,
) -> BatchAttackReport:
    """
    Attack every sample the model classifies correctly at beta = 1.

    Misclassified samples are counted in ``filtered_out``. With ``workers``
    above 1 the per-sample attacks run on a thread pool; results keep the
    input order of the attacked subset either way. A sample whose gradient
    turns non-finite yields a result with ``error`` set instead of aborting.
    """
    config.check_bone_count(topo.bone_count)
    report = BatchAttackReport()
    if len(samples) == 0:
        return report

    for sample in samples:
        sample.check_topology(topo)
    labels = np.array([s.label for s in samples])
    correct = predict_batch(model, samples) == labels
    targets = [s for s, ok in zip(samples, correct) if ok]
    report.filtered_out = int(len(samples) - len(targets))
    report.attempted = len(targets)

    logger.info(
        f"Attacking {len(targets)}/{len(samples)} correctly classified samples "
        f"(eps={config.epsilon}, {config.optimizer.value}/{config.termination.value}, "
        f"part={part})"
    )

    if workers > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.results = list(
                pool.map(lambda s: _attack_one(model, s, topo, config, part), targets)
            )
    else:
        report.results = [_attack_one(model, s, topo, config, part) for s in targets]

    if report.error_count:
        logger.warning(
            f"{report.error_count}/{len(targets)} samples failed with errors; "
            f"{error_handler.get_error_statistics()['total_errors']} errors tracked this run"
        )
    return report
