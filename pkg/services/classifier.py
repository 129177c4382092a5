"""
Reference action classifier.

One graph-convolution layer over the skeleton, a temporal mean over valid
frames and a linear output layer:

    H(t)    = relu(A_hat . X(t) . W1 + b1)
    pooled  = mean_t H(t)                      (valid frames only)
    logits  = flatten(pooled) . W2 + b2
    z       = softmax(logits)

Gradients with respect to the parameters and to the input coordinates are
derived by hand; everything is evaluated batched over zero-padded tensors.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config
from models.skeleton import MotionSample, SkeletonTopology
from utils.error_handling import (
    DimensionMismatchError,
    EmptyBatchError,
    NonFiniteLossError,
    ValidationError,
)
from utils.seeding import make_rng
from utils.validation import array_validator, range_validator

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("W1", "b1", "W2", "b2")


def normalized_adjacency(topo: SkeletonTopology) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 from the undirected bone edges of ``topo``."""
    adjacency = np.eye(topo.joint_count)
    for parent, child in topo.edges():
        adjacency[parent, child] = 1.0
        adjacency[child, parent] = 1.0
    inv_sqrt_degree = 1.0 / np.sqrt(adjacency.sum(axis=1))
    return np.outer(inv_sqrt_degree, inv_sqrt_degree) * adjacency


@dataclass
class ReferenceClassifier:
    """Parameters of the graph classifier."""

    adjacency_norm: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    seed: int = 0

    def __post_init__(self):
        """Validate parameter shapes against each other."""
        for name in ("adjacency_norm",) + PARAMETER_NAMES:
            value = array_validator.as_float_array(getattr(self, name), name)
            array_validator.require_finite(value, name)
            setattr(self, name, np.array(value, dtype=np.float64))

        m = self.adjacency_norm.shape[0]
        array_validator.require_shape(self.adjacency_norm, (m, m), "adjacency_norm")
        array_validator.require_shape(self.W1, (3, None), "W1")
        d = self.W1.shape[1]
        array_validator.require_shape(self.b1, (d,), "b1")
        array_validator.require_shape(self.W2, (m * d, None), "W2")
        l = self.W2.shape[1]
        array_validator.require_shape(self.b2, (l,), "b2")
        if not np.allclose(self.adjacency_norm, self.adjacency_norm.T, atol=1e-12, rtol=0):
            raise ValidationError(
                message="adjacency_norm is not symmetric", field="adjacency_norm"
            )

    @property
    def joint_count(self) -> int:
        return int(self.adjacency_norm.shape[0])

    @property
    def hidden_dim(self) -> int:
        return int(self.W1.shape[1])

    @property
    def class_count(self) -> int:
        return int(self.W2.shape[1])

    @classmethod
    def initialize(
        cls,
        topo: SkeletonTopology,
        class_count: int,
        hidden_dim: Optional[int] = None,
        seed: int = 0,
    ) -> "ReferenceClassifier":
        """Uniform init in [-s, s], s = 1/sqrt(fan-in), from a seeded generator."""
        hidden_dim = hidden_dim or config.HIDDEN_DIM
        range_validator.require_positive_int(hidden_dim, "hidden_dim")
        range_validator.require_positive_int(class_count, "class_count")
        rng = make_rng(seed, "classifier", "init")
        m = topo.joint_count
        s1 = 1.0 / math.sqrt(3)
        s2 = 1.0 / math.sqrt(m * hidden_dim)
        return cls(
            adjacency_norm=normalized_adjacency(topo),
            W1=rng.uniform(-s1, s1, size=(3, hidden_dim)),
            b1=rng.uniform(-s1, s1, size=hidden_dim),
            W2=rng.uniform(-s2, s2, size=(m * hidden_dim, class_count)),
            b2=rng.uniform(-s2, s2, size=class_count),
            seed=seed,
        )

    @classmethod
    def zeros(
        cls, topo: SkeletonTopology, class_count: int, hidden_dim: Optional[int] = None
    ) -> "ReferenceClassifier":
        """All-zero parameters; predicts the uniform distribution."""
        hidden_dim = hidden_dim or config.HIDDEN_DIM
        m = topo.joint_count
        return cls(
            adjacency_norm=normalized_adjacency(topo),
            W1=np.zeros((3, hidden_dim)),
            b1=np.zeros(hidden_dim),
            W2=np.zeros((m * hidden_dim, class_count)),
            b2=np.zeros(class_count),
        )

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "ReferenceClassifier":
        return ReferenceClassifier(
            adjacency_norm=self.adjacency_norm, seed=self.seed, **params
        )

    def copy(self) -> "ReferenceClassifier":
        return copy.deepcopy(self)

    def check_topology(self, topo: SkeletonTopology):
        if self.joint_count != topo.joint_count:
            raise DimensionMismatchError(
                message=f"Model built for {self.joint_count} joints, topology has "
                f"{topo.joint_count}"
            )
        if not np.array_equal(self.adjacency_norm, normalized_adjacency(topo)):
            raise DimensionMismatchError(
                message=f"Model adjacency does not match topology '{topo.name}'"
            )

    def to_dict(self) -> Dict[str, Any]:
        """Checkpoint record: dimensions, seed and flat parameter arrays."""
        return {
            "architecture": {
                "joints": self.joint_count,
                "hidden_dim": self.hidden_dim,
                "class_count": self.class_count,
            },
            "seed": self.seed,
            "parameters": {
                name: getattr(self, name).ravel().tolist() for name in PARAMETER_NAMES
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], topo: SkeletonTopology) -> "ReferenceClassifier":
        """Rebuild a checkpoint, checking its dimensions against ``topo``."""
        arch = data["architecture"]
        m, d, l = int(arch["joints"]), int(arch["hidden_dim"]), int(arch["class_count"])
        if m != topo.joint_count:
            raise DimensionMismatchError(
                message=f"Checkpoint has {m} joints, topology '{topo.name}' has "
                f"{topo.joint_count}"
            )
        shapes = {"W1": (3, d), "b1": (d,), "W2": (m * d, l), "b2": (l,)}
        params = {}
        for name, shape in shapes.items():
            flat = np.asarray(data["parameters"][name], dtype=np.float64)
            if flat.size != int(np.prod(shape)):
                raise DimensionMismatchError(
                    message=f"Checkpoint parameter {name} has {flat.size} values, "
                    f"expected shape {shape}"
                )
            params[name] = flat.reshape(shape)
        return cls(
            adjacency_norm=normalized_adjacency(topo), seed=int(data.get("seed", 0)), **params
        )


@dataclass
class ForwardTrace:
    """Intermediate activations of one forward pass."""

    aggregated: np.ndarray
    pre_activation: np.ndarray
    hidden: np.ndarray
    pooled: np.ndarray
    logits: np.ndarray
    confidence: np.ndarray
    valid_frames: int


@dataclass
class GradientRecord:
    """Mean loss and mean parameter gradients over a batch."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    loss: float
    batch_size: int

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def is_finite(self) -> bool:
        return math.isfinite(self.loss) and all(
            np.all(np.isfinite(g)) for g in self.as_dict().values()
        )


def _stack(model: ReferenceClassifier, samples: Sequence[MotionSample]):
    """Zero-pad samples to a common length; returns coords (N,T,M,3) and valid (N,)."""
    for sample in samples:
        if sample.joint_count != model.joint_count:
            raise DimensionMismatchError(
                message=f"Motion {sample.sample_id or ''} has {sample.joint_count} "
                f"joints, model expects {model.joint_count}"
            )
        if sample.valid_frames < 1:
            raise DimensionMismatchError(
                message=f"Motion {sample.sample_id or ''} has no valid frames"
            )
    frames = max(s.valid_frames for s in samples)
    coords = np.zeros((len(samples), frames, model.joint_count, 3))
    for n, sample in enumerate(samples):
        coords[n, : sample.valid_frames] = sample.valid_coords
    valid = np.array([s.valid_frames for s in samples], dtype=np.float64)
    return coords, valid


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _log_sum_exp(logits: np.ndarray) -> np.ndarray:
    top = logits.max(axis=-1)
    return top + np.log(np.exp(logits - top[..., None]).sum(axis=-1))


def _forward_batch(model: ReferenceClassifier, coords: np.ndarray, valid: np.ndarray):
    n, t = coords.shape[:2]
    aggregated = np.einsum("ij,ntjc->ntic", model.adjacency_norm, coords)
    pre_activation = aggregated @ model.W1 + model.b1
    hidden = np.maximum(pre_activation, 0.0)
    weights = (np.arange(t)[None, :] < valid[:, None]) / valid[:, None]
    pooled = np.einsum("nt,ntmd->nmd", weights, hidden)
    flat = pooled.reshape(n, -1)
    logits = flat @ model.W2 + model.b2
    return {
        "aggregated": aggregated,
        "pre_activation": pre_activation,
        "hidden": hidden,
        "weights": weights,
        "pooled": pooled,
        "flat": flat,
        "logits": logits,
        "confidence": _softmax(logits),
    }


def _backward_batch(
    model: ReferenceClassifier, cache: Dict[str, np.ndarray], d_logits: np.ndarray
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Backpropagate d_logits (N, L); returns (parameter grads, input grads)."""
    n = d_logits.shape[0]
    grads = {"W2": cache["flat"].T @ d_logits, "b2": d_logits.sum(axis=0)}

    d_pooled = (d_logits @ model.W2.T).reshape(n, model.joint_count, model.hidden_dim)
    d_hidden = cache["weights"][:, :, None, None] * d_pooled[:, None, :, :]
    d_pre = d_hidden * (cache["pre_activation"] > 0.0)

    grads["W1"] = np.einsum("ntmc,ntmd->cd", cache["aggregated"], d_pre)
    grads["b1"] = d_pre.sum(axis=(0, 1, 2))

    d_aggregated = d_pre @ model.W1.T
    d_coords = np.einsum("ij,ntic->ntjc", model.adjacency_norm, d_aggregated)
    return grads, d_coords


def _check_label(model: ReferenceClassifier, label: int):
    if not 0 <= label < model.class_count:
        raise ValidationError(
            message=f"Label {label} outside [0, {model.class_count - 1}]", field="label"
        )


def forward(model: ReferenceClassifier, motion: MotionSample) -> Tuple[np.ndarray, ForwardTrace]:
    """
    Confidence vector of ``motion`` plus the activations behind it.

    Raises:
        DimensionMismatchError: joint count differs or no valid frames
    """
    coords, valid = _stack(model, [motion])
    cache = _forward_batch(model, coords, valid)
    confidence = cache["confidence"][0]
    trace = ForwardTrace(
        aggregated=cache["aggregated"][0],
        pre_activation=cache["pre_activation"][0],
        hidden=cache["hidden"][0],
        pooled=cache["pooled"][0],
        logits=cache["logits"][0],
        confidence=confidence,
        valid_frames=motion.valid_frames,
    )
    return confidence, trace


def predict(model: ReferenceClassifier, motion: MotionSample) -> int:
    """Argmax of the confidence vector; ties go to the lowest class id."""
    confidence, _ = forward(model, motion)
    return int(np.argmax(confidence))


def predict_batch(
    model: ReferenceClassifier, samples: Sequence[MotionSample], chunk_size: int = 256
) -> np.ndarray:
    """Predicted labels for many samples."""
    predictions = []
    for start in range(0, len(samples), chunk_size):
        coords, valid = _stack(model, samples[start : start + chunk_size])
        confidence = _forward_batch(model, coords, valid)["confidence"]
        predictions.append(np.argmax(confidence, axis=1))
    if not predictions:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(predictions)


def accuracy(model: ReferenceClassifier, samples: Sequence[MotionSample]) -> float:
    """Fraction of samples whose prediction equals the label; NaN when empty."""
    if not samples:
        return float("nan")
    labels = np.array([s.label for s in samples])
    return float(np.mean(predict_batch(model, samples) == labels))


def loss_and_input_gradient(
    model: ReferenceClassifier, motion: MotionSample, label: int
) -> Tuple[float, np.ndarray]:
    """
    Cross-entropy against ``label`` and its gradient w.r.t. every coordinate.

    The gradient has the motion's full T x M x 3 shape; padded frames get zero.
    """
    _check_label(model, label)
    coords, valid = _stack(model, [motion])
    cache = _forward_batch(model, coords, valid)
    logits = cache["logits"][0]
    loss = float(_log_sum_exp(logits) - logits[label])

    d_logits = cache["confidence"].copy()
    d_logits[0, label] -= 1.0
    _, d_coords = _backward_batch(model, cache, d_logits)

    grad = np.zeros_like(motion.coords)
    grad[: motion.valid_frames] = d_coords[0, : motion.valid_frames]
    return loss, grad


def parameter_gradient(
    model: ReferenceClassifier, batch: Sequence[MotionSample]
) -> GradientRecord:
    """
    Mean cross-entropy over ``batch`` and its gradient w.r.t. W1, b1, W2, b2.

    Raises:
        EmptyBatchError: if the batch is empty
    """
    if len(batch) == 0:
        raise EmptyBatchError(message="parameter_gradient received an empty batch")
    labels = np.array([s.label for s in batch])
    for label in labels:
        _check_label(model, int(label))

    coords, valid = _stack(model, batch)
    cache = _forward_batch(model, coords, valid)
    n = len(batch)
    rows = np.arange(n)
    losses = _log_sum_exp(cache["logits"]) - cache["logits"][rows, labels]

    d_logits = cache["confidence"].copy()
    d_logits[rows, labels] -= 1.0
    d_logits /= n
    grads, _ = _backward_batch(model, cache, d_logits)
    return GradientRecord(loss=float(np.mean(losses)), batch_size=n, **grads)


class SGDOptimizer:
    """Plain gradient descent."""

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, model: ReferenceClassifier, grads: GradientRecord) -> ReferenceClassifier:
        params = {
            name: value - self.learning_rate * getattr(grads, name)
            for name, value in model.parameters().items()
        }
        return model.with_parameters(params)


class AdamOptimizer:
    """Adam with bias-corrected moments, descending the loss."""

    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, model: ReferenceClassifier, grads: GradientRecord) -> ReferenceClassifier:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        params = {}
        for name, value in model.parameters().items():
            g = getattr(grads, name)
            if name not in self.m:
                self.m[name] = np.zeros_like(value)
                self.v[name] = np.zeros_like(value)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            params[name] = value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
        return model.with_parameters(params)


@dataclass
class TrainConfig:
    """Minibatch training settings."""

    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    optimizer: str = "sgd"
    patience: Optional[int] = None

    def __post_init__(self):
        range_validator.require_range(
            self.learning_rate, "learning_rate", 0.0, None, closed=(False, True)
        )
        range_validator.require_positive_int(self.batch_size, "batch_size")
        range_validator.require_positive_int(self.epochs, "epochs", minimum=0)
        range_validator.require_choice(self.optimizer, "optimizer", ("sgd", "adam"))
        if self.patience is not None:
            range_validator.require_positive_int(self.patience, "patience")

    def build_optimizer(self):
        if self.optimizer == "adam":
            return AdamOptimizer(self.learning_rate)
        return SGDOptimizer(self.learning_rate)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "optimizer": self.optimizer,
            "patience": self.patience,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class EpochRecord:
    """Metrics after one training epoch."""

    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: float
    extras: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row = {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_accuracy": self.val_accuracy,
        }
        row.update(self.extras)
        return row


@dataclass
class TrainingOutcome:
    """Best snapshot and the per-epoch history that led to it."""

    model: ReferenceClassifier
    history: List[EpochRecord]
    best_epoch: int
    parameter_history: List[Dict[str, np.ndarray]] = field(default_factory=list)


BatchTransform = Callable[[ReferenceClassifier, List[MotionSample], int], List[MotionSample]]
EpochCallback = Callable[[ReferenceClassifier, int], Dict[str, float]]


def train(
    model: ReferenceClassifier,
    train_set: Sequence[MotionSample],
    val_set: Sequence[MotionSample],
    train_config: TrainConfig,
    batch_transform: Optional[BatchTransform] = None,
    epoch_callback: Optional[EpochCallback] = None,
    keep_parameter_history: bool = False,
) -> TrainingOutcome:
    """
    Minibatch training with best-validation snapshotting.

    ``batch_transform`` may rewrite each batch before the gradient step (data
    augmentation, adversarial examples); it receives the current model.
    The input model is never modified.

    Raises:
        EmptyBatchError: if the training set is empty and epochs > 0
        NonFiniteLossError: if a batch loss is not finite
        ValidationError: if a sample id appears in both the train and val sets
    """
    train_ids = {s.sample_id for s in train_set if s.sample_id is not None}
    shared = sorted(train_ids.intersection(s.sample_id for s in val_set))
    if shared:
        raise ValidationError(
            message=f"{len(shared)} samples are in both train and val, e.g. {shared[0]}",
            field="val_set",
        )

    current = model.copy()
    history: List[EpochRecord] = []
    parameter_history: List[Dict[str, np.ndarray]] = []
    if train_config.epochs == 0:
        return TrainingOutcome(model=current, history=history, best_epoch=0)
    if len(train_set) == 0:
        raise EmptyBatchError(message="Training set is empty")

    shuffle_rng = make_rng(train_config.seed, "train", "shuffle")
    optimizer = train_config.build_optimizer()
    best_model, best_accuracy, best_epoch = current, -1.0, 0
    stale_epochs = 0

    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(train_set), train_config.batch_size):
            batch = [train_set[i] for i in order[start : start + train_config.batch_size]]
            if batch_transform is not None:
                batch = batch_transform(current, batch, epoch)
            grads = parameter_gradient(current, batch)
            if not grads.is_finite():
                raise NonFiniteLossError(
                    message=f"Non-finite loss or gradient at epoch {epoch}",
                    recovery_suggestions=["Lower the learning rate"],
                    context={"epoch": epoch, "loss": grads.loss},
                )
            losses.append(grads.loss * grads.batch_size)
            current = optimizer.step(current, grads)

        if keep_parameter_history:
            parameter_history.append({k: v.copy() for k, v in current.parameters().items()})

        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.sum(losses) / len(train_set)),
            train_accuracy=accuracy(current, train_set),
            val_accuracy=accuracy(current, val_set),
        )
        if epoch_callback is not None:
            record.extras.update(epoch_callback(current, epoch))
        history.append(record)
        logger.info(
            f"Epoch {epoch}/{train_config.epochs}: loss={record.train_loss:.4f} "
            f"train_acc={record.train_accuracy:.3f} val_acc={record.val_accuracy:.3f}"
        )

        if not val_set:
            best_model, best_epoch = current, epoch
            continue
        if record.val_accuracy > best_accuracy:
            best_model, best_accuracy, best_epoch = current, record.val_accuracy, epoch
            stale_epochs = 0
        else:
            stale_epochs += 1
            if train_config.patience is not None and stale_epochs >= train_config.patience:
                logger.info(f"Early stopping at epoch {epoch}, best epoch {best_epoch}")
                break

    return TrainingOutcome(
        model=best_model.copy(),
        history=history,
        best_epoch=best_epoch,
        parameter_history=parameter_history,
    )
