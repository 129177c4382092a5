"""
Synthetic skeleton action dataset.

Every class shares one rest skeleton; classes differ only in how each body
part oscillates over time (frequency, amplitude, phase and posture offset of
a rotation about a per-part axis). Poses are built with forward kinematics
from the rest offsets, so bone lengths never change.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from models.skeleton import LabelSet, MotionSample, SkeletonTopology, topological_order
from utils.error_handling import BadSpecError
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

SPLIT_FRACTIONS = (("train", 0.8), ("val", 0.1), ("test", 0.1))
DEFAULT_BONE_LENGTH = 0.15


@dataclass
class SyntheticSpec:
    """Generator settings."""

    class_count: int = 10
    samples_per_class: int = 40
    frames: int = 32
    noise_std: float = 0.01
    phase_jitter: float = 0.3
    amplitude_jitter: float = 0.1
    root_bob: float = 0.05
    topology_path: Optional[str] = None

    def __post_init__(self):
        problems = []
        for name, minimum in (("class_count", 2), ("samples_per_class", 1), ("frames", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
                problems.append(f"{name} must be an integer >= {minimum}, got {value!r}")
        for name in ("noise_std", "phase_jitter", "amplitude_jitter", "root_bob"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
                problems.append(f"{name} must be a finite number >= 0, got {value!r}")
        if problems:
            raise BadSpecError(message="; ".join(problems))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "class_count": self.class_count,
            "samples_per_class": self.samples_per_class,
            "frames": self.frames,
            "noise_std": self.noise_std,
            "phase_jitter": self.phase_jitter,
            "amplitude_jitter": self.amplitude_jitter,
            "root_bob": self.root_bob,
            "topology_path": self.topology_path,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadSpecError(message=f"Unknown generator fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class PartMotion:
    """Oscillation of one bone group for one class."""

    frequency: float
    amplitude: float
    phase: float
    posture: float


@dataclass
class SyntheticDataset:
    """Generated samples with their split assignment."""

    samples: List[MotionSample]
    splits: Dict[str, List[str]]
    labels: LabelSet
    spec: SyntheticSpec
    seed: int
    class_motions: List[List[PartMotion]] = field(default_factory=list)

    def split(self, name: str) -> List[MotionSample]:
        by_id = {s.sample_id: s for s in self.samples}
        return [by_id[sid] for sid in self.splits.get(name, [])]


def rest_offsets_for(topo: SkeletonTopology, seed: int) -> np.ndarray:
    """The topology's rest offsets, or seeded random ones of fixed length."""
    if topo.rest_offsets is not None:
        return np.asarray(topo.rest_offsets, dtype=np.float64)
    rng = make_rng(seed, "synthetic", "rest")
    directions = rng.normal(size=(topo.joint_count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    offsets = DEFAULT_BONE_LENGTH * directions
    offsets[topo.root] = [0.0, 1.0, 0.0]
    return offsets


def motion_groups(topo: SkeletonTopology) -> List[np.ndarray]:
    """
    Bone groups that move together: the named parts, then the remaining
    bones grouped by the root branch they hang from.
    """
    groups = [np.array(sorted(bones), dtype=np.int64) for _, bones in sorted(topo.parts.items())]
    assigned = set().union(*topo.parts.values()) if topo.parts else set()

    by_branch: Dict[int, List[int]] = {}
    for bone in range(topo.bone_count):
        if bone in assigned:
            continue
        path = topo.path_to_root(int(topo.child_of_bone[bone]))
        by_branch.setdefault(path[0], []).append(bone)
    groups.extend(np.array(bones, dtype=np.int64) for _, bones in sorted(by_branch.items()))
    return [g for g in groups if g.size]


def _rotation_matrices(axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotations; axes (B, 3) unit, angles (T, B) -> (T, B, 3, 3)."""
    x, y, z = axes[:, 0], axes[:, 1], axes[:, 2]
    zero = np.zeros_like(x)
    k = np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )
    k2 = k @ k
    sin = np.sin(angles)[..., None, None]
    cos = np.cos(angles)[..., None, None]
    return np.eye(3) + sin * k + (1.0 - cos) * k2


def forward_kinematics(
    topo: SkeletonTopology,
    offsets: np.ndarray,
    local_rotations: np.ndarray,
    root_positions: np.ndarray,
) -> np.ndarray:
    """
    Joint positions (T, M, 3) from per-bone local rotations (T, M-1, 3, 3).

    Each joint sits at its parent's position plus its rest offset rotated by
    the accumulated rotations along its root path.
    """
    frames = root_positions.shape[0]
    positions = np.zeros((frames, topo.joint_count, 3))
    global_rotations = np.zeros((frames, topo.joint_count, 3, 3))
    positions[:, topo.root] = root_positions
    global_rotations[:, topo.root] = np.eye(3)

    for joint in topological_order(topo):
        parent = topo.parents[joint]
        if parent is None:
            continue
        bone = topo.bone_of_child(joint)
        global_rotations[:, joint] = global_rotations[:, parent] @ local_rotations[:, bone]
        positions[:, joint] = positions[:, parent] + global_rotations[:, joint] @ offsets[joint]
    return positions


def _class_motions(
    spec: SyntheticSpec, group_count: int, seed: int
) -> List[List[PartMotion]]:
    motions = []
    for label in range(spec.class_count):
        rng = make_rng(seed, "synthetic", "class", label)
        motions.append(
            [
                PartMotion(
                    frequency=rng.uniform(0.5, 3.0),
                    amplitude=rng.uniform(0.2, 0.8),
                    phase=rng.uniform(0.0, 2.0 * math.pi),
                    posture=rng.uniform(-0.3, 0.3),
                )
                for _ in range(group_count + 1)
            ]
        )
    return motions


def _sample_motion(
    topo: SkeletonTopology,
    spec: SyntheticSpec,
    offsets: np.ndarray,
    groups: List[np.ndarray],
    axes: np.ndarray,
    parts: List[PartMotion],
    rng: np.random.Generator,
) -> np.ndarray:
    time = np.arange(spec.frames) / spec.frames
    angles = np.zeros((spec.frames, topo.bone_count))
    for bones, part in zip(groups, parts):
        phase = part.phase + rng.uniform(-spec.phase_jitter, spec.phase_jitter)
        amplitude = part.amplitude * (1.0 + rng.uniform(-spec.amplitude_jitter, spec.amplitude_jitter))
        wave = part.posture + amplitude * np.sin(2.0 * math.pi * part.frequency * time + phase)
        angles[:, bones] = wave[:, None]
    if spec.noise_std > 0:
        angles += rng.normal(scale=spec.noise_std, size=angles.shape)

    # the extra class entry drives the vertical bob of the root
    bob = parts[-1]
    root = np.tile(offsets[topo.root], (spec.frames, 1))
    root[:, 1] += spec.root_bob * np.sin(2.0 * math.pi * bob.frequency * time + bob.phase)

    rotations = _rotation_matrices(axes, angles)
    return forward_kinematics(topo, offsets, rotations, root)


def _assign_splits(spec: SyntheticSpec, ids_by_class: List[List[str]], seed: int):
    splits: Dict[str, List[str]] = {name: [] for name, _ in SPLIT_FRACTIONS}
    rng = make_rng(seed, "synthetic", "split")
    for ids in ids_by_class:
        order = [ids[i] for i in rng.permutation(len(ids))]
        n_train = int(math.floor(SPLIT_FRACTIONS[0][1] * len(ids) + 0.5))
        n_val = int(math.floor(SPLIT_FRACTIONS[1][1] * len(ids) + 0.5))
        splits["train"].extend(order[:n_train])
        splits["val"].extend(order[n_train : n_train + n_val])
        splits["test"].extend(order[n_train + n_val :])
    return {name: sorted(members) for name, members in splits.items()}


def generate_synthetic_dataset(
    spec: SyntheticSpec, topo: SkeletonTopology, seed: int
) -> SyntheticDataset:
    """
    Generate ``class_count * samples_per_class`` motions and an 80/10/10
    per-class split. Identical (spec, topology, seed) give identical output.

    Raises:
        BadSpecError: if the topology has fewer than two joints
    """
    if topo.joint_count < 2:
        raise BadSpecError(message="Synthetic motions need a skeleton with at least one bone")

    offsets = rest_offsets_for(topo, seed)
    groups = motion_groups(topo)
    axis_rng = make_rng(seed, "synthetic", "axes")
    group_axes = axis_rng.normal(size=(len(groups), 3))
    group_axes /= np.linalg.norm(group_axes, axis=1, keepdims=True)
    axes = np.zeros((topo.bone_count, 3))
    for bones, axis in zip(groups, group_axes):
        axes[bones] = axis

    class_motions = _class_motions(spec, len(groups), seed)
    samples: List[MotionSample] = []
    ids_by_class: List[List[str]] = []
    for label in range(spec.class_count):
        ids = []
        for index in range(spec.samples_per_class):
            rng = make_rng(seed, "synthetic", "sample", label, index)
            coords = _sample_motion(topo, spec, offsets, groups, axes, class_motions[label], rng)
            sample_id = f"c{label:03d}_s{index:04d}"
            samples.append(MotionSample(coords=coords, label=label, sample_id=sample_id))
            ids.append(sample_id)
        ids_by_class.append(ids)

    splits = _assign_splits(spec, ids_by_class, seed)
    logger.info(
        f"Generated {len(samples)} synthetic motions: {spec.class_count} classes x "
        f"{spec.samples_per_class}, {spec.frames} frames, {len(groups)} moving groups"
    )
    return SyntheticDataset(
        samples=samples,
        splits=splits,
        labels=LabelSet(class_count=spec.class_count),
        spec=spec,
        seed=seed,
        class_motions=class_motions,
    )
