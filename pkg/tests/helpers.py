"""
Small topologies and motions shared by the test modules.
"""

import os
from typing import Optional

import numpy as np

from models.skeleton import MotionSample, SkeletonTopology
from services.classifier import ReferenceClassifier

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
NTU25_PATH = os.path.join(PROJECT_ROOT, "data", "topologies", "ntu25.json")


def branch_topology() -> SkeletonTopology:
    """Root 0 with two arms: 0-1-2 and 0-3-4. Bones 0..3 end at joints 1..4."""
    return SkeletonTopology(
        joint_count=5,
        root=0,
        parents=[None, 0, 1, 0, 3],
        parts={"left": [0, 1], "right": [2, 3]},
        name="branch",
    )


def hip_topology() -> SkeletonTopology:
    """Root 0 with hips 1 and 2, each carrying one more joint."""
    return SkeletonTopology(
        joint_count=5, root=0, parents=[None, 0, 0, 1, 2], name="hips"
    )


def chain_topology(joint_count: int) -> SkeletonTopology:
    return SkeletonTopology(
        joint_count=joint_count,
        root=0,
        parents=[None] + list(range(joint_count - 1)),
        name=f"chain{joint_count}",
    )


def random_tree(rng: np.random.Generator, joint_count: int) -> SkeletonTopology:
    """Random rooted tree; every joint hangs from a lower-numbered one."""
    parents = [None] + [int(rng.integers(0, j)) for j in range(1, joint_count)]
    return SkeletonTopology(joint_count=joint_count, root=0, parents=parents)


def random_motion(
    rng: np.random.Generator,
    topo: SkeletonTopology,
    frames: int = 6,
    label: int = 0,
    valid_frames: Optional[int] = None,
    sample_id: Optional[str] = None,
) -> MotionSample:
    coords = rng.normal(size=(frames, topo.joint_count, 3))
    if valid_frames is not None:
        coords[valid_frames:] = 0.0
    return MotionSample(
        coords=coords, label=label, valid_frames=valid_frames, sample_id=sample_id
    )


def random_model(
    topo: SkeletonTopology, class_count: int = 3, hidden_dim: int = 4, seed: int = 7
) -> ReferenceClassifier:
    return ReferenceClassifier.initialize(
        topo, class_count=class_count, hidden_dim=hidden_dim, seed=seed
    )
