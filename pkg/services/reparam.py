"""
Bone-length reparameterization of skeleton motions.

Each bone (i, j) carries a scale beta_ij; joints are rebuilt from the root
outwards as q~_j = beta_ij * (q_j - q_i) + q~_i with the root fixed. The map
is linear in beta along root paths, which gives a closed form and a
beta-independent Jacobian.
"""

import logging

import numpy as np

from models.attack import BoneScaleVector
from models.skeleton import MotionSample, SkeletonTopology, topological_order
from utils.error_handling import DimensionMismatchError, FrameOutOfRangeError

logger = logging.getLogger(__name__)


def _check_dimensions(motion: MotionSample, topo: SkeletonTopology, beta: BoneScaleVector):
    motion.check_topology(topo)
    if beta.bone_count != topo.bone_count:
        raise DimensionMismatchError(
            message=f"beta has {beta.bone_count} entries, skeleton has {topo.bone_count} bones"
        )


def bone_differences(motion: MotionSample, topo: SkeletonTopology) -> np.ndarray:
    """Bone vectors q_child(b)(t) - q_parent(b)(t), shape (T, M-1, 3)."""
    motion.check_topology(topo)
    coords = motion.coords
    return coords[:, topo.child_of_bone, :] - coords[:, topo.parent_of_bone, :]


def bone_lengths(motion: MotionSample, topo: SkeletonTopology) -> np.ndarray:
    """Euclidean bone lengths per frame, shape (T, M-1)."""
    return np.linalg.norm(bone_differences(motion, topo), axis=-1)


def reparameterize(
    motion: MotionSample, topo: SkeletonTopology, beta: BoneScaleVector
) -> MotionSample:
    """
    Rebuild the motion joint by joint in topological order.

    A joint whose parent is unmoved and whose bone scale is exactly 1 keeps its
    original coordinates, so beta = 1 reproduces the input bit for bit.

    Raises:
        DimensionMismatchError: if beta or the motion do not fit ``topo``
    """
    _check_dimensions(motion, topo, beta)

    source = motion.coords
    out = np.array(source, copy=True)
    moved = np.zeros(topo.joint_count, dtype=bool)

    for joint in topological_order(topo):
        parent = topo.parents[joint]
        if parent is None:
            continue
        scale = beta.beta[topo.bone_of_child(joint)]
        if scale == 1.0 and not moved[parent]:
            continue
        out[:, joint, :] = scale * (source[:, joint, :] - source[:, parent, :]) + out[
            :, parent, :
        ]
        moved[joint] = True

    return motion.with_coords(out)


def reparameterize_closed_form(
    motion: MotionSample, topo: SkeletonTopology, beta: BoneScaleVector
) -> MotionSample:
    """
    Path-sum form of the reparameterization.

    q~_j = q_root + sum over root-path bones b of beta_b * d_b, evaluated as
    q_j + sum (beta_b - 1) * d_b, which is the same quantity.

    Raises:
        DimensionMismatchError: if beta or the motion do not fit ``topo``
    """
    _check_dimensions(motion, topo, beta)

    differences = bone_differences(motion, topo)
    weights = topo.path_matrix() * (beta.beta - 1.0)[None, :]
    shift = np.einsum("jb,tbc->tjc", weights, differences)
    return motion.with_coords(motion.coords + shift)


def position_jacobian(
    motion: MotionSample, topo: SkeletonTopology, joint: int, frame: int
) -> np.ndarray:
    """
    d q~_joint(frame) / d beta as an (M-1) x 3 matrix.

    Row b is the original bone vector of b if b is on the root path of
    ``joint`` and zero otherwise; it does not depend on beta.

    Raises:
        UnknownJointError, FrameOutOfRangeError
    """
    motion.check_topology(topo)
    topo.check_joint(joint)
    on_path = topo.path_matrix()[joint]
    if isinstance(frame, bool) or not 0 <= frame < motion.frames:
        raise FrameOutOfRangeError(
            message=f"Frame {frame} outside [0, {motion.frames - 1}]", frame=frame
        )
    differences = bone_differences(motion, topo)[frame]
    return on_path[:, None] * differences


def clip_to_box(beta: BoneScaleVector) -> BoneScaleVector:
    """Project every entry onto [1 - epsilon, 1 + epsilon]."""
    return beta.with_beta(np.clip(beta.beta, beta.lower, beta.upper))
