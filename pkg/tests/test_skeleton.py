"""
Unit tests for skeleton data models (SkeletonTopology, MotionSample, LabelSet).
Tests tree validation, bone indexing, root paths and motion integrity.
"""

import unittest

import numpy as np

from models.skeleton import LabelSet, MotionSample, SkeletonTopology
from storage.service import storage_service
from tests.helpers import NTU25_PATH, branch_topology
from utils.error_handling import (
    BadBoneIndexError,
    CycleError,
    DimensionMismatchError,
    DisconnectedJointError,
    UnknownJointError,
    ValidationError,
)


class TestSkeletonTopology(unittest.TestCase):
    """Test cases for SkeletonTopology."""

    def test_bone_ids_follow_child_joint_rank(self):
        """Bone b ends at the (b+1)-th non-root joint."""
        topo = branch_topology()
        self.assertEqual(topo.bone_count, 4)
        self.assertEqual(topo.edges(), [(0, 1), (1, 2), (0, 3), (3, 4)])
        self.assertEqual(topo.bone_of_child(4), 3)
        self.assertEqual(topo.bone_of_child(0), -1)

    def test_cycle_is_rejected(self):
        """Test that a parent cycle names a joint on it."""
        with self.assertRaises(CycleError) as context:
            SkeletonTopology(joint_count=3, root=0, parents=[None, 2, 1])
        self.assertIn(context.exception.joint, (1, 2))

    def test_root_with_parent_is_rejected(self):
        with self.assertRaises(CycleError):
            SkeletonTopology(joint_count=2, root=0, parents=[1, 0])

    def test_disconnected_joint_is_rejected(self):
        """Test that a second parentless joint is reported."""
        with self.assertRaises(DisconnectedJointError) as context:
            SkeletonTopology(joint_count=3, root=0, parents=[None, None, 0])
        self.assertEqual(context.exception.joint, 1)

        with self.assertRaises(DisconnectedJointError):
            SkeletonTopology(joint_count=2, root=0, parents=[None, 5])

    def test_explicit_bone_list_must_match_tree(self):
        with self.assertRaises(BadBoneIndexError) as context:
            SkeletonTopology(
                joint_count=3, root=0, parents=[None, 0, 1], bones=[(0, 1), (0, 2)]
            )
        self.assertEqual(context.exception.bone, 1)

        with self.assertRaises(BadBoneIndexError):
            SkeletonTopology(joint_count=3, root=0, parents=[None, 0, 1], bones=[(0, 1)])

    def test_explicit_bone_order_is_kept(self):
        topo = SkeletonTopology(
            joint_count=3, root=0, parents=[None, 0, 1], bones=[(1, 2), (0, 1)]
        )
        self.assertEqual(topo.bone_of_child(2), 0)
        self.assertEqual(topo.path_to_root(2), [1, 0])

    def test_parts_must_be_disjoint_and_in_range(self):
        """Test validation of the part map."""
        with self.assertRaises(BadBoneIndexError):
            SkeletonTopology(
                joint_count=3, root=0, parents=[None, 0, 1], parts={"a": [0], "b": [0, 1]}
            )
        with self.assertRaises(BadBoneIndexError):
            SkeletonTopology(joint_count=3, root=0, parents=[None, 0, 1], parts={"a": [2]})

    def test_topological_order_breaks_ties_by_index(self):
        topo = SkeletonTopology(joint_count=4, root=0, parents=[None, 3, 0, 0])
        self.assertEqual(topo.topological_order(), [0, 2, 3, 1])

    def test_path_to_root(self):
        """Test root paths are ordered from the root outwards."""
        topo = branch_topology()
        self.assertEqual(topo.path_to_root(0), [])
        self.assertEqual(topo.path_to_root(2), [0, 1])
        self.assertEqual(topo.path_to_root(4), [2, 3])

        with self.assertRaises(UnknownJointError):
            topo.path_to_root(5)
        with self.assertRaises(UnknownJointError):
            topo.path_to_root(-1)

    def test_path_matrix(self):
        topo = branch_topology()
        expected = np.array(
            [
                [0, 0, 0, 0],
                [1, 0, 0, 0],
                [1, 1, 0, 0],
                [0, 0, 1, 0],
                [0, 0, 1, 1],
            ],
            dtype=float,
        )
        np.testing.assert_array_equal(topo.path_matrix(), expected)

    def test_resolve_parts(self):
        """Test part expressions resolve to bone sets."""
        topo = branch_topology()
        self.assertIsNone(topo.resolve_parts("all"))
        self.assertIsNone(topo.resolve_parts(None))
        self.assertEqual(topo.resolve_parts("left"), frozenset({0, 1}))
        self.assertEqual(topo.resolve_parts("left+right"), frozenset({0, 1, 2, 3}))
        with self.assertRaises(ValidationError):
            topo.resolve_parts("tail")

    def test_dict_round_trip(self):
        topo = branch_topology()
        again = SkeletonTopology.from_dict(topo.to_dict())
        self.assertEqual(again.parents, topo.parents)
        self.assertEqual(again.bones, topo.bones)
        self.assertEqual(again.parts, topo.parts)

    def test_missing_fields(self):
        with self.assertRaises(ValidationError):
            SkeletonTopology.from_dict({"joints": 3})


class TestNtu25Topology(unittest.TestCase):
    """Test the bundled 25-joint topology file."""

    def setUp(self):
        self.topo = storage_service.load_topology(NTU25_PATH)

    def test_dimensions(self):
        self.assertEqual(self.topo.joint_count, 25)
        self.assertEqual(self.topo.bone_count, 24)
        self.assertEqual(self.topo.root, 0)
        self.assertEqual(len(self.topo.parts), 7)

    def test_parts_cover_every_bone_once(self):
        """The seven parts partition the 24 bones."""
        covered = sorted(b for bones in self.topo.parts.values() for b in bones)
        self.assertEqual(covered, list(range(24)))

    def test_hips_are_children_of_root(self):
        self.assertEqual(self.topo.parent(12), 0)
        self.assertEqual(self.topo.parent(16), 0)


class TestMotionSample(unittest.TestCase):
    """Test cases for MotionSample."""

    def test_valid_motion(self):
        coords = np.ones((4, 5, 3))
        coords[3] = 0.0
        motion = MotionSample(coords=coords, label=2, valid_frames=3, sample_id="m0")
        self.assertEqual(motion.frames, 4)
        self.assertEqual(motion.joint_count, 5)
        self.assertEqual(motion.valid_coords.shape, (3, 5, 3))
        self.assertFalse(motion.coords.flags.writeable)

    def test_valid_frames_defaults_to_all(self):
        motion = MotionSample(coords=np.zeros((3, 2, 3)), label=0)
        self.assertEqual(motion.valid_frames, 3)

    def test_nonzero_padding_is_rejected(self):
        """Test frames beyond valid_frames must be zero."""
        with self.assertRaises(ValidationError):
            MotionSample(coords=np.ones((4, 5, 3)), label=0, valid_frames=3)

    def test_non_finite_coordinates_are_rejected(self):
        coords = np.zeros((2, 2, 3))
        coords[0, 0, 0] = np.nan
        with self.assertRaises(ValidationError):
            MotionSample(coords=coords, label=0)

    def test_wrong_shape_is_rejected(self):
        with self.assertRaises(DimensionMismatchError):
            MotionSample(coords=np.zeros((2, 2, 2)), label=0)

    def test_negative_label_is_rejected(self):
        with self.assertRaises(ValidationError):
            MotionSample(coords=np.zeros((2, 2, 3)), label=-1)

    def test_frame_count_mismatch_on_load(self):
        record = {"label": 0, "frames": 3, "coords": np.zeros((2, 2, 3)).tolist()}
        with self.assertRaises(DimensionMismatchError):
            MotionSample.from_dict(record)

    def test_default_id_on_load(self):
        record = {"label": 1, "coords": np.zeros((2, 2, 3)).tolist()}
        self.assertEqual(MotionSample.from_dict(record, default_id="raw:0").sample_id, "raw:0")

    def test_check_topology(self):
        motion = MotionSample(coords=np.zeros((2, 3, 3)), label=0)
        with self.assertRaises(DimensionMismatchError):
            motion.check_topology(branch_topology())


class TestLabelSet(unittest.TestCase):
    def test_one_hot(self):
        labels = LabelSet(class_count=3)
        np.testing.assert_array_equal(labels.one_hot(1), [0.0, 1.0, 0.0])
        with self.assertRaises(ValidationError):
            labels.one_hot(3)

    def test_names(self):
        self.assertEqual(LabelSet(class_count=2).name_of(1), "class_1")
        with self.assertRaises(ValidationError):
            LabelSet(class_count=2, names=["a"])


if __name__ == "__main__":
    unittest.main()
