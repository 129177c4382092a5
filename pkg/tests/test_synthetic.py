"""
Tests for the synthetic skeleton action generator.
"""

import re

import numpy as np
import pytest

from services.reparam import bone_lengths
from services.synthetic import (
    SyntheticSpec,
    forward_kinematics,
    generate_synthetic_dataset,
    motion_groups,
    rest_offsets_for,
)
from storage.service import storage_service
from tests.helpers import NTU25_PATH, branch_topology, chain_topology
from utils.error_handling import BadSpecError


class TestSyntheticSpec:
    def test_rejects_bad_values(self):
        with pytest.raises(BadSpecError):
            SyntheticSpec(class_count=1)
        with pytest.raises(BadSpecError):
            SyntheticSpec(noise_std=-0.1)
        with pytest.raises(BadSpecError):
            SyntheticSpec(frames=0)

    def test_reports_every_problem(self):
        with pytest.raises(BadSpecError) as info:
            SyntheticSpec(class_count=0, samples_per_class=0)
        assert "class_count" in info.value.message
        assert "samples_per_class" in info.value.message

    def test_unknown_fields(self):
        with pytest.raises(BadSpecError):
            SyntheticSpec.from_dict({"classes": 3})

    def test_dict_round_trip(self):
        spec = SyntheticSpec(class_count=3, frames=12)
        assert SyntheticSpec.from_dict(spec.to_dict()) == spec


class TestKinematics:
    def test_identity_rotations_give_rest_pose(self):
        topo = branch_topology()
        offsets = rest_offsets_for(topo, seed=0)
        rotations = np.tile(np.eye(3), (2, topo.bone_count, 1, 1))
        root = np.zeros((2, 3))
        positions = forward_kinematics(topo, offsets, rotations, root)
        for parent, child in topo.edges():
            np.testing.assert_allclose(
                positions[:, child] - positions[:, parent], np.tile(offsets[child], (2, 1))
            )

    def test_random_offsets_have_fixed_length(self):
        offsets = rest_offsets_for(chain_topology(4), seed=3)
        np.testing.assert_allclose(np.linalg.norm(offsets[1:], axis=1), 0.15)

    def test_groups_cover_every_bone_once(self):
        for topo in (storage_service.load_topology(NTU25_PATH), chain_topology(5)):
            bones = sorted(int(b) for group in motion_groups(topo) for b in group)
            assert bones == list(range(topo.bone_count))


class TestGenerator:
    """Generated datasets on the bundled 25-joint skeleton."""

    def setup_method(self):
        self.topo = storage_service.load_topology(NTU25_PATH)
        self.spec = SyntheticSpec(class_count=3, samples_per_class=10, frames=8)

    def test_shapes_and_ids(self):
        dataset = generate_synthetic_dataset(self.spec, self.topo, seed=1)
        assert len(dataset.samples) == 30
        assert dataset.labels.class_count == 3
        for sample in dataset.samples:
            assert sample.coords.shape == (8, 25, 3)
            assert re.fullmatch(r"c\d{3}_s\d{4}", sample.sample_id)
        assert dataset.samples[12].sample_id == "c001_s0002"
        assert dataset.samples[12].label == 1

    def test_same_seed_same_dataset(self):
        a = generate_synthetic_dataset(self.spec, self.topo, seed=4)
        b = generate_synthetic_dataset(self.spec, self.topo, seed=4)
        c = generate_synthetic_dataset(self.spec, self.topo, seed=5)
        for x, y in zip(a.samples, b.samples):
            assert np.array_equal(x.coords, y.coords)
        assert a.splits == b.splits
        assert not np.array_equal(a.samples[0].coords, c.samples[0].coords)

    def test_bone_lengths_match_rest_skeleton(self):
        """Motions are rigid per bone: lengths never vary over time."""
        dataset = generate_synthetic_dataset(self.spec, self.topo, seed=2)
        expected = np.linalg.norm(np.asarray(self.topo.rest_offsets)[self.topo.child_of_bone], axis=1)
        for sample in dataset.samples[:5]:
            lengths = bone_lengths(sample, self.topo)
            np.testing.assert_allclose(lengths, np.tile(expected, (8, 1)), atol=1e-9)

    def test_split_is_stratified(self):
        dataset = generate_synthetic_dataset(self.spec, self.topo, seed=2)
        all_ids = sorted(s.sample_id for s in dataset.samples)
        split_ids = sorted(sid for ids in dataset.splits.values() for sid in ids)
        assert split_ids == all_ids
        for name, per_class in (("train", 8), ("val", 1), ("test", 1)):
            members = dataset.split(name)
            for label in range(3):
                assert sum(1 for s in members if s.label == label) == per_class

    def test_half_sizes_round_up(self):
        """Five per class: 4 train, 0.5 val rounds up to 1, nothing left for test."""
        spec = SyntheticSpec(class_count=3, samples_per_class=5, frames=8)
        dataset = generate_synthetic_dataset(spec, self.topo, seed=2)
        assert [len(dataset.splits[k]) for k in ("train", "val", "test")] == [12, 3, 0]

    def test_topology_without_rest_offsets(self):
        dataset = generate_synthetic_dataset(self.spec, branch_topology(), seed=0)
        assert dataset.samples[0].coords.shape == (8, 5, 3)

    def test_single_joint_skeleton(self):
        with pytest.raises(BadSpecError):
            generate_synthetic_dataset(self.spec, chain_topology(1), seed=0)

    def test_noise_free_classes_are_separable(self):
        """Without jitter every class is one motion; a centroid rule is exact."""
        spec = SyntheticSpec(
            class_count=2,
            samples_per_class=10,
            frames=8,
            noise_std=0.0,
            phase_jitter=0.0,
            amplitude_jitter=0.0,
        )
        dataset = generate_synthetic_dataset(spec, self.topo, seed=6)
        train = dataset.split("train")
        centroids = np.stack(
            [np.mean([s.coords for s in train if s.label == c], axis=0) for c in range(2)]
        )
        for sample in dataset.split("test"):
            distances = np.linalg.norm((centroids - sample.coords).reshape(2, -1), axis=1)
            assert int(np.argmin(distances)) == sample.label
