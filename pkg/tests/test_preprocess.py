"""
Tests for the preprocessing pipeline: smoothing, centering, normalization,
subsampling and split handling.
"""

import unittest

import numpy as np

from models.skeleton import MotionSample
from services.preprocess import (
    NormalizationStats,
    PreprocessConfig,
    denormalize,
    fit_normalization,
    normalize,
    preprocess_pipeline,
    remap_labels,
    savitzky_golay,
    subsample_and_pad,
    translate_to_origin,
)
from tests.helpers import branch_topology, hip_topology, random_motion
from utils.error_handling import (
    EmptyDatasetError,
    NotChildOfRootError,
    PreprocessError,
    TargetTooSmallError,
    TooFewFramesError,
    ValidationError,
)


def _motion_from_signal(signal, joints=2, valid_frames=None, frames=None):
    frames = frames or len(signal)
    coords = np.zeros((frames, joints, 3))
    coords[: len(signal)] = np.asarray(signal, dtype=float)[:, None, None]
    return MotionSample(coords=coords, label=0, valid_frames=valid_frames or len(signal))


def _with_valid_coords(sample, coords):
    """Replace the valid frames of ``sample``; padding stays zero."""
    valid = np.arange(sample.frames)[:, None, None] < sample.valid_frames
    return sample.with_coords(np.where(valid, coords, 0.0))


class TestSavitzkyGolay(unittest.TestCase):
    """Five-point quadratic/cubic smoothing."""

    def test_constant_signal_is_unchanged(self):
        motion = _motion_from_signal(np.full(9, 2.5))
        np.testing.assert_allclose(savitzky_golay(motion).coords, motion.coords, atol=1e-12)

    def test_cubic_is_reproduced(self):
        t = np.arange(10, dtype=float)
        signal = 0.1 * t**3 - t**2 + 2.0 * t - 4.0
        smoothed = savitzky_golay(_motion_from_signal(signal)).coords[:, 0, 0]
        np.testing.assert_allclose(smoothed, signal, atol=1e-9)

    def test_impulse_response(self):
        """A unit impulse at frame 4 is spread with the stencil weights."""
        signal = np.zeros(9)
        signal[4] = 1.0
        smoothed = savitzky_golay(_motion_from_signal(signal)).coords[:, 0, 0]
        self.assertAlmostEqual(smoothed[4], 17.0 / 35.0)
        self.assertAlmostEqual(smoothed[3], 12.0 / 35.0)
        self.assertAlmostEqual(smoothed[2], -3.0 / 35.0)

    def test_matches_five_point_weights(self):
        signal = np.random.default_rng(3).normal(size=11)
        smoothed = savitzky_golay(_motion_from_signal(signal)).coords[:, 0, 0]
        weights = np.array([-3.0, 12.0, 17.0, 12.0, -3.0]) / 35.0
        expected = [weights @ signal[t - 2 : t + 3] for t in range(2, 9)]
        np.testing.assert_allclose(smoothed[2:9], expected, atol=1e-12)

    def test_edges_pass_through(self):
        signal = np.array([5.0, -1.0, 0.0, 0.0, 0.0, 0.0, 3.0, 7.0])
        smoothed = savitzky_golay(_motion_from_signal(signal)).coords[:, 0, 0]
        np.testing.assert_array_equal(smoothed[:2], signal[:2])
        np.testing.assert_array_equal(smoothed[-2:], signal[-2:])

    def test_filter_does_not_cascade(self):
        """Every output frame uses unfiltered neighbors."""
        signal = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        smoothed = savitzky_golay(_motion_from_signal(signal)).coords[:, 0, 0]
        self.assertAlmostEqual(smoothed[4], -3.0 / 35.0)

    def test_padding_is_kept(self):
        motion = _motion_from_signal(np.arange(6.0), valid_frames=6, frames=8)
        smoothed = savitzky_golay(motion)
        self.assertEqual(smoothed.valid_frames, 6)
        self.assertTrue(np.all(smoothed.coords[6:] == 0.0))

    def test_too_few_frames(self):
        with self.assertRaises(TooFewFramesError):
            savitzky_golay(_motion_from_signal(np.arange(4.0)))


class TestTranslateToOrigin(unittest.TestCase):
    def setUp(self):
        self.topo = hip_topology()
        self.motion = random_motion(np.random.default_rng(2), self.topo, frames=5, valid_frames=4)

    def test_root_and_hips_average_to_origin(self):
        out = translate_to_origin(self.motion, self.topo, 1, 2)
        center = out.coords[:4, [0, 1, 2]].mean(axis=1)
        np.testing.assert_allclose(center, 0.0, atol=1e-12)
        self.assertTrue(np.all(out.coords[4:] == 0.0))

    def test_hips_must_hang_from_root(self):
        with self.assertRaises(NotChildOfRootError) as context:
            translate_to_origin(self.motion, self.topo, 1, 3)
        self.assertEqual(context.exception.joint, 3)

    def test_constant_offset_is_removed(self):
        shifted = _with_valid_coords(self.motion, self.motion.coords + [4.0, -2.0, 0.5])
        np.testing.assert_allclose(
            translate_to_origin(shifted, self.topo, 1, 2).coords,
            translate_to_origin(self.motion, self.topo, 1, 2).coords,
            atol=1e-12,
        )


class TestNormalization(unittest.TestCase):
    """Pooled per-joint, per-axis statistics."""

    def setUp(self):
        rng = np.random.default_rng(9)
        self.topo = branch_topology()
        self.samples = [
            random_motion(rng, self.topo, frames=6, valid_frames=int(v)) for v in (6, 4, 5, 3)
        ]
        self.samples = [
            _with_valid_coords(s, 3.0 * s.coords + 1.0)
            for s in self.samples
        ]

    def test_normalized_frames_have_zero_mean_unit_std(self):
        stats = fit_normalization(self.samples)
        pooled = np.concatenate([normalize(s, stats).valid_coords for s in self.samples])
        self.assertLess(np.max(np.abs(pooled.mean(axis=0))), 1e-10)
        self.assertLess(np.max(np.abs(pooled.std(axis=0) - 1.0)), 1e-8)

    def test_denormalize_inverts_normalize(self):
        stats = fit_normalization(self.samples)
        for sample in self.samples:
            back = denormalize(normalize(sample, stats), stats)
            np.testing.assert_allclose(back.coords, sample.coords, atol=1e-12)

    def test_constant_channel_gets_unit_sigma(self):
        flat = [
            _with_valid_coords(s, s.coords * [1.0, 1.0, 0.0])
            for s in self.samples
        ]
        stats = fit_normalization(flat, floor=1e-6)
        np.testing.assert_array_equal(stats.sigma[:, 2], 1.0)
        self.assertEqual(stats.floored_channels, 5)

    def test_frames_are_weighted_not_samples(self):
        """One frame of 0 and three frames of 4 pool to a mean of 3."""
        short = _motion_from_signal([0.0], valid_frames=1, frames=3)
        long = _motion_from_signal([4.0, 4.0, 4.0])
        stats = fit_normalization([short, long])
        np.testing.assert_allclose(stats.mu, 3.0)
        np.testing.assert_allclose(stats.sigma, np.sqrt(3.0))

    def test_sample_order_does_not_matter(self):
        a = fit_normalization(self.samples)
        b = fit_normalization(self.samples[::-1])
        np.testing.assert_allclose(a.mu, b.mu, atol=1e-12)
        np.testing.assert_allclose(a.sigma, b.sigma, atol=1e-12)

    def test_sigma_equal_to_floor_is_kept(self):
        motion = _motion_from_signal([0.5, -0.5])
        kept = fit_normalization([motion], floor=0.5)
        np.testing.assert_array_equal(kept.sigma, 0.5)
        self.assertEqual(kept.floored_channels, 0)
        floored = fit_normalization([motion], floor=0.6)
        np.testing.assert_array_equal(floored.sigma, 1.0)

    def test_no_samples(self):
        with self.assertRaises(EmptyDatasetError):
            fit_normalization([])

    def test_stats_dict_round_trip(self):
        stats = fit_normalization(self.samples, split_ids=["a", "b"])
        again = NormalizationStats.from_dict(stats.to_dict())
        np.testing.assert_array_equal(again.mu, stats.mu)
        np.testing.assert_array_equal(again.sigma, stats.sigma)
        self.assertEqual(again.split_ids, ["a", "b"])

    def test_sigma_must_be_positive(self):
        with self.assertRaises(ValidationError):
            NormalizationStats(mu=np.zeros((2, 3)), sigma=np.zeros((2, 3)))


class TestSubsampleAndPad(unittest.TestCase):
    def test_keeps_every_interval_frame(self):
        motion = _motion_from_signal(np.arange(7.0))
        out = subsample_and_pad(motion, interval=3, target_frames=5)
        self.assertEqual(out.frames, 5)
        self.assertEqual(out.valid_frames, 3)
        np.testing.assert_array_equal(out.coords[:3, 0, 0], [0.0, 3.0, 6.0])
        self.assertTrue(np.all(out.coords[3:] == 0.0))

    def test_target_too_small(self):
        with self.assertRaises(TargetTooSmallError):
            subsample_and_pad(_motion_from_signal(np.arange(8.0)), interval=2, target_frames=3)


class TestPipeline(unittest.TestCase):
    """End-to-end pipeline over train/val/test splits."""

    def setUp(self):
        rng = np.random.default_rng(13)
        self.topo = hip_topology()
        self.dataset = []
        for index in range(12):
            motion = random_motion(rng, self.topo, frames=8, label=index % 3, sample_id=f"m{index}")
            self.dataset.append(motion)
        self.splits = {
            "train": [f"m{i}" for i in range(8)],
            "val": ["m8", "m9"],
            "test": ["m10", "m11"],
        }
        self.config = PreprocessConfig(hip_left=1, hip_right=2, interval=2)

    def test_outputs_every_split(self):
        processed, stats = preprocess_pipeline(self.dataset, self.splits, self.topo, self.config)
        self.assertEqual([len(processed[k]) for k in ("train", "val", "test")], [8, 2, 2])
        for samples in processed.values():
            for sample in samples:
                self.assertEqual(sample.frames, 4)
                self.assertEqual(sample.valid_frames, 4)
        self.assertEqual(stats.split_ids, self.splits["train"] + self.splits["val"])

    def test_statistics_ignore_the_test_split(self):
        scaled = [
            s.with_coords(s.coords * 100.0) if s.sample_id in self.splits["test"] else s
            for s in self.dataset
        ]
        _, a = preprocess_pipeline(self.dataset, self.splits, self.topo, self.config)
        _, b = preprocess_pipeline(scaled, self.splits, self.topo, self.config)
        np.testing.assert_array_equal(a.mu, b.mu)
        np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_label_remap(self):
        config = PreprocessConfig(hip_left=1, hip_right=2, interval=2, label_remap={2: 0})
        processed, _ = preprocess_pipeline(self.dataset, self.splits, self.topo, config)
        labels = {s.label for samples in processed.values() for s in samples}
        self.assertEqual(labels, {0, 1})

    def test_failures_are_collected(self):
        """Every failing sample is named, not just the first."""
        short = []
        for sample in self.dataset:
            if sample.sample_id in ("m3", "m10"):
                coords = np.array(sample.coords)
                coords[3:] = 0.0
                sample = sample.with_coords(coords, valid_frames=3)
            short.append(sample)
        with self.assertRaises(PreprocessError) as context:
            preprocess_pipeline(short, self.splits, self.topo, self.config)
        self.assertEqual([sid for sid, _ in context.exception.failures], ["m3", "m10"])

    def test_splits_must_partition(self):
        overlapping = dict(self.splits, test=["m10", "m11", "m0"])
        with self.assertRaises(ValidationError):
            preprocess_pipeline(self.dataset, overlapping, self.topo, self.config)
        missing = dict(self.splits, test=["m10"])
        with self.assertRaises(ValidationError):
            preprocess_pipeline(self.dataset, missing, self.topo, self.config)

    def test_empty_test_split(self):
        dataset = self.dataset[:10]
        splits = dict(self.splits, test=[])
        processed, stats = preprocess_pipeline(dataset, splits, self.topo, self.config)
        self.assertEqual(processed["test"], [])
        self.assertEqual(len(stats.split_ids), 10)

    def test_steps_run_in_canonical_order(self):
        """Smooth, center, normalize, then subsample; centering after normalizing differs."""
        processed, stats = preprocess_pipeline(self.dataset, self.splits, self.topo, self.config)
        fit_ids = self.splits["train"] + self.splits["val"]
        by_id = {s.sample_id: s for s in self.dataset}

        smoothed = {sid: savitzky_golay(by_id[sid]) for sid in fit_ids}
        centered = {sid: translate_to_origin(m, self.topo, 1, 2) for sid, m in smoothed.items()}
        expected_stats = fit_normalization([centered[sid] for sid in fit_ids])
        expected = subsample_and_pad(normalize(centered["m0"], expected_stats), 2, 4)
        np.testing.assert_allclose(stats.mu, expected_stats.mu, atol=1e-12)
        np.testing.assert_allclose(processed["train"][0].coords, expected.coords, atol=1e-12)

        swapped_stats = fit_normalization([smoothed[sid] for sid in fit_ids])
        swapped = translate_to_origin(normalize(smoothed["m0"], swapped_stats), self.topo, 1, 2)
        swapped = subsample_and_pad(swapped, 2, 4)
        self.assertFalse(np.allclose(swapped.coords, expected.coords))

    def test_remap_labels_keeps_unmapped(self):
        remapped = remap_labels(self.dataset[:3], {0: 5})
        self.assertEqual([s.label for s in remapped], [5, 1, 2])


if __name__ == "__main__":
    unittest.main()
