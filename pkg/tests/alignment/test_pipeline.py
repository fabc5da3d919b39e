import unittest

import numpy as np

from atba.alignment import combine_scores, score_transitions
from atba.boundary import score_boundaries, select_candidates
from atba.config import Config
from atba.evaluation import pseudo_label_accuracy
from atba.model import ProbabilitySequence, PseudoLabels, Transcript
from atba.pipeline import atba_pipeline, downsample_sequence, to_original_frame, upsample_labels
from atba.synthetic import GeneratorSpec, generate_video


def one_hot(labels, classes):
    values = np.zeros((len(labels), classes))
    values[np.arange(len(labels)), np.asarray(labels) - 1] = 1.0
    return ProbabilitySequence(values)


def distractor_video():
    """Class 1 for frames 1..149 with a class-3 excursion over 50..79, then class 2."""
    labels = np.ones(300, dtype=int)
    labels[49:79] = 3
    labels[149:] = 2
    truth = np.ones(300, dtype=int)
    truth[149:] = 2
    return one_hot(labels, 3), Transcript((1, 2), video_id="adversarial"), truth


def lookalike_video():
    """A sharp but weak 1->2 change at frame 161 after a gradual class-2 look-alike over frames 61..114.

    Each action keeps only 0.3 of the mass; the rest sits on a segment-specific
    class (3, then 4), so the real change is sharp while the ramp is not.
    """
    first, peak, second = np.array([0.3, 0, 0.7, 0]), np.array([0, 1.0, 0, 0]), np.array([0, 0.3, 0, 0.7])
    values = np.tile(first, (240, 1))
    values[160:] = second
    up = ((np.arange(12) + 0.5) / 12)[:, None]
    values[60:72] = (1 - up) * first + up * peak
    values[72:102] = peak
    values[102:114] = (1 - up) * peak + up * first
    truth = np.ones(240, dtype=int)
    truth[160:] = 2
    return ProbabilitySequence(values), Transcript((1, 2), video_id="lookalike"), truth


class PipelineTests(unittest.TestCase):
    def test_single_action_gives_constant_labels(self):
        sequence = ProbabilitySequence(np.full((12, 3), 1 / 3))
        result = atba_pipeline(sequence, Transcript((2,)), Config())
        np.testing.assert_array_equal(result.labels.labels, [2] * 12)
        self.assertEqual(result.diagnostics.K, 0)

    def test_noise_free_videos_are_recovered_exactly(self):
        spec = GeneratorSpec.profile("clean", seed=4, videos=50)
        for index in range(spec.videos):
            video = generate_video(spec, index)
            result = atba_pipeline(video.sequence, video.transcript, Config())
            self.assertEqual(pseudo_label_accuracy(result.labels, video.truth), 100.0, msg=f"video {index}")
            self.assertIsNone(result.diagnostics.fallback)

    def test_distractor_is_not_aligned(self):
        sequence, transcript, truth = distractor_video()
        result = atba_pipeline(sequence, transcript, Config())
        np.testing.assert_array_equal(result.labels.labels, truth)
        self.assertEqual(result.diagnostics.boundaries, [150])
        self.assertGreaterEqual(result.diagnostics.K, 2)

    def test_transition_only_fusion(self):
        sequence, transcript, truth = distractor_video()
        result = atba_pipeline(sequence, transcript, Config(score_fusion="transition-only"))
        self.assertEqual(result.diagnostics.score_fusion, "transition-only")
        np.testing.assert_array_equal(result.labels.labels, truth)

    def test_boundary_scores_overrule_a_gradual_lookalike(self):
        sequence, transcript, truth = lookalike_video()
        misled = atba_pipeline(sequence, transcript, Config(score_fusion="transition-only"))
        fused = atba_pipeline(sequence, transcript, Config())
        self.assertLess(misled.diagnostics.boundaries[0], 115)
        self.assertLess(pseudo_label_accuracy(misled.labels, PseudoLabels(truth)), 70.0)
        self.assertEqual(fused.diagnostics.boundaries, [161])
        np.testing.assert_array_equal(fused.labels.labels, truth)

    def test_too_few_candidates_fall_back_to_uniform(self):
        sequence = ProbabilitySequence(np.full((3, 5), 0.2))
        result = atba_pipeline(sequence, Transcript((1, 2, 3, 4, 5)), Config())
        self.assertEqual(result.diagnostics.fallback, "uniform")
        np.testing.assert_array_equal(result.labels.labels, [1, 2, 3])

    def test_diagnostics_are_serializable(self):
        sequence, transcript, _ = distractor_video()
        payload = atba_pipeline(sequence, transcript, Config()).diagnostics.to_dict()
        self.assertEqual(payload["video_id"], "adversarial")
        self.assertEqual(payload["K"], len(payload["candidates"]))
        self.assertLess(payload["alignment_cost"], 0.0)

    def test_alignment_cost_belongs_to_the_unrefined_boundaries(self):
        sequence, transcript, _ = lookalike_video()
        config = Config()
        diagnostics = atba_pipeline(sequence, transcript, config).diagnostics
        self.assertEqual(diagnostics.aligned_boundaries, [160])
        self.assertEqual(diagnostics.boundaries, [161])

        boundary = score_boundaries(sequence, config)
        candidates = select_candidates(boundary, transcript, config)
        scores = combine_scores(score_transitions(sequence, transcript, candidates, config), boundary, candidates)
        rows = [candidates.timestamps.index(frame) for frame in diagnostics.aligned_boundaries]
        recomputed = -sum(scores.values[row, r] for r, row in enumerate(rows))
        self.assertAlmostEqual(diagnostics.alignment_cost, recomputed, delta=1e-12)


class ResamplingTests(unittest.TestCase):
    def test_downsampling_keeps_every_nth_frame(self):
        sequence = one_hot([1, 1, 2, 2, 2, 1, 1], 2)
        np.testing.assert_array_equal(downsample_sequence(sequence, 3).values.argmax(axis=1) + 1, [1, 2, 1])

    def test_upsampling_restores_the_length(self):
        sequence = one_hot([1, 1, 2, 2, 2, 1, 1], 2)
        result = atba_pipeline(sequence, Transcript((1, 2, 1)), Config(downsample=3, w_b=3, w_a=3))
        self.assertEqual(result.labels.T, 7)
        self.assertEqual(result.diagnostics.processed_frames, 3)

    def test_upsample_labels_truncates(self):
        labels = upsample_labels(PseudoLabels(np.array([1, 2])), 3, 5)
        np.testing.assert_array_equal(labels.labels, [1, 1, 1, 2, 2])

    def test_original_frame_mapping(self):
        self.assertEqual(to_original_frame(1, 10), 1)
        self.assertEqual(to_original_frame(4, 10), 31)

    def test_downsampled_clean_video_stays_close(self):
        spec = GeneratorSpec.profile("clean", seed=9, videos=1)
        video = generate_video(spec, 0)
        result = atba_pipeline(video.sequence, video.transcript, Config(downsample=2))
        self.assertEqual(result.labels.T, video.truth.T)
        self.assertGreaterEqual(pseudo_label_accuracy(result.labels, video.truth), 98.0)


if __name__ == "__main__":
    unittest.main()
