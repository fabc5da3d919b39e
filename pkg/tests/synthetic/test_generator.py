import tempfile
import unittest
from pathlib import Path

import numpy as np

from atba.boundary import suppression_radius
from atba.config import Config
from atba.errors import GeneratorError
from atba.fileio import EMBEDDING_MAGIC, read_manifest, read_matrix, read_transcript
from atba.model import segmentation_from_labels
from atba.synthetic import (
    GeneratorSpec,
    add_distractors,
    background_fraction,
    cross_fade,
    generate_corpus,
    generate_video,
    split_lengths,
)


def noisy_spec(**overrides):
    values = {"seed": 5, "videos": 4, "frames": (300, 500), "actions": (2, 5), "confusion": 0.3, "smoothing_radius": 5}
    values.update(overrides)
    return GeneratorSpec(**values)


class GeneratorSpecTests(unittest.TestCase):
    def test_infeasible_lengths(self):
        with self.assertRaisesRegex(GeneratorError, "cannot hold 5 segments"):
            GeneratorSpec(frames=(100, 100), actions=(5, 5), min_segment_length=31)

    def test_ranges_are_checked_first(self):
        with self.assertRaisesRegex(GeneratorError, "frames must be"):
            GeneratorSpec(frames=(10,))

    def test_rates_are_bounded(self):
        with self.assertRaisesRegex(GeneratorError, "confusion must lie in"):
            GeneratorSpec(confusion=1.5)

    def test_from_dict_accepts_a_profile(self):
        spec = GeneratorSpec.from_dict({"format_version": 1, "profile": "distractor", "seed": 3, "videos": 2})
        self.assertEqual((spec.seed, spec.videos, spec.distractor_rate), (3, 2, 1.0))

    def test_from_dict_rejects_unknown_keys(self):
        with self.assertRaisesRegex(GeneratorError, "unknown generator spec keys"):
            GeneratorSpec.from_dict({"noise": 0.1})

    def test_unknown_profile(self):
        with self.assertRaisesRegex(GeneratorError, "unknown generator profile"):
            GeneratorSpec.profile("blurry")


class GenerateVideoTests(unittest.TestCase):
    def test_same_seed_and_index_are_identical(self):
        spec = GeneratorSpec.profile("distractor", seed=12)
        first, second = generate_video(spec, 3), generate_video(spec, 3)
        np.testing.assert_array_equal(first.sequence.values, second.sequence.values)
        np.testing.assert_array_equal(first.embeddings.frames, second.embeddings.frames)
        self.assertEqual(first.transcript, second.transcript)

    def test_videos_do_not_depend_on_each_other(self):
        spec = GeneratorSpec.profile("clean", seed=2)
        np.testing.assert_array_equal(
            generate_video(spec, 4).truth.labels, generate_video(spec.with_overrides(videos=50), 4).truth.labels
        )

    def test_clean_profile_is_one_hot(self):
        video = generate_video(GeneratorSpec.profile("clean", seed=6), 0)
        values = video.sequence.values
        self.assertTrue(np.all((values == 0.0) | (values == 1.0)))
        np.testing.assert_array_equal(values.argmax(axis=1) + 1, video.truth.labels)

    def test_truth_follows_the_transcript(self):
        spec = GeneratorSpec.profile("distractor", seed=8)
        for index in range(10):
            video = generate_video(spec, index)
            segmentation = segmentation_from_labels(video.truth)
            self.assertEqual(segmentation.labels_in_order, video.transcript.actions)
            self.assertTrue(all(item.length >= spec.min_segment_length for item in segmentation.segments))

    def test_confusion_never_flips_the_argmax_away_from_transitions(self):
        spec = noisy_spec()
        for index in range(spec.videos):
            video = generate_video(spec, index)
            truth = video.truth.labels
            changes = np.flatnonzero(truth[1:] != truth[:-1]) + 1
            far = np.ones(truth.size, dtype=bool)
            for change in changes:
                far[max(0, change - spec.smoothing_radius) : change + spec.smoothing_radius] = False
            predicted = video.sequence.values.argmax(axis=1) + 1
            np.testing.assert_array_equal(predicted[far], truth[far])

    def test_distractors_use_classes_outside_the_transcript(self):
        spec = GeneratorSpec.profile("distractor", seed=1)
        outside = []
        for index in range(5):
            video = generate_video(spec, index)
            predicted = set((video.sequence.values.argmax(axis=1) + 1).tolist())
            outside.append(bool(predicted - set(video.transcript.actions)))
        self.assertTrue(any(outside))

    def test_distractor_edges_stay_outside_the_suppression_radius(self):
        spec = GeneratorSpec.profile("distractor")
        mu = Config().mu
        events = 0
        for index in range(40):
            rng = np.random.default_rng(index)
            frames = int(rng.integers(*spec.frames))
            segments = int(rng.integers(2, 7))
            labels = list(range(1, segments + 1))
            lengths = split_lengths(frames, segments, spec.min_segment_length, spec.length_concentration, rng)
            truth = np.repeat(np.asarray(labels), lengths)
            probabilities = np.zeros((frames, spec.classes))
            probabilities[np.arange(frames), truth - 1] = 1.0
            events += add_distractors(spec, rng, probabilities, labels, lengths, "video")

            outsiders = np.flatnonzero(probabilities.argmax(axis=1) + 1 > segments)
            changes = np.flatnonzero(truth[1:] != truth[:-1]) + 1
            if outsiders.size:
                nearest = np.abs(outsiders[:, None] - changes[None, :]).min()
                self.assertGreater(nearest, suppression_radius(frames, segments, mu), index)
        self.assertGreater(events, 20)

    def test_background_rate_is_calibrated(self):
        spec = GeneratorSpec(
            seed=3, videos=50, frames=(300, 600), actions=(3, 5), classes=6, background=1,
            background_rate=0.6, min_segment_length=20,
        )
        videos = [generate_video(spec, index) for index in range(spec.videos)]
        self.assertAlmostEqual(background_fraction(videos, 1), 0.6, delta=0.1)
        for video in videos:
            segments = segmentation_from_labels(video.truth).labels_in_order
            self.assertFalse(any(a == b == 1 for a, b in zip(segments, segments[1:])))

    def test_cross_fade_spans_the_radius(self):
        probabilities = np.zeros((100, 2))
        probabilities[:50, 0] = 1.0
        probabilities[50:, 1] = 1.0
        cross_fade(probabilities, 10)
        np.testing.assert_array_equal(probabilities[44], [1.0, 0.0])
        np.testing.assert_array_equal(probabilities[55], [0.0, 1.0])
        np.testing.assert_allclose(probabilities[45:55, 1], (np.arange(10) + 0.5) / 10)
        np.testing.assert_allclose(probabilities.sum(axis=1), 1.0)

    def test_negative_index(self):
        with self.assertRaises(GeneratorError):
            generate_video(GeneratorSpec(), -1)


class GenerateCorpusTests(unittest.TestCase):
    def test_empty_corpus_writes_an_empty_manifest(self):
        with tempfile.TemporaryDirectory() as tmp:
            generate_corpus(GeneratorSpec(videos=0), tmp)
            self.assertEqual(read_manifest(Path(tmp) / "manifest.json")["videos"], [])

    def test_corpora_from_one_spec_are_identical(self):
        spec = GeneratorSpec.profile("clean", seed=7, videos=3)
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            generate_corpus(spec, first, threads=1)
            generate_corpus(spec, second, threads=3)
            self.assertEqual(
                (Path(first) / "manifest.json").read_text(), (Path(second) / "manifest.json").read_text()
            )
            name = "probs/video_00002.bin"
            self.assertEqual((Path(first) / name).read_bytes(), (Path(second) / name).read_bytes())

    def test_corpus_layout(self):
        spec = GeneratorSpec.profile("clean", seed=7, videos=2)
        with tempfile.TemporaryDirectory() as tmp:
            manifest = generate_corpus(spec, tmp)
            entry = manifest["videos"][1]
            self.assertEqual(entry["id"], "video_00001")
            transcript = read_transcript(Path(tmp) / entry["files"]["transcript"])
            self.assertEqual(transcript.M, entry["M"])
            frames = read_matrix(Path(tmp) / entry["files"]["frame_embeddings"], EMBEDDING_MAGIC)
            self.assertEqual(frames.shape, (entry["T"], spec.embedding_dim))
            self.assertTrue((Path(tmp) / "vocabulary.json").exists())


if __name__ == "__main__":
    unittest.main()
