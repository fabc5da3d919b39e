import contextlib
import io
import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from atba import cli
from atba.fileio import write_labels, write_probabilities, write_transcript
from atba.model import ProbabilitySequence, PseudoLabels, Transcript


def run(*argv):
    """Run the CLI and return (exit code, stdout, stderr)."""
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        with patch("atba.config.load_dotenv"):
            code = cli.main(["--log-level", "ERROR", *argv])
    return code, stdout.getvalue(), stderr.getvalue()


def step_video(directory):
    values = np.zeros((120, 3))
    values[:60, 0] = 1.0
    values[60:, 2] = 1.0
    probs = Path(directory) / "video.bin"
    transcript = Path(directory) / "video.json"
    write_probabilities(probs, ProbabilitySequence(values))
    write_transcript(transcript, Transcript((1, 3), video_id="step"))
    return probs, transcript


class GenerateAndAlignTests(unittest.TestCase):
    def test_noise_free_corpus_aligns_perfectly(self):
        with tempfile.TemporaryDirectory() as tmp:
            corpus, pseudo = Path(tmp) / "corpus", Path(tmp) / "pseudo"
            code, _, _ = run("generate", "--profile", "clean", "--videos", "4", "--out", str(corpus))
            self.assertEqual(code, 0)
            code, out, _ = run("--format", "json", "--threads", "2", "align", "--corpus", str(corpus), "--out", str(pseudo))
            self.assertEqual(code, 0)
            report = json.loads(out)
            self.assertEqual(report["aligned"], 4)
            self.assertAlmostEqual(report["P.L."], 100.0)
            self.assertTrue((pseudo / "report.json").exists())
            self.assertEqual(len(list((pseudo / "labels").glob("*.json"))), 4)

            code, out, _ = run("--format", "json", "evaluate", "--pred", str(pseudo / "labels"), "--truth", str(corpus / "labels"))
            self.assertEqual(code, 0)
            self.assertAlmostEqual(json.loads(out)["MoF"], 100.0)

    def test_generate_from_spec_file_with_seed_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            spec = Path(tmp) / "spec.json"
            spec.write_text(json.dumps({"profile": "clean", "videos": 1, "seed": 1}))
            code, out, _ = run("--format", "json", "--seed", "42", "generate", "--spec", str(spec), "--out", tmp + "/c")
            self.assertEqual(code, 0)
            self.assertEqual(json.loads(out)["seed"], 42)
            manifest = json.loads((Path(tmp) / "c" / "manifest.json").read_text())
            self.assertEqual(manifest["spec"]["seed"], 42)

    def test_failed_video_is_reported_and_others_continue(self):
        with tempfile.TemporaryDirectory() as tmp:
            corpus = Path(tmp) / "corpus"
            run("generate", "--profile", "clean", "--videos", "2", "--out", str(corpus))
            (corpus / "probs" / "video_00000.bin").write_bytes(b"ATBAPSEQ")
            code, out, _ = run("--format", "json", "align", "--corpus", str(corpus))
            self.assertEqual(code, 1)
            report = json.loads(out)
            self.assertEqual(report["aligned"], 1)
            self.assertEqual(report["failed"]["video_00000"]["error"], "format")

    def test_single_video_with_baseline(self):
        with tempfile.TemporaryDirectory() as tmp:
            probs, transcript = step_video(tmp)
            out_path = Path(tmp) / "labels.json"
            code, out, _ = run(
                "--format", "json", "align", "--probs", str(probs), "--transcript", str(transcript),
                "--baseline", "class-agnostic", "--out", str(out_path),
            )
            self.assertEqual(code, 0)
            payload = json.loads(out)
            self.assertEqual(payload["diagnostics"]["score_fusion"], "class-agnostic")
            self.assertEqual(payload["diagnostics"]["boundaries"], [61])
            self.assertEqual(json.loads(out_path.read_text())["video_id"], "step")

    def test_viterbi_oracle_baseline(self):
        with tempfile.TemporaryDirectory() as tmp:
            probs, transcript = step_video(tmp)
            code, out, _ = run("--format", "json", "align", "--probs", str(probs), "--transcript", str(transcript), "--baseline", "viterbi-oracle")
            self.assertEqual(code, 0)
            self.assertEqual(json.loads(out)["labels"], [1] * 60 + [3] * 60)

    def test_align_needs_inputs(self):
        code, _, err = run("align")
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "validation")


class ScoreAndEvaluateTests(unittest.TestCase):
    def test_score_prints_one_line_per_frame(self):
        with tempfile.TemporaryDirectory() as tmp:
            probs, transcript = step_video(tmp)
            code, out, _ = run("score", "--probs", str(probs), "--transcript", str(transcript))
            self.assertEqual(code, 0)
            lines = out.strip().splitlines()
            self.assertEqual(len(lines), 121)
            self.assertTrue(lines[0].startswith("1 "))
            self.assertTrue(lines[-1].startswith("# candidates"))

    def test_score_rejects_a_bad_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            probs, _ = step_video(tmp)
            config = Path(tmp) / "config.json"
            config.write_text(json.dumps({"w_b": 4}))
            code, _, err = run("score", "--probs", str(probs), "--config", str(config))
            self.assertEqual(code, 1)
            self.assertIn("w_b must be an odd integer", err)

    def test_evaluate_lists_missing_ids(self):
        with tempfile.TemporaryDirectory() as tmp:
            pred, truth = Path(tmp) / "pred", Path(tmp) / "truth"
            write_labels(pred / "a.json", "a", PseudoLabels(np.array([1, 2])))
            write_labels(truth / "a.json", "a", PseudoLabels(np.array([1, 2])))
            write_labels(truth / "b.json", "b", PseudoLabels(np.array([1, 1])))
            code, _, err = run("evaluate", "--pred", str(pred), "--truth", str(truth))
            self.assertEqual(code, 1)
            self.assertIn("no predictions for videos: b", json.loads(err.strip().splitlines()[-1])["message"])

    def test_evaluate_from_probabilities(self):
        with tempfile.TemporaryDirectory() as tmp:
            probs, truth = Path(tmp) / "probs", Path(tmp) / "truth"
            write_probabilities(probs / "v.bin", ProbabilitySequence(np.array([[0.9, 0.1], [0.3, 0.7], [0.6, 0.4]])))
            write_labels(truth / "v.json", "v", PseudoLabels(np.array([1, 2, 2])))
            code, out, _ = run("--format", "json", "evaluate", "--probs", str(probs), "--truth", str(truth), "--background", "1")
            self.assertEqual(code, 0)
            report = json.loads(out)
            self.assertAlmostEqual(report["MoF"], 200 / 3)
            self.assertAlmostEqual(report["MoF-Bg"], 50.0)

    def test_missing_file_is_an_io_error(self):
        code, _, err = run("score", "--probs", "/nonexistent/video.bin")
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["error"], "io")

    def test_malformed_thread_count_in_the_environment_is_a_config_error(self):
        with tempfile.TemporaryDirectory() as tmp, patch.dict("os.environ", {"ATBA_THREADS": "x"}):
            probs, _ = step_video(tmp)
            code, _, err = run("score", "--probs", str(probs))
            self.assertEqual(code, 1)
            error = json.loads(err.strip().splitlines()[-1])
            self.assertEqual(error["error"], "config")
            self.assertIn("ATBA_THREADS must be an integer", error["message"])

            code, _, _ = run("--threads", "2", "score", "--probs", str(probs))
            self.assertEqual(code, 0)

    def test_unknown_log_level_is_a_config_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            probs, _ = step_video(tmp)
            code, _, err = run("--log-level", "LOUD", "score", "--probs", str(probs))
            self.assertEqual(code, 1)
            self.assertIn("unknown log level", json.loads(err.strip().splitlines()[-1])["message"])


class BenchCommandTests(unittest.TestCase):
    def test_oracle_equivalence_writes_json(self):
        with tempfile.TemporaryDirectory() as tmp:
            out_path = Path(tmp) / "bench.json"
            code, out, _ = run("bench", "--suite", "oracle-equivalence", "--instances", "25", "--out", str(out_path))
            self.assertEqual(code, 0)
            document = json.loads(out_path.read_text())
            self.assertEqual(document["summary"]["costs_equal"], 25)
            self.assertIn("costs_equal", out)


if __name__ == "__main__":
    unittest.main()
