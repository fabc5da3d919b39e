import os
import unittest

from atba.bench import BenchResult, ablation, alignment_scaling, oracle_equivalence, run_suite, template_variant
from atba.errors import ConfigError

SLOW = bool(os.getenv("ATBA_SLOW_TESTS"))


class BenchTests(unittest.TestCase):
    def test_unknown_suite(self):
        with self.assertRaisesRegex(ConfigError, "unknown bench suite"):
            run_suite("throughput")

    def test_oracle_equivalence_summary(self):
        result = oracle_equivalence(seed=3, instances=50)
        self.assertEqual(result.summary["costs_equal"], 50)
        self.assertEqual(result.summary["matchings_equal_when_unique"], result.summary["unique_optima"])
        self.assertEqual(result.rows, [])

    def test_alignment_scaling_rows(self):
        result = alignment_scaling(frames=(300, 600), candidates=8, actions=4, classes=5, repeats=1)
        self.assertEqual([row["T"] for row in result.rows], [300, 600])
        self.assertIn("alignment_ratio_largest_vs_next", result.summary)
        self.assertIn("alignment_s", result.table())

    def test_template_variant_rows(self):
        result = template_variant(videos=2)
        self.assertEqual([row["normalization"] for row in result.rows], ["area", "support"])

    def test_fusion_never_trails_transition_scores_on_a_small_corpus(self):
        result = ablation(seed=4, videos=16)
        self.assertEqual([row["variant"] for row in result.rows], ["class-agnostic", "transition-only", "combined"])
        self.assertGreaterEqual(result.summary["pl_combined"], result.summary["pl_transition-only"])
        self.assertGreater(result.summary["pl_combined"], result.summary["pl_class-agnostic"])

    def test_result_serializes(self):
        result = BenchResult("demo", rows=[{"a": 1.0}], summary={"b": 2})
        self.assertEqual(result.to_dict(), {"suite": "demo", "rows": [{"a": 1.0}], "summary": {"b": 2}})


@unittest.skipUnless(SLOW, "set ATBA_SLOW_TESTS=1 to run timing and corpus campaigns")
class AcceptanceCampaignTests(unittest.TestCase):
    def test_dynamic_program_equals_enumeration_on_1000_instances(self):
        result = run_suite("oracle-equivalence", instances=1000)
        self.assertEqual(result.summary["costs_equal"], 1000)
        self.assertEqual(result.summary["matchings_equal_when_unique"], result.summary["unique_optima"])
        self.assertLess(result.summary["seconds"], 10.0)

    def test_alignment_time_is_flat_in_frames(self):
        result = run_suite("alignment-scaling")
        self.assertLess(result.summary["alignment_ratio_largest_vs_next"], 2.0)
        self.assertGreaterEqual(result.summary["scoring_loglog_slope"], 0.8)
        self.assertLessEqual(result.summary["scoring_loglog_slope"], 1.2)

    def test_segmentation_oracle_is_much_slower(self):
        result = run_suite("oracle-timing")
        self.assertGreaterEqual(result.summary["speedup"], 50.0)

    def test_ablation_direction(self):
        result = run_suite("ablation", videos=200, threads=os.cpu_count() or 1)
        self.assertGreaterEqual(result.summary["pl_combined"] - result.summary["pl_class-agnostic"], 10.0)
        self.assertGreaterEqual(result.summary["pl_combined"], result.summary["pl_transition-only"])

    def test_ablation_direction_holds_across_seeds(self):
        for seed in (1, 2, 3):
            result = run_suite("ablation", seed=seed, videos=200, threads=os.cpu_count() or 1)
            self.assertGreaterEqual(result.summary["pl_combined"], result.summary["pl_transition-only"], seed)


if __name__ == "__main__":
    unittest.main()
