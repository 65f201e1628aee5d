"""Directional checks on the default blob workload. Slow: set HETEROFLOW_SLOW=1 to run them."""
import os
import unittest

from loaders.config_loader import ConfigLoader
from simulation.orchestrator import run_seeds
from utils.clogger import CLogger

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")
SLOW = os.environ.get("HETEROFLOW_SLOW") == "1"


def load(name, *overrides):
    return ConfigLoader(os.path.join(CONFIG_DIR, name), ["log_level=WARNING", *overrides]).get_experiment()


def flag_inversions(logger, better, better_runs, worse, worse_runs):
    """Warn about every seed where ``worse`` beat ``better``; the mean ordering is what gets asserted."""
    for ahead, behind in zip(better_runs, worse_runs):
        if ahead.summary.top_g_acc < behind.summary.top_g_acc:
            logger.warning(f"seed {ahead.seed}: {better} {ahead.summary.top_g_acc:.4f} "
                           f"< {worse} {behind.summary.top_g_acc:.4f}")


@unittest.skipUnless(SLOW, "set HETEROFLOW_SLOW=1 to run the directional experiments")
class TestDirectional(unittest.TestCase):
    def setUp(self):
        self.logger = CLogger.for_component("Directional")

    def test_distillation_improves_rolling_baseline(self):
        seeds = [0, 1, 2]
        baseline_runs, baseline = run_seeds(load("blobs_rolling.json"), seeds)
        distilled_runs, distilled = run_seeds(load("blobs_rolling_dfrd.json"), seeds)
        flag_inversions(self.logger, "rolling+dfrd", distilled_runs, "rolling", baseline_runs)
        self.logger.warning(f"rolling {baseline.mean_top_g_acc:.4f}, rolling+dfrd {distilled.mean_top_g_acc:.4f}")
        self.assertGreater(distilled.mean_top_g_acc - baseline.mean_top_g_acc, 0.0)

    def test_full_gate_and_ema_lead_their_ablations(self):
        seeds = [0, 1, 2, 3, 4]
        configs = {
            "diamond": load("blobs_rolling_dfrd.json"),
            "triangle": load("blobs_rolling_dfrd.json", "gate=triangle"),
            "nabla": load("blobs_rolling_dfrd.json", "gate=nabla"),
            "no_ema": load("blobs_rolling_dfrd.json", "distill.use_ema=false"),
        }
        results, means = {}, {}
        for name, config in configs.items():
            results[name], summary = run_seeds(config, seeds)
            self.assertEqual(summary.seeds, seeds)
            means[name] = summary.mean_top_g_acc
            self.logger.warning(f"{name}: top g_acc {summary.mean_top_g_acc:.4f} +- {summary.std_top_g_acc:.4f}")

        for ablation in ("triangle", "nabla", "no_ema"):
            flag_inversions(self.logger, "diamond", results["diamond"], ablation, results[ablation])
        self.assertGreaterEqual(means["diamond"], max(means["triangle"], means["nabla"]), means)
        # the diamond run has the EMA generator on
        self.assertGreaterEqual(means["diamond"], means["no_ema"], means)


if __name__ == '__main__':
    unittest.main()
