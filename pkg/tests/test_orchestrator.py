import copy
import unittest

import numpy as np

from data.dataset import Dataset
from data.partition import Partition
from distill.losses import LocalModel
from factories.model_factory import ModelFactory
from heterofed.aggregation import weighted_average
from loaders.config_loader import build_experiment
from models.classifier import ClassifierSpec
from simulation.client import client_update
from simulation.orchestrator import Simulation, evaluate_global, evaluate_local, mean_std, run_experiment, \
    run_seeds
from utils.seeding import SeedStream, derive_rng

TINY = {
    "dataset": {"kind": "blobs", "num_classes": 3, "dim": 4, "n_per_class": 20, "test_per_class": 6},
    "federation": {"num_clients": 4, "active_clients": 4, "rounds": 2, "omega": 1.0, "local_steps": 3,
                   "batch_size": 8},
    "model": {"hidden_widths": [6]},
    "generator": {"noise_dim": 3, "hidden_widths": [6]},
    "distill": {"iterations": 2, "generator_steps": 1, "distill_steps": 1, "batch_size": 8},
    "output": {"log_level": "WARNING"},
    "seeds": [1],
}


def tiny_config(**sections):
    raw = copy.deepcopy(TINY)
    for section, values in sections.items():
        raw[section].update(values)
    return build_experiment(raw)


class TestEvaluation(unittest.TestCase):
    def setUp(self):
        self.spec = ClassifierSpec(2, [3], 3)
        self.test = Dataset(np.zeros((6, 2)), np.array([0, 0, 1, 2, 2, 2]), 3)

    def test_zero_model_scores_class_zero_prevalence(self):
        zeros = self.spec.init_parameters(np.random.default_rng(0)).zeros_like()
        self.assertAlmostEqual(evaluate_global(zeros, [3], self.test), 2 / 6)

    def test_local_accuracy_is_unweighted_mean(self):
        zeros = self.spec.init_parameters(np.random.default_rng(0)).zeros_like()
        partition = Partition([np.array([0]), np.array([1, 2, 3, 4, 5])])
        locals_ = [LocalModel(0, zeros, [3]), LocalModel(1, zeros, [3])]
        # client 0 scores 1/1, client 1 scores 1/5
        self.assertAlmostEqual(evaluate_local(locals_, self.test, partition), (1.0 + 0.2) / 2)

    def test_random_classifier_is_near_chance(self):
        rng = np.random.default_rng(0)
        features = rng.uniform(-1, 1, size=(1000, 5))
        test = Dataset(features, np.repeat(np.arange(10), 100), 10)
        spec = ClassifierSpec(5, [8], 10)
        scores = [evaluate_global(spec.init_parameters(np.random.default_rng(seed)), [8], test)
                  for seed in range(10)]
        self.assertLess(abs(np.mean(scores) - 0.1), 0.03)

    def test_mean_std(self):
        mean, std = mean_std([1.0, 2.0, 3.0])
        self.assertAlmostEqual(mean, 2.0)
        self.assertAlmostEqual(std, 0.8165, places=4)
        with self.assertRaises(ValueError):
            mean_std([])


class TestSimulation(unittest.TestCase):
    def test_full_participation_samples_everyone(self):
        simulation = Simulation(tiny_config(), 1)
        self.assertEqual(simulation.sample_clients(0), [0, 1, 2, 3])

    def test_partial_participation(self):
        simulation = Simulation(tiny_config(federation={"active_clients": 2}), 1)
        sampled = simulation.sample_clients(3)
        self.assertEqual(len(sampled), 2)
        self.assertEqual(sampled, simulation.sample_clients(3))

    def test_fedavg_round_reduces_to_weighted_average(self):
        config = tiny_config(federation={"scheme": "fedavg"}, distill={"method": "none"})
        simulation = Simulation(config, 1)
        initial = simulation.global_params
        fed = config.federation

        models, weights = [], []
        for client_id, shard in enumerate(simulation.shards):
            if shard is None:
                continue
            update = client_update(initial, [6], shard, fed.local_lr, fed.local_steps, fed.batch_size,
                                   derive_rng(1, SeedStream.CLIENT_BATCHES, 0, client_id), num_classes=3)
            models.append(update.params)
            weights.append(len(shard))
        expected = weighted_average(models, weights)

        simulation.run_round(0)
        for key in expected.keys():
            np.testing.assert_allclose(simulation.global_params[key], expected[key], atol=1e-12, rtol=0)

    def test_budgets_follow_scheme(self):
        self.assertEqual(Simulation(tiny_config(federation={"scheme": "fedavg"}), 1).budgets.fractions, [1.0] * 4)
        self.assertEqual(Simulation(tiny_config(), 1).budgets.fractions, [1 / 4, 1 / 16, 1 / 16, 1 / 16])

    def test_all_sampled_clients_empty_skips_round(self):
        simulation = Simulation(tiny_config(), 1)
        simulation.shards = [None] * 4
        before = simulation.global_params
        with self.assertLogs(simulation._logger, level="WARNING"):
            record = simulation.run_round(0)
        self.assertTrue(record.skipped)
        self.assertEqual(record.participants, [])
        self.assertTrue(simulation.global_params.equals(before))

    def test_label_stats_reset_after_round(self):
        simulation = Simulation(tiny_config(), 1)
        simulation.run_round(0)
        self.assertEqual(int(simulation.label_stats.sum()), 0)

    def test_data_free_round_starts_from_fresh_model(self):
        config = tiny_config(distill={"mode": "data_free", "iterations": 0})
        simulation = Simulation(config, 1)
        simulation.run_round(0)
        fresh = ModelFactory.create_global(simulation.classifier_spec, 1, 1)
        self.assertTrue(simulation.global_params.equals(fresh))

    def test_data_free_once_keeps_initial_model(self):
        config = tiny_config(distill={"mode": "data_free", "reinit": "once", "iterations": 0})
        simulation = Simulation(config, 1)
        initial = simulation.global_params
        simulation.run_round(0)
        self.assertTrue(simulation.global_params.equals(initial))

    def test_distillation_updates_ema_and_losses(self):
        simulation = Simulation(tiny_config(), 1)
        record = simulation.run_round(0)
        self.assertTrue(simulation.ema.is_live)
        self.assertGreater(record.loss_kl, 0.0)
        self.assertGreater(record.loss_fid, 0.0)


class TestRunExperiment(unittest.TestCase):
    def test_records_are_reproducible(self):
        config = tiny_config()
        first = run_experiment(config)
        second = run_experiment(config)
        self.assertEqual([r.to_row() for r in first.records], [r.to_row() for r in second.records])
        self.assertTrue(first.final_params.equals(second.final_params))

    def test_one_round(self):
        result = run_experiment(tiny_config(federation={"rounds": 1}))
        self.assertEqual(len(result.records), 1)
        self.assertEqual(result.summary.best_round, 0)
        self.assertEqual(result.summary.top_g_acc, result.records[0].g_acc)

    def test_accuracies_and_wall_time(self):
        result = run_experiment(tiny_config(output={"record_wall_time": True}))
        for record in result.records:
            self.assertTrue(0.0 <= record.g_acc <= 1.0 and 0.0 <= record.l_acc <= 1.0)
            self.assertGreater(record.seconds, 0.0)
        self.assertEqual(run_experiment(tiny_config()).records[0].seconds, 0.0)

    def test_synthetic_dumps(self):
        result = run_experiment(tiny_config(output={"dump_synthetic": True}))
        self.assertEqual([round_index for round_index, _ in result.synthetic], [0, 1])
        self.assertEqual(result.synthetic[0][1].samples.shape, (8, 4))

    def test_baseline_without_distillation(self):
        result = run_experiment(tiny_config(distill={"method": "none"}))
        self.assertTrue(all(record.loss_kl == 0.0 for record in result.records))

    def test_multi_seed_summary(self):
        results, summary = run_seeds(tiny_config(federation={"rounds": 1}), [1, 2, 3])
        self.assertEqual(summary.seeds, [1, 2, 3])
        tops = [result.summary.top_g_acc for result in results]
        self.assertAlmostEqual(summary.mean_top_g_acc, float(np.mean(tops)))
        self.assertAlmostEqual(summary.std_top_g_acc, float(np.std(tops)))


if __name__ == '__main__':
    unittest.main()
