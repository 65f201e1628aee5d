import unittest

import numpy as np

from data.dataset import Dataset, make_blobs
from models.classifier import ClassifierSpec, predict
from simulation.client import LabelCounter, client_update


class TestClientUpdate(unittest.TestCase):
    def setUp(self):
        self.dataset = make_blobs(3, 4, 10, 0.1, seed=0)
        self.spec = ClassifierSpec(4, [8], 3)
        self.params = self.spec.init_parameters(np.random.default_rng(0))

    def test_zero_steps_is_a_no_op(self):
        update = client_update(self.params, [8], self.dataset, 0.1, 0, 4, seed=0)
        self.assertTrue(update.params.equals(self.params))
        np.testing.assert_array_equal(update.label_counter.counts, [0, 0, 0])
        self.assertEqual(update.num_samples, 30)

    def test_repeated_sample_counted_once(self):
        single = Dataset(np.array([[0.5, -0.5]]), np.array([1]), 2)
        params = ClassifierSpec(2, [3], 2).init_parameters(np.random.default_rng(1))
        update = client_update(params, [3], single, 0.1, 3, 8, seed=0)
        np.testing.assert_array_equal(update.label_counter.counts, [0, 1])

    def test_long_training_touches_every_sample(self):
        update = client_update(self.params, [8], self.dataset, 0.1, 200, 16, seed=2)
        np.testing.assert_array_equal(update.label_counter.counts, self.dataset.label_histogram())

    def test_counts_match_a_tracking_oracle(self):
        rng_seed = 5
        update = client_update(self.params, [8], self.dataset, 0.1, 3, 4, seed=rng_seed)
        oracle_rng = np.random.default_rng(rng_seed)
        touched = set()
        for _ in range(3):
            touched.update(oracle_rng.integers(0, len(self.dataset), size=4).tolist())
        expected = np.bincount(self.dataset.labels[sorted(touched)], minlength=3)
        np.testing.assert_array_equal(update.label_counter.counts, expected)

    def test_without_replacement(self):
        update = client_update(self.params, [8], self.dataset, 0.1, 1, 64, seed=0, with_replacement=False)
        self.assertEqual(update.label_counter.total, 30)

    def test_training_fits_separable_blobs(self):
        first = client_update(self.params, [8], self.dataset, 0.5, 1, 30, seed=3)
        update = client_update(self.params, [8], self.dataset, 0.5, 400, 30, seed=3)
        accuracy = np.mean(predict(update.params, [8], self.dataset.features) == self.dataset.labels)
        self.assertGreaterEqual(accuracy, 0.9)
        self.assertLess(update.final_loss, first.final_loss)

    def test_same_seed_same_update(self):
        first = client_update(self.params, [8], self.dataset, 0.1, 5, 8, seed=9)
        second = client_update(self.params, [8], self.dataset, 0.1, 5, 8, seed=9)
        self.assertTrue(first.params.equals(second.params))

    def test_empty_client_is_skipped(self):
        update = client_update(self.params, [8], None, 0.1, 5, 8, seed=0, num_classes=3)
        self.assertTrue(update.skipped)
        self.assertEqual(update.label_counter.total, 0)
        with self.assertRaises(ValueError):
            client_update(self.params, [8], None, 0.1, 5, 8, seed=0)

    def test_label_counter(self):
        self.assertEqual(LabelCounter.empty(4).total, 0)
        self.assertEqual(LabelCounter(np.array([2, 3])).total, 5)


if __name__ == '__main__':
    unittest.main()
