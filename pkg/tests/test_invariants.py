import unittest
from unittest import mock

import numpy as np

from simulation import invariants
from simulation.invariants import (CHECKS, SIGNIFICANCE, InvariantViolation, check_gradient_suite,
                                   label_sampling_pvalue, run_checks)


class TestInvariantSuite(unittest.TestCase):
    def test_every_check_passes(self):
        outcomes = run_checks()
        self.assertEqual([outcome.name for outcome in outcomes], list(CHECKS))
        failed = [(outcome.name, outcome.detail) for outcome in outcomes if not outcome.passed]
        self.assertEqual(failed, [])

    def test_failures_are_reported_not_raised(self):
        def broken():
            raise InvariantViolation("wrong on purpose")

        with mock.patch.dict(invariants.CHECKS, {"ema": broken}):
            with self.assertLogs(invariants.CLogger.for_component("Invariants"), level="ERROR"):
                (outcome,) = run_checks(["ema"])
        self.assertFalse(outcome.passed)
        self.assertEqual(outcome.detail, "wrong on purpose")

    def test_unknown_check(self):
        with self.assertRaises(KeyError):
            run_checks(["nonexistent"])


class TestGradientSuite(unittest.TestCase):
    def test_cycles_every_merge_op(self):
        detail = check_gradient_suite(instances=10, seed=1)
        self.assertTrue(detail.startswith("60 loss instances over 5 merge ops"), detail)


class TestLabelSampling(unittest.TestCase):
    def test_matching_distribution_is_not_rejected(self):
        p = np.array([0.3, 0.0, 0.1, 0.05, 0.0, 0.15, 0.1, 0.0, 0.2, 0.05, 0.05, 0.0])
        pvalue = label_sampling_pvalue(p, 20000, np.random.default_rng(0))
        self.assertGreaterEqual(pvalue, SIGNIFICANCE)

    def test_single_label_support(self):
        p = np.array([0.0, 1.0, 0.0])
        self.assertEqual(label_sampling_pvalue(p, 500, np.random.default_rng(0)), 1.0)


if __name__ == '__main__':
    unittest.main()
