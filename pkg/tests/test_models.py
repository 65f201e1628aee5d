import io
import os
import tempfile
import unittest

import numpy as np

from diffcore import ops
from diffcore.gradcheck import check_gradients
from diffcore.graph import ContractViolation, Graph, backward
from distill.losses import GateVariant, LocalModel, ensemble_logits, loss_generator
from models.checkpoint import CheckpointError, dump_parameters, load_parameters, load_parameters_from, \
    save_parameters
from models.classifier import ClassifierSpec, classifier_forward, predict, slim_width, widths_of
from models.generator import EMBEDDING, GeneratorSpec, GeneratorState, MergeOp, generator_forward, merge
from models.parameter_set import ParameterSet
from models.round_record import CSV_HEADER, RoundRecord, RunSummary


class TestClassifier(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.spec = ClassifierSpec(3, [5, 4], 2)
        self.params = self.spec.init_parameters(self.rng)
        self.x = self.rng.uniform(-1, 1, size=(6, 3))

    def test_zero_parameters_give_zero_logits(self):
        zeros = self.params.zeros_like()
        np.testing.assert_array_equal(classifier_forward(zeros, [5, 4], self.x).data, np.zeros((6, 2)))

    def test_zero_parameters_predict_class_zero(self):
        np.testing.assert_array_equal(predict(self.params.zeros_like(), [5, 4], self.x), np.zeros(6))

    def test_hand_computed_single_node(self):
        params = ParameterSet({
            "hidden0.weight": np.array([[1.0, -1.0]]), "hidden0.bias": np.array([0.5]),
            "output.weight": np.array([[2.0], [-1.0]]), "output.bias": np.array([0.0, 1.0]),
        })
        logits = classifier_forward(params, [1], np.array([[1.0, 0.0], [0.0, 1.0]])).data
        # hidden: relu(1.5) = 1.5 and relu(-0.5) = 0
        np.testing.assert_allclose(logits, [[3.0, -0.5], [0.0, 1.0]])

    def test_width_mismatch_rejected(self):
        with self.assertRaises(ContractViolation):
            classifier_forward(self.params, [4, 4], self.x)

    def test_shapes_and_widths(self):
        self.assertEqual(self.params.shapes()["hidden1.weight"], (4, 5))
        self.assertEqual(self.params.shapes()["output.bias"], (2,))
        self.assertEqual(widths_of(self.params), [5, 4])
        self.assertEqual(self.spec.widths_at(0.5), [3, 2])

    def test_slim_width(self):
        self.assertEqual(slim_width(8, 0.25), 2)
        self.assertEqual(slim_width(30, 0.1), 3)
        self.assertEqual(slim_width(3, 1 / 16), 1)
        with self.assertRaises(ContractViolation):
            slim_width(8, 0.0)


class TestGenerator(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(1)
        self.spec = GeneratorSpec(noise_dim=3, num_classes=4, output_dim=5, hidden_widths=[6])
        self.gen = GeneratorState(self.spec, self.spec.init_parameters(self.rng))
        self.z = self.rng.standard_normal((4, 3))
        self.labels = np.array([0, 1, 2, 3])

    def test_merge_variants(self):
        z = np.array([0.1, 0.2])
        np.testing.assert_array_equal(merge(z, 1, MergeOp.NONE), z)
        np.testing.assert_allclose(merge(z, 1, MergeOp.MUL, np.ones((3, 2))), z)
        np.testing.assert_allclose(merge(z, 3, MergeOp.NCAT), [0.1, 0.2, 3.0])
        np.testing.assert_allclose(merge(z, 0, MergeOp.ADD, np.ones((3, 2))), [1.1, 1.2])
        np.testing.assert_allclose(merge(z, 2, MergeOp.CAT, np.eye(3, 2)), [0.1, 0.2, 0.0, 0.0])

    def test_out_of_range_label_rejected(self):
        z = np.array([0.1, 0.2])
        for op in MergeOp:
            embedding = np.ones((3, 2)) if op.uses_embedding else None
            with self.assertRaises(ContractViolation):
                merge(z, 3, op, embedding, num_classes=3)
            with self.assertRaises(ContractViolation):
                merge(z, -1, op, embedding, num_classes=3)
        with self.assertRaises(ContractViolation):
            merge(z, 3, MergeOp.MUL, np.ones((3, 2)))
        with self.assertRaises(ContractViolation):
            generator_forward(self.gen, self.z, np.array([0, 1, 2, 4]))

    def test_unknown_merge_rejected(self):
        with self.assertRaises(ContractViolation):
            MergeOp.parse("outer")

    def test_zero_generator_outputs_zero(self):
        zeros = self.gen.with_params(self.gen.params.zeros_like())
        s, _ = generator_forward(zeros, self.z, self.labels)
        np.testing.assert_array_equal(s.data, np.zeros((4, 5)))

    def test_forward_is_deterministic_and_bounded(self):
        first = generator_forward(self.gen, self.z, self.labels)[0].data
        second = generator_forward(self.gen, self.z, self.labels)[0].data
        np.testing.assert_array_equal(first, second)
        self.assertTrue(np.all(np.abs(first) <= 1.0))
        self.assertEqual(first.shape, (4, 5))

    def test_embedding_only_for_table_merges(self):
        self.assertIn(EMBEDDING, self.gen.params)
        ncat = GeneratorSpec(3, 4, 5, [6], MergeOp.NCAT)
        self.assertNotIn(EMBEDDING, ncat.init_parameters(self.rng))
        self.assertEqual(ncat.merged_dim, 4)

    def test_mean_output_gradient(self):
        params = {"generator": dict(self.gen.params.items())}

        def loss_fn(graph, bound):
            return ops.mean(generator_forward(self.gen, self.z, self.labels, params=bound["generator"])[0])

        self.assertTrue(check_gradients(loss_fn, params, self.rng, coordinates=20).passed())

    def test_generator_loss_reaches_mul_embedding(self):
        classifier = ClassifierSpec(5, [6], 4)
        local = LocalModel(0, classifier.init_parameters(self.rng), [6])
        global_params = classifier.init_parameters(self.rng)
        labels = np.array([0, 1, 2, 0])

        graph = Graph()
        bound = graph.bind(dict(self.gen.params.items()), "generator")
        s, h = generator_forward(self.gen, self.z, labels, params=bound)
        ensemble = ensemble_logits([local], np.ones((1, 4)), s, labels)
        loss = loss_generator(classifier_forward(global_params, [6], s), ensemble, s, h, labels,
                              GateVariant.TRIANGLE)
        grad = backward(loss.total, graph).for_scope("generator")[EMBEDDING]

        self.assertGreater(np.abs(grad[[0, 1, 2]]).sum(), 0.0)
        np.testing.assert_array_equal(grad[3], np.zeros(3))


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.params = ClassifierSpec(3, [4], 2).init_parameters(np.random.default_rng(2))

    def test_dump_and_load(self):
        restored = load_parameters_from(io.BytesIO(dump_parameters(self.params)))
        self.assertTrue(restored.equals(self.params))

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "global.ckpt")
            save_parameters(self.params, path)
            self.assertTrue(load_parameters(path).equals(self.params))

    def test_layout_is_little_endian_float64(self):
        raw = dump_parameters(ParameterSet({"w": np.array([1.5])}))
        self.assertEqual(raw[:4], b"HFCK")
        self.assertEqual(raw[-8:], np.array([1.5], dtype="<f8").tobytes())

    def test_truncated_and_foreign_files(self):
        raw = dump_parameters(self.params)
        with self.assertRaises(CheckpointError):
            load_parameters_from(io.BytesIO(raw[:-3]))
        with self.assertRaises(CheckpointError):
            load_parameters_from(io.BytesIO(b"NOPE" + raw[4:]))


class TestRoundRecord(unittest.TestCase):
    def test_row_matches_header(self):
        record = RoundRecord(round=3, g_acc=0.5, l_acc=0.25, loss_kl=0.125)
        row = record.to_row()
        self.assertEqual(len(row), len(CSV_HEADER))
        self.assertEqual(row[:3], ["3", "0.5", "0.25"])
        self.assertEqual(record.as_dict()["loss_kl"], 0.125)

    def test_accuracy_range(self):
        with self.assertRaises(ValueError):
            RoundRecord(round=0, g_acc=1.5, l_acc=0.0)

    def test_summary_picks_first_best_round(self):
        records = [RoundRecord(0, 0.4, 0.3), RoundRecord(1, 0.7, 0.5), RoundRecord(2, 0.7, 0.6)]
        summary = RunSummary.from_records(9, records)
        self.assertEqual((summary.top_g_acc, summary.l_acc_at_top, summary.best_round), (0.7, 0.5, 1))

    def test_summary_needs_rounds(self):
        with self.assertRaises(ValueError):
            RunSummary.from_records(0, [])


if __name__ == '__main__':
    unittest.main()
