import json
import os
import tempfile
import unittest

from loaders.config_loader import ConfigError, ConfigLoader, ExperimentConfig, FederationConfig, apply_override, \
    build_experiment, parse_value, resolve_key
from utils.clogger import CLogger
from utils.deserializer import DeserializationError, Deserializer


class TestConfigLoader(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, "experiment.json")
        self.raw = {
            "federation": {"num_clients": 6, "active_clients": 3, "rounds": 4},
            "distill": {"gate": "triangle"},
            "seeds": [4, 5],
        }
        with open(self.path, "w") as file:
            json.dump(self.raw, file)

    def tearDown(self):
        self.directory.cleanup()

    def test_load_file(self):
        loader = ConfigLoader(self.path)
        experiment = loader.get_experiment()
        self.assertEqual(experiment.federation.num_clients, 6)
        self.assertEqual(experiment.distill.gate, "triangle")
        self.assertEqual(loader.get_seeds(), [4, 5])
        self.assertEqual(loader.get_output().directory, "results")

    def test_defaults_without_file(self):
        experiment = ConfigLoader().get_experiment()
        self.assertEqual(experiment, ExperimentConfig())
        self.assertEqual(experiment.federation.scheme, "rolling")
        self.assertEqual(experiment.distill.alpha, 0.5)

    def test_missing_sections_are_reported(self):
        with self.assertLogs(CLogger.for_component("ConfigLoader"), level="WARNING") as logs:
            ConfigLoader(self.path)
        self.assertTrue(any("missing config section: model" in line for line in logs.output))

    def test_overrides_and_aliases(self):
        experiment = ConfigLoader(self.path, ["gate=nabla", "distill.alpha=0.25", "merge=ncat",
                                              "model.hidden_widths=[8, 4]", "seeds=7"]).get_experiment()
        self.assertEqual(experiment.distill.gate, "nabla")
        self.assertEqual(experiment.distill.alpha, 0.25)
        self.assertEqual(experiment.generator.merge_op, "ncat")
        self.assertEqual(experiment.model.hidden_widths, [8, 4])
        self.assertEqual(experiment.seeds, [7])

    def test_unique_bare_key(self):
        self.assertEqual(resolve_key("omega"), ("federation", "omega"))
        self.assertEqual(resolve_key("seeds"), ("", "seeds"))

    def test_ambiguous_and_unknown_keys(self):
        with self.assertRaises(ConfigError) as context:
            resolve_key("batch_size")
        self.assertEqual(context.exception.key, "batch_size")
        with self.assertRaises(ConfigError):
            resolve_key("federation.nonexistent")
        with self.assertRaises(ConfigError):
            apply_override({}, "no_equals_sign")

    def test_unknown_file_key_names_the_key(self):
        with self.assertRaises(ConfigError) as context:
            build_experiment({"federation": {"clients": 3}})
        self.assertEqual(context.exception.key, "federation.clients")
        with self.assertRaises(ConfigError) as context:
            build_experiment({"federations": {}})
        self.assertEqual(context.exception.key, "federations")

    def test_cross_field_validation(self):
        with self.assertRaises(ConfigError) as context:
            ConfigLoader(self.path, ["federation.active_clients=9"])
        self.assertEqual(context.exception.key, "federation.active_clients")
        for override, key in (("gate=square", "distill.gate"), ("federation.rounds=0", "federation.rounds"),
                              ("distill.mode=data_free", "distill.mode"), ("seeds=[]", "seeds")):
            with self.assertRaises(ConfigError) as context:
                ConfigLoader(self.path, [override, "distill.method=none"] if key == "distill.mode" else [override])
            self.assertEqual(context.exception.key, key)

    def test_wrong_types(self):
        with self.assertRaises(ConfigError) as context:
            build_experiment({"federation": {"num_clients": "many"}})
        self.assertEqual(context.exception.key, "federation.num_clients")
        with self.assertRaises(ConfigError):
            build_experiment({"seeds": ["a"]})

    def test_manifest_is_accepted(self):
        manifest = os.path.join(self.directory.name, "manifest.json")
        resolved = ConfigLoader(self.path).get_experiment().to_dict()
        with open(manifest, "w") as file:
            json.dump({"config": resolved, "seed_hierarchy": {}, "seed": 4}, file)
        self.assertEqual(ConfigLoader(manifest).get_experiment(), ConfigLoader(self.path).get_experiment())

    def test_with_overrides(self):
        experiment = ExperimentConfig().with_overrides(["scheme=static"])
        self.assertEqual(experiment.federation.scheme, "static")

    def test_missing_and_broken_files(self):
        with self.assertRaises(FileNotFoundError):
            ConfigLoader(os.path.join(self.directory.name, "absent.json"))
        broken = os.path.join(self.directory.name, "broken.json")
        with open(broken, "w") as file:
            file.write("{not json")
        with self.assertRaises(ConfigError):
            ConfigLoader(broken)

    def test_key_value_file(self):
        flat = os.path.join(self.directory.name, "experiment.cfg")
        with open(flat, "w") as file:
            file.write("# rolling with a triangle gate\n"
                       "federation.num_clients=6\n"
                       "federation.active_clients = 3\n"
                       "\n"
                       "federation.rounds=4\n"
                       "gate=triangle\n"
                       "seeds=[4, 5]\n")
        self.assertEqual(ConfigLoader(flat).get_experiment(), ConfigLoader(self.path).get_experiment())

    def test_flat_lines_reload_to_same_config(self):
        experiment = ConfigLoader(self.path, ["distill.alpha=0.25", "merge=cat"]).get_experiment()
        flat = os.path.join(self.directory.name, "resolved.cfg")
        with open(flat, "w") as file:
            file.write("\n".join(experiment.to_flat_lines()))
        self.assertEqual(ConfigLoader(flat).get_experiment(), experiment)

    def test_malformed_key_value_line(self):
        flat = os.path.join(self.directory.name, "broken.cfg")
        with open(flat, "w") as file:
            file.write("federation.rounds=4\nfederation.omega\n")
        with self.assertRaises(ConfigError) as raised:
            ConfigLoader(flat)
        self.assertEqual(raised.exception.key, "line 2")

    def test_parse_value(self):
        self.assertEqual(parse_value("0.5"), 0.5)
        self.assertEqual(parse_value("true"), True)
        self.assertEqual(parse_value("diamond"), "diamond")


class TestDeserializer(unittest.TestCase):
    def test_defaults_and_coercion(self):
        federation = Deserializer.deserialize(FederationConfig, {"num_clients": 4.0, "omega": "0.5",
                                                                 "sample_with_replacement": "false"}, "federation")
        self.assertEqual(federation.num_clients, 4)
        self.assertEqual(federation.omega, 0.5)
        self.assertFalse(federation.sample_with_replacement)
        self.assertEqual(federation.rounds, 30)

    def test_rejects_fractional_integers(self):
        with self.assertRaises(DeserializationError):
            Deserializer.deserialize(FederationConfig, {"num_clients": 2.5}, "federation")


if __name__ == '__main__':
    unittest.main()
