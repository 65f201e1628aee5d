import copy
import dataclasses
import json

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from utils.clogger import CLogger
from utils.deserializer import DeserializationError, Deserializer

SCHEMES = ("fedavg", "static", "random", "rolling")
DISTILLERS = ("none", "dfrd")
MODES = ("fine_tune", "data_free")
REINIT_POLICIES = ("every_round", "once")
GATES = ("diamond", "triangle", "nabla")
WEIGHTINGS = ("dynamic", "static", "average")
MERGE_OPS = ("mul", "add", "cat", "ncat", "none")
BIAS_CORRECTIONS = ("literal", "textbook")
DATASET_KINDS = ("blobs", "idx")

KEY_ALIASES = {
    "gate": "distill.gate",
    "weighting": "distill.weighting",
    "merge": "generator.merge_op",
    "scheme": "federation.scheme",
    "distiller": "distill.method",
}


class ConfigError(ValueError):
    """An invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class DatasetConfig:
    kind: str = "blobs"
    num_classes: int = 8
    dim: int = 16
    n_per_class: int = 400
    test_per_class: int = 100
    spread: float = 0.35
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None


@dataclass
class FederationConfig:
    num_clients: int = 10
    active_clients: int = 10
    rounds: int = 30
    omega: float = 0.1
    sigma: int = 4
    rho: int = 10
    scheme: str = "rolling"
    local_steps: int = 20
    local_lr: float = 0.05
    batch_size: int = 64
    sample_with_replacement: bool = True


@dataclass
class ModelConfig:
    hidden_widths: List[int] = field(default_factory=lambda: [64, 64])


@dataclass
class GeneratorConfig:
    noise_dim: int = 16
    hidden_widths: List[int] = field(default_factory=lambda: [64])
    merge_op: str = "mul"


@dataclass
class DistillConfig:
    method: str = "dfrd"
    mode: str = "fine_tune"
    reinit: str = "every_round"
    gate: str = "diamond"
    weighting: str = "dynamic"
    use_ema: bool = True
    iterations: int = 10
    generator_steps: int = 5
    distill_steps: int = 2
    generator_lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    distill_lr: float = 0.1
    beta_tran: float = 1.0
    beta_div: float = 1.0
    ema_momentum: float = 0.5
    alpha: float = 0.5
    bias_correction: str = "literal"
    batch_size: int = 64


@dataclass
class OutputConfig:
    directory: str = "results"
    run_name: str = "experiment"
    dump_synthetic: bool = False
    export_partitions: bool = False
    save_checkpoint: bool = False
    record_wall_time: bool = False
    log_level: str = "INFO"


SECTIONS = {
    "dataset": DatasetConfig,
    "federation": FederationConfig,
    "model": ModelConfig,
    "generator": GeneratorConfig,
    "distill": DistillConfig,
    "output": OutputConfig,
}


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    federation: FederationConfig = field(default_factory=FederationConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seeds: List[int] = field(default_factory=lambda: [0])

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def to_flat_lines(self) -> List[str]:
        """The configuration as "section.key=value" lines, values JSON-encoded."""
        lines = []
        for section, values in self.to_dict().items():
            if section == "seeds":
                lines.append(f"seeds={json.dumps(values)}")
                continue
            lines.extend(f"{section}.{name}={json.dumps(value)}" for name, value in values.items())
        return lines

    def with_overrides(self, overrides: Iterable[str]) -> "ExperimentConfig":
        raw = self.to_dict()
        for override in overrides:
            apply_override(raw, override)
        return build_experiment(raw)

    def validate(self) -> "ExperimentConfig":
        """Check cross-field rules; raises ConfigError on the first violation."""
        fed, dist, ds = self.federation, self.distill, self.dataset

        _choice("dataset.kind", ds.kind, DATASET_KINDS)
        _choice("federation.scheme", fed.scheme, SCHEMES)
        _choice("distill.method", dist.method, DISTILLERS)
        _choice("distill.mode", dist.mode, MODES)
        _choice("distill.reinit", dist.reinit, REINIT_POLICIES)
        _choice("distill.gate", dist.gate, GATES)
        _choice("distill.weighting", dist.weighting, WEIGHTINGS)
        _choice("generator.merge_op", self.generator.merge_op, MERGE_OPS)
        _choice("distill.bias_correction", dist.bias_correction, BIAS_CORRECTIONS)

        _positive("federation.num_clients", fed.num_clients)
        _positive("federation.active_clients", fed.active_clients)
        _positive("federation.rounds", fed.rounds)
        _positive("federation.sigma", fed.sigma)
        _positive("federation.rho", fed.rho)
        _positive("federation.batch_size", fed.batch_size)
        _positive("federation.omega", fed.omega)
        _positive("federation.local_lr", fed.local_lr)
        _non_negative("federation.local_steps", fed.local_steps)
        if fed.active_clients > fed.num_clients:
            raise ConfigError("federation.active_clients",
                              f"cannot sample {fed.active_clients} of {fed.num_clients} clients")

        _positive("dataset.num_classes", ds.num_classes)
        if ds.kind == "blobs":
            if ds.num_classes < 2 or ds.dim < 2:
                raise ConfigError("dataset.num_classes", "blobs need at least 2 classes and 2 dimensions")
            _positive("dataset.n_per_class", ds.n_per_class)
            _positive("dataset.test_per_class", ds.test_per_class)
            _non_negative("dataset.spread", ds.spread)
            if ds.test_per_class * ds.num_classes < fed.num_clients:
                raise ConfigError("dataset.test_per_class", "fewer test samples than clients")
        else:
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if not getattr(ds, key):
                    raise ConfigError(f"dataset.{key}", "required for idx datasets")

        if any(width < 1 for width in self.model.hidden_widths):
            raise ConfigError("model.hidden_widths", "widths must be positive")
        _positive("generator.noise_dim", self.generator.noise_dim)
        if any(width < 1 for width in self.generator.hidden_widths):
            raise ConfigError("generator.hidden_widths", "widths must be positive")

        for key in ("iterations", "generator_steps", "distill_steps"):
            _non_negative(f"distill.{key}", getattr(dist, key))
        for key in ("generator_lr", "distill_lr", "batch_size"):
            _positive(f"distill.{key}", getattr(dist, key))
        for key in ("beta_tran", "beta_div", "alpha"):
            _non_negative(f"distill.{key}", getattr(dist, key))
        for key in ("beta1", "beta2"):
            if not 0 < getattr(dist, key) < 1:
                raise ConfigError(f"distill.{key}", "must lie in (0, 1)")
        if not 0 <= dist.ema_momentum < 1:
            raise ConfigError("distill.ema_momentum", "must lie in [0, 1)")
        if dist.batch_size < 2 and dist.method == "dfrd" and dist.beta_div > 0:
            raise ConfigError("distill.batch_size", "the diversity loss needs at least 2 samples")
        if dist.mode == "data_free" and dist.method != "dfrd":
            raise ConfigError("distill.mode", "data_free mode needs distill.method=dfrd")

        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if any(seed < 0 for seed in self.seeds):
            raise ConfigError("seeds", "seeds must be non-negative")
        try:
            CLogger.parse_level(self.output.log_level)
        except ValueError as e:
            raise ConfigError("output.log_level", str(e))
        return self


def _choice(key: str, value: str, allowed: Tuple[str, ...]) -> None:
    if value not in allowed:
        raise ConfigError(key, f"unknown value {value!r}, allowed values are => {list(allowed)}")


def _positive(key: str, value) -> None:
    if value <= 0:
        raise ConfigError(key, f"must be positive, got {value}")


def _non_negative(key: str, value) -> None:
    if value < 0:
        raise ConfigError(key, f"must be non-negative, got {value}")


def resolve_key(key: str) -> Tuple[str, str]:
    """Map an override key to (section, field); bare field names must be unique across sections."""
    key = KEY_ALIASES.get(key, key)
    if key == "seeds":
        return "", "seeds"
    if "." in key:
        section, name = key.split(".", 1)
        section_cls = SECTIONS.get(section)
        if section_cls is None or name not in {f.name for f in dataclasses.fields(section_cls)}:
            raise ConfigError(key, "unknown key")
        return section, name

    owners = [section for section, section_cls in SECTIONS.items()
              if key in {f.name for f in dataclasses.fields(section_cls)}]
    if len(owners) != 1:
        reason = "unknown key" if not owners else f"ambiguous key, qualify it with one of {owners}"
        raise ConfigError(key, reason)
    return owners[0], key


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: Dict[str, Any], override: str) -> None:
    if "=" not in override:
        raise ConfigError(override, "overrides must look like section.key=value")
    key, text = override.split("=", 1)
    section, name = resolve_key(key.strip())
    value = parse_value(text.strip())
    if section == "":
        raw["seeds"] = value if isinstance(value, list) else [value]
    else:
        raw.setdefault(section, {})[name] = value


def parse_flat_config(text: str) -> Dict[str, Any]:
    """Raw config from "section.key=value" lines; blank lines and lines starting with # are skipped."""
    raw: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            apply_override(raw, line)
        except ConfigError as e:
            raise ConfigError(f"line {number}", str(e)) from e
    return raw


def build_experiment(raw: Dict[str, Any], logger: CLogger = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "the config must be a JSON object")
    unknown = set(raw) - set(SECTIONS) - {"seeds"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")

    sections = {}
    for name, section_cls in SECTIONS.items():
        if name not in raw and logger is not None:
            logger.warning(f"missing config section: {name}, defaulting to {dataclasses.asdict(section_cls())}")
        try:
            sections[name] = Deserializer.deserialize(section_cls, raw.get(name), name)
        except DeserializationError as e:
            raise ConfigError(e.key, str(e).split(": ", 1)[-1]) from e

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds", f"expected a list of integers, got {seeds!r}")
    return ExperimentConfig(seeds=list(seeds), **sections).validate()


class ConfigLoader:
    """
    Loads, overrides and validates an experiment configuration.

    Args:
        config_file_path (str): Path to a JSON config, a run manifest or a key=value file; None starts from defaults.
        overrides (Iterable[str]): "section.key=value" strings applied on top of the file.

    Attributes:
        config_file_path (str): The path to the configuration file.
        config_data (dict): The raw configuration data after overrides.
    """

    def __init__(self, config_file_path: Optional[str] = None, overrides: Iterable[str] = ()):
        self.config_file_path = config_file_path
        self._logger = CLogger.for_component("ConfigLoader")

        self.config_data = self.load_config() if config_file_path else {}
        # manifests wrap the resolved config next to the seed hierarchy
        if "config" in self.config_data and "seed_hierarchy" in self.config_data:
            self.config_data = self.config_data["config"]

        self.config_data = copy.deepcopy(self.config_data)
        for override in overrides:
            apply_override(self.config_data, override)

        self._experiment = build_experiment(self.config_data, self._logger if config_file_path else None)

    def load_config(self) -> dict:
        """
        Load configuration data from the specified file.

        ``.json`` files and files whose content starts with "{" are JSON; anything else is
        read as "section.key=value" lines.

        Raises:
            FileNotFoundError: If the configuration file is not found.
            ConfigError: If there's an issue with JSON decoding or a malformed line.
        """
        try:
            with open(self.config_file_path) as file:
                text = file.read()
        except FileNotFoundError as e:
            raise FileNotFoundError(f"Config file not found: {self.config_file_path}") from e

        if not self.config_file_path.endswith(".json") and not text.lstrip().startswith("{"):
            self._logger.debug(f"reading {self.config_file_path} as key=value lines")
            return parse_flat_config(text)
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"Failed to decode JSON in config file: {self.config_file_path}") from e

    def get_experiment(self) -> ExperimentConfig:
        return self._experiment

    def get_seeds(self) -> List[int]:
        return list(self._experiment.seeds)

    def get_output(self) -> OutputConfig:
        return self._experiment.output
