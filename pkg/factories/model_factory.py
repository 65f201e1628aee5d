from loaders.config_loader import ExperimentConfig
from models.classifier import ClassifierSpec
from models.generator import GeneratorSpec, GeneratorState
from models.parameter_set import ParameterSet
from utils.seeding import SeedStream, derive_rng


class ModelFactory:
    """Builds model specifications and seeded initial parameters from an experiment config."""

    @staticmethod
    def create_classifier_spec(config: ExperimentConfig, input_dim: int, num_classes: int) -> ClassifierSpec:
        return ClassifierSpec(input_dim, list(config.model.hidden_widths), num_classes)

    @staticmethod
    def create_generator_spec(config: ExperimentConfig, num_classes: int, output_dim: int) -> GeneratorSpec:
        return GeneratorSpec(
            noise_dim=config.generator.noise_dim,
            num_classes=num_classes,
            output_dim=output_dim,
            hidden_widths=list(config.generator.hidden_widths),
            merge_op=config.generator.merge_op,
        )

    @staticmethod
    def create_global(spec: ClassifierSpec, seed: int, round_index: int = 0) -> ParameterSet:
        """
        Initial global model parameters.

        :param spec: The classifier architecture.
        :param seed: The master seed.
        :param round_index: 0 for the run's initial model; data-free runs re-draw it per round.
        """
        return spec.init_parameters(derive_rng(seed, SeedStream.MODEL_INIT, round_index))

    @staticmethod
    def create_generator(spec: GeneratorSpec, seed: int) -> GeneratorState:
        return GeneratorState(spec, spec.init_parameters(derive_rng(seed, SeedStream.GENERATOR_INIT)))

