import math

from dataclasses import dataclass, field
from typing import List, Mapping, Sequence, Union

import numpy as np

from diffcore import ops
from diffcore.graph import ContractViolation, Tensor, as_tensor
from models.parameter_set import ParameterSet

OUTPUT_LAYER = "output"


def hidden_layer_name(index: int) -> str:
    return f"hidden{index}"


def slim_width(full_width: int, fraction: float) -> int:
    """Node count kept at width fraction R: ceil(R * K), never below 1."""
    if not 0 < fraction <= 1:
        raise ContractViolation(f"width fraction must lie in (0, 1], got {fraction}")
    # rounding first keeps e.g. 0.1 * 30 from becoming 3.0000000000000004 -> 4
    return max(1, math.ceil(round(fraction * full_width, 9)))


@dataclass
class ClassifierSpec:
    input_dim: int
    hidden_widths: List[int] = field(default_factory=list)
    num_classes: int = 2

    def __post_init__(self):
        if self.input_dim < 1 or self.num_classes < 1 or any(width < 1 for width in self.hidden_widths):
            raise ContractViolation(f"classifier dimensions must be positive: {self}")

    @property
    def layer_names(self) -> List[str]:
        return [hidden_layer_name(i) for i in range(len(self.hidden_widths))] + [OUTPUT_LAYER]

    def widths_at(self, fraction: float) -> List[int]:
        return [slim_width(width, fraction) for width in self.hidden_widths]

    def parameter_shapes(self, widths: Sequence[int] = None):
        widths = list(self.hidden_widths if widths is None else widths)
        shapes = {}
        fan_in = self.input_dim
        for name, width in zip(self.layer_names, widths + [self.num_classes]):
            shapes[f"{name}.weight"] = (width, fan_in)
            shapes[f"{name}.bias"] = (width,)
            fan_in = width
        return shapes

    def init_parameters(self, rng: np.random.Generator) -> ParameterSet:
        """Glorot-uniform weights, zero biases."""
        tensors = {}
        for key, shape in self.parameter_shapes().items():
            if key.endswith(".weight"):
                bound = math.sqrt(6.0 / (shape[0] + shape[1]))
                tensors[key] = rng.uniform(-bound, bound, size=shape)
            else:
                tensors[key] = np.zeros(shape)
        return ParameterSet(tensors)


Parameters = Union[ParameterSet, Mapping[str, Tensor]]


def classifier_forward(params: Parameters, widths: Sequence[int], x) -> Tensor:
    """Logits [B, C] of a (possibly slimmed) dense ReLU classifier.

    ``params`` is either a ParameterSet (values only) or a mapping of graph-bound Tensors.
    ``widths`` are the hidden node counts the parameters were extracted for.
    """
    x = as_tensor(x)
    hidden_count = len(widths)
    if x.data.ndim != 2:
        raise ContractViolation(f"classifier input must be [B, D], got {x.shape}")

    activation = x
    for index in range(hidden_count + 1):
        name = OUTPUT_LAYER if index == hidden_count else hidden_layer_name(index)
        try:
            weight, bias = params[f"{name}.weight"], params[f"{name}.bias"]
        except KeyError:
            raise ContractViolation(f"classifier parameters are missing layer {name}")
        weight_shape = weight.shape
        if index < hidden_count and weight_shape[0] != widths[index]:
            raise ContractViolation(f"{name} has {weight_shape[0]} nodes, widths ask for {widths[index]}")
        activation = ops.linear(activation, weight, bias)
        if index < hidden_count:
            activation = ops.relu(activation)
    return activation


def predict(params: ParameterSet, widths: Sequence[int], features: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class id."""
    logits = classifier_forward(params, widths, features).data
    return np.argmax(logits, axis=1)


def widths_of(params: ParameterSet) -> List[int]:
    """Hidden widths read back from parameter shapes."""
    return [params[f"{layer}.weight"].shape[0] for layer in params.layer_names() if layer != OUTPUT_LAYER]
