import math

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from diffcore import ops
from diffcore.graph import ContractViolation, Tensor, as_tensor
from models.classifier import OUTPUT_LAYER, hidden_layer_name
from models.parameter_set import ParameterSet

EMBEDDING = "embedding"


class MergeOp(str, Enum):
    """How noise z and label y are combined into the generator input h = o(z, y)."""
    MUL = "mul"    # z * E(y)
    ADD = "add"    # z + E(y)
    CAT = "cat"    # [z, E(y)]
    NCAT = "ncat"  # [z, y]
    NONE = "none"  # z

    @property
    def uses_embedding(self) -> bool:
        return self in (MergeOp.MUL, MergeOp.ADD, MergeOp.CAT)

    @classmethod
    def parse(cls, value) -> "MergeOp":
        try:
            return cls(value)
        except ValueError:
            raise ContractViolation(f"unknown merge operator: {value!r}, expected one of {[m.value for m in cls]}")


@dataclass
class GeneratorSpec:
    noise_dim: int
    num_classes: int
    output_dim: int
    hidden_widths: List[int] = field(default_factory=list)
    merge_op: MergeOp = MergeOp.MUL

    def __post_init__(self):
        self.merge_op = MergeOp.parse(self.merge_op)
        if min([self.noise_dim, self.num_classes, self.output_dim] + list(self.hidden_widths)) < 1:
            raise ContractViolation(f"generator dimensions must be positive: {self}")

    @property
    def embedding_dim(self) -> int:
        # equals the noise dimension for every merge that uses a table
        return self.noise_dim

    @property
    def merged_dim(self) -> int:
        if self.merge_op == MergeOp.CAT:
            return self.noise_dim + self.embedding_dim
        if self.merge_op == MergeOp.NCAT:
            return self.noise_dim + 1
        return self.noise_dim

    @property
    def layer_names(self) -> List[str]:
        return [hidden_layer_name(i) for i in range(len(self.hidden_widths))] + [OUTPUT_LAYER]

    def init_parameters(self, rng: np.random.Generator) -> ParameterSet:
        """Glorot-uniform weights, zero biases, standard normal embedding rows."""
        tensors = {}
        if self.merge_op.uses_embedding:
            tensors[EMBEDDING] = rng.standard_normal((self.num_classes, self.embedding_dim))
        fan_in = self.merged_dim
        for name, width in zip(self.layer_names, list(self.hidden_widths) + [self.output_dim]):
            bound = math.sqrt(6.0 / (width + fan_in))
            tensors[f"{name}.weight"] = rng.uniform(-bound, bound, size=(width, fan_in))
            tensors[f"{name}.bias"] = np.zeros(width)
            fan_in = width
        return ParameterSet(tensors)


@dataclass
class GeneratorState:
    """A conditional generator: its architecture and its current parameters (embedding included)."""
    spec: GeneratorSpec
    params: ParameterSet

    def with_params(self, params: ParameterSet) -> "GeneratorState":
        return GeneratorState(self.spec, params)


def merge_batch(z, labels: Sequence[int], op: MergeOp, embedding=None, num_classes: int = None) -> Tensor:
    """Row-wise o(z_b, y_b) for a batch z [B, d].

    Labels must lie in [0, num_classes); num_classes defaults to the embedding's row count.
    """
    op = MergeOp.parse(op)
    z = as_tensor(z)
    labels = np.asarray(labels, dtype=np.int64)
    if z.data.ndim != 2 or labels.shape != (z.shape[0],):
        raise ContractViolation(f"merge expects z [B, d] and B labels, got {z.shape} and {labels.shape}")
    if num_classes is None and embedding is not None:
        num_classes = as_tensor(embedding).shape[0]
    if labels.size and (labels.min() < 0 or (num_classes is not None and labels.max() >= num_classes)):
        raise ContractViolation(f"labels must lie in [0, {num_classes if num_classes is not None else 'C'}), "
                                f"got {labels.min()}..{labels.max()}")

    if op == MergeOp.NONE:
        return z
    if op == MergeOp.NCAT:
        return ops.concat([z, labels.astype(np.float64)[:, None]], axis=1)

    if embedding is None:
        raise ContractViolation(f"merge operator {op.value} needs an embedding table")
    looked_up = ops.take_rows(embedding, labels)
    if op == MergeOp.CAT:
        return ops.concat([z, looked_up], axis=1)
    if looked_up.shape != z.shape:
        raise ContractViolation(f"embedding width {looked_up.shape[1]} must equal noise width {z.shape[1]}")
    return ops.mul(z, looked_up) if op == MergeOp.MUL else ops.add(z, looked_up)


def merge(z, label: int, op: MergeOp, embedding=None, num_classes: int = None) -> np.ndarray:
    """o(z, y) for a single noise vector z [d]."""
    z = np.asarray(as_tensor(z).data, dtype=np.float64)
    if z.ndim != 1:
        raise ContractViolation(f"merge expects a noise vector, got shape {z.shape}")
    return merge_batch(z[None, :], [label], op, embedding, num_classes).data[0]


def generator_forward(gen: GeneratorState, z, labels: Sequence[int], params=None) -> Tuple[Tensor, Tensor]:
    """Synthetic batch s = G(o(z, y)) in [-1, 1]^D, returned with the merged input h.

    ``params`` may carry graph-bound Tensors standing in for ``gen.params``.
    """
    params = gen.params if params is None else params
    spec = gen.spec
    embedding = params[EMBEDDING] if spec.merge_op.uses_embedding else None
    h = merge_batch(z, labels, spec.merge_op, embedding, spec.num_classes)

    activation = h
    for index, name in enumerate(spec.layer_names):
        activation = ops.linear(activation, params[f"{name}.weight"], params[f"{name}.bias"])
        activation = ops.tanh(activation) if name == OUTPUT_LAYER else ops.relu(activation)
    return activation, h
