from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

VectorJacobian = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class ContractViolation(ValueError):
    """Raised when an operation is called outside its contract (shape, range, finiteness)."""


@dataclass
class Node:
    op: str
    inputs: Tuple[int, ...]
    value: np.ndarray
    vjp: Optional[VectorJacobian] = None
    leaf_name: Optional[str] = None


class Tensor:
    """A float64 array, optionally attached to a Graph node.

    Tensors without a graph are constants: operations on them compute values only and never
    record anything, so evaluation code pays no bookkeeping cost.
    """

    __slots__ = ("data", "graph", "node_id")

    def __init__(self, data, graph: "Graph" = None, node_id: int = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.graph = graph
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def requires_grad(self) -> bool:
        return self.graph is not None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, tracked={self.requires_grad})"

    # the operators delegate to diffcore.ops; imported lazily to avoid an import cycle
    def __add__(self, other):
        from diffcore import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from diffcore import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from diffcore import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from diffcore import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from diffcore import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from diffcore import ops
        return ops.mul(other, self)

    def __neg__(self):
        from diffcore import ops
        return ops.mul(self, -1.0)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class GradientMap(dict):
    """Maps leaf names ("scope.key") to gradient arrays."""

    def for_scope(self, scope: str) -> Dict[str, np.ndarray]:
        prefix = f"{scope}/"
        return {name[len(prefix):]: grad for name, grad in self.items() if name.startswith(prefix)}


class Graph:
    """A tape of operations. Nodes are appended in execution order, so inputs always precede users."""

    def __init__(self):
        self.nodes: List[Node] = []
        self._leaves: Dict[str, int] = {}

    def parameter(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._leaves:
            raise ContractViolation(f"parameter leaf registered twice: {name}")
        data = np.array(value, dtype=np.float64, copy=True)
        self._check_finite("parameter", data)
        self.nodes.append(Node("leaf", (), data, leaf_name=name))
        node_id = len(self.nodes) - 1
        self._leaves[name] = node_id
        return Tensor(data, self, node_id)

    def bind(self, params: Mapping[str, np.ndarray], scope: str) -> Dict[str, Tensor]:
        """Register every entry of a parameter mapping as a leaf named "<scope>/<key>"."""
        return {key: self.parameter(f"{scope}/{key}", value) for key, value in params.items()}

    @property
    def leaf_names(self) -> List[str]:
        return list(self._leaves)

    def record(self, op: str, value: np.ndarray, inputs: Sequence[Tensor], vjp: VectorJacobian) -> Tensor:
        self._check_finite(op, value)
        input_ids = []
        for tensor in inputs:
            if tensor.graph is not None and tensor.graph is not self:
                raise ContractViolation(f"{op}: inputs belong to different graphs")
            input_ids.append(tensor.node_id if tensor.graph is self else -1)
        self.nodes.append(Node(op, tuple(input_ids), value, vjp))
        return Tensor(value, self, len(self.nodes) - 1)

    @staticmethod
    def _check_finite(op: str, value: np.ndarray) -> None:
        if not np.all(np.isfinite(value)):
            raise ContractViolation(f"{op} produced non-finite values")


def record(op: str, value: np.ndarray, inputs: Sequence[Tensor], vjp: VectorJacobian) -> Tensor:
    """Attach the result of an operation to the graph of its tracked inputs, if any."""
    graph = None
    for tensor in inputs:
        if tensor.graph is not None:
            graph = tensor.graph
            break
    if graph is None:
        Graph._check_finite(op, value)
        return Tensor(value)
    return graph.record(op, value, inputs, vjp)


def backward(loss: Tensor, graph: Graph) -> GradientMap:
    """Reverse-mode sweep from a scalar loss; returns d loss / d leaf for every leaf of the graph.

    Leaves the loss does not depend on receive all-zero gradients.
    """
    if loss.data.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")

    grads = GradientMap()
    if loss.graph is None:
        for name, node_id in graph._leaves.items():
            grads[name] = np.zeros_like(graph.nodes[node_id].value)
        return grads
    if loss.graph is not graph:
        raise ContractViolation("loss was not computed on this graph")

    adjoints: List[Optional[np.ndarray]] = [None] * (loss.node_id + 1)
    adjoints[loss.node_id] = np.ones_like(loss.data)

    for node_id in range(loss.node_id, -1, -1):
        adjoint = adjoints[node_id]
        if adjoint is None:
            continue
        node = graph.nodes[node_id]
        if node.vjp is None:
            continue
        input_grads = node.vjp(adjoint)
        for input_id, input_grad in zip(node.inputs, input_grads):
            if input_id < 0 or input_grad is None:
                continue
            if adjoints[input_id] is None:
                adjoints[input_id] = np.array(input_grad, dtype=np.float64)
            else:
                adjoints[input_id] = adjoints[input_id] + input_grad

    for name, node_id in graph._leaves.items():
        adjoint = adjoints[node_id] if node_id < len(adjoints) else None
        grads[name] = np.zeros_like(graph.nodes[node_id].value) if adjoint is None else adjoint
    return grads
