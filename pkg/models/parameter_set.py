from typing import Callable, Dict, Iterator, List, Mapping, Tuple

import numpy as np


class ParameterSet:
    """Named float64 parameter tensors of one model, in layer order.

    Keys follow "<layer>.weight" ([out, in]) and "<layer>.bias" ([out]); generators add a
    single "embedding" table. Treat instances as values: operations return new sets.
    """

    def __init__(self, tensors: Mapping[str, np.ndarray] = None):
        self._tensors: Dict[str, np.ndarray] = {}
        for key, value in (tensors or {}).items():
            self._tensors[key] = np.array(value, dtype=np.float64, copy=True)

    def __getitem__(self, key: str) -> np.ndarray:
        return self._tensors[key]

    def __contains__(self, key: str) -> bool:
        return key in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self):
        shapes = ", ".join(f"{key}{tuple(value.shape)}" for key, value in self._tensors.items())
        return f"ParameterSet({shapes})"

    def keys(self):
        return self._tensors.keys()

    def items(self):
        return self._tensors.items()

    def values(self):
        return self._tensors.values()

    def copy(self) -> "ParameterSet":
        return ParameterSet(self._tensors)

    def map(self, fn: Callable[[str, np.ndarray], np.ndarray]) -> "ParameterSet":
        return ParameterSet({key: fn(key, value) for key, value in self._tensors.items()})

    def zeros_like(self) -> "ParameterSet":
        return self.map(lambda _, value: np.zeros_like(value))

    def replace(self, **updates: np.ndarray) -> "ParameterSet":
        merged = dict(self._tensors)
        merged.update(updates)
        return ParameterSet(merged)

    def layer_names(self) -> List[str]:
        names = []
        for key in self._tensors:
            layer = key.split(".", 1)[0]
            if "." in key and layer not in names:
                names.append(layer)
        return names

    def layer(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        return self._tensors[f"{name}.weight"], self._tensors[f"{name}.bias"]

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {key: tuple(value.shape) for key, value in self._tensors.items()}

    def equals(self, other: "ParameterSet") -> bool:
        """Bit-exact equality of keys, shapes and values."""
        if list(self.keys()) != list(other.keys()):
            return False
        return all(np.array_equal(value, other[key]) for key, value in self.items())
