from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Tuple

import numpy as np

from models.classifier import OUTPUT_LAYER, slim_width
from models.parameter_set import ParameterSet
from utils.seeding import SeedStream, derive_rng


class ExtractionScheme(str, Enum):
    STATIC = "static"
    RANDOM = "random"
    ROLLING = "rolling"


@dataclass
class IndexMap:
    """Selected node indices (sorted, unique) of every hidden layer of one sub-model."""
    layers: Dict[str, np.ndarray]

    def __post_init__(self):
        for name, indices in self.layers.items():
            indices = np.asarray(indices, dtype=np.int64)
            if indices.size and np.any(np.diff(indices) <= 0):
                raise ValueError(f"indices of {name} must be sorted and unique: {indices.tolist()}")
            self.layers[name] = indices

    def widths(self) -> List[int]:
        return [int(indices.size) for indices in self.layers.values()]

    def rows(self) -> Iterator[Tuple[str, int]]:
        """(layer, index) pairs for CSV audit exports."""
        for name, indices in self.layers.items():
            for index in indices:
                yield name, int(index)


def select_indices(full_width: int, fraction: float, scheme: ExtractionScheme, round_index: int,
                   seed: int, client_id: int, layer_index: int) -> np.ndarray:
    count = slim_width(full_width, fraction)
    scheme = ExtractionScheme(scheme)
    if scheme == ExtractionScheme.STATIC:
        return np.arange(count)
    if scheme == ExtractionScheme.ROLLING:
        start = round_index % full_width
        return np.sort((start + np.arange(count)) % full_width)
    rng = derive_rng(seed, SeedStream.EXTRACTION, round_index, client_id, layer_index)
    return np.sort(rng.choice(full_width, size=count, replace=False))


def hidden_layers(params: ParameterSet) -> List[str]:
    return [name for name in params.layer_names() if name != OUTPUT_LAYER]


def extract_submodel(global_params: ParameterSet, fraction: float, scheme: ExtractionScheme,
                     round_index: int, seed: int, client_id: int = 0) -> Tuple[ParameterSet, IndexMap]:
    """Cut the width-R sub-model out of a global classifier.

    Each hidden weight keeps the (selected-out x selected-in) block; the first layer keeps
    every input column and the output layer every class row.
    """
    layers = hidden_layers(global_params)
    selected = {}
    for layer_index, name in enumerate(layers):
        full_width = global_params[f"{name}.weight"].shape[0]
        selected[name] = select_indices(full_width, fraction, scheme, round_index, seed, client_id, layer_index)

    sub = {}
    previous = None
    for name in layers + [OUTPUT_LAYER]:
        weight, bias = global_params.layer(name)
        rows = selected.get(name, np.arange(weight.shape[0]))
        cols = np.arange(weight.shape[1]) if previous is None else previous
        sub[f"{name}.weight"] = weight[np.ix_(rows, cols)]
        sub[f"{name}.bias"] = bias[rows]
        previous = rows
    return ParameterSet(sub), IndexMap(selected)


def coordinates(global_params: ParameterSet, index_map: IndexMap) -> Dict[str, Tuple[np.ndarray, ...]]:
    """Global-coordinate index arrays (for np.ix_) of every sub-model tensor."""
    layers = hidden_layers(global_params)
    coords = {}
    previous = None
    for name in layers + [OUTPUT_LAYER]:
        weight = global_params[f"{name}.weight"]
        rows = index_map.layers.get(name, np.arange(weight.shape[0]))
        cols = np.arange(weight.shape[1]) if previous is None else previous
        coords[f"{name}.weight"] = (rows, cols)
        coords[f"{name}.bias"] = (rows,)
        previous = rows
    return coords
