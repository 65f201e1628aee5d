from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from heterofed.extraction import IndexMap, coordinates
from models.parameter_set import ParameterSet


@dataclass
class ClientUpload:
    params: ParameterSet
    index_map: IndexMap
    weight: float


@dataclass
class UpdateCount:
    """Per global coordinate, the summed weight of the clients that updated it this round."""
    totals: Dict[str, np.ndarray]

    def untouched(self, key: str) -> np.ndarray:
        return self.totals[key] == 0

    def untouched_fraction(self) -> float:
        """Share of all global coordinates no client updated."""
        untouched = sum(int(np.count_nonzero(total == 0)) for total in self.totals.values())
        return untouched / max(sum(total.size for total in self.totals.values()), 1)


def _check_block(key: str, global_shape, index: Sequence[np.ndarray], block: np.ndarray) -> None:
    for axis, indices in enumerate(index):
        if indices.size and (indices.min() < 0 or indices.max() >= global_shape[axis]):
            raise IndexError(f"{key}: index out of range for global shape {global_shape}")
    expected = tuple(indices.size for indices in index)
    if block.shape != expected:
        raise ValueError(f"{key}: sub-model block {block.shape} does not match its index map {expected}")


def aggregate_with_counts(global_params: ParameterSet, updates: List[ClientUpload]):
    """Selective averaging: each coordinate becomes the weighted mean over the clients holding it.

    The denominator of a coordinate sums the weights of exactly those clients; coordinates
    no client holds keep their previous value.
    """
    sums = {key: np.zeros_like(value) for key, value in global_params.items()}
    totals = {key: np.zeros_like(value) for key, value in global_params.items()}

    for update in updates:
        if update.weight < 0:
            raise ValueError(f"client weights must be non-negative, got {update.weight}")
        for key, index in coordinates(global_params, update.index_map).items():
            block = update.params[key]
            _check_block(key, global_params[key].shape, index, block)
            position = np.ix_(*index)
            sums[key][position] += update.weight * block
            totals[key][position] += update.weight

    merged = {}
    for key, value in global_params.items():
        held = totals[key] > 0
        merged[key] = np.where(held, sums[key] / np.where(held, totals[key], 1.0), value)
    return ParameterSet(merged), UpdateCount(totals)


def aggregate(global_params: ParameterSet, updates: List[ClientUpload]) -> ParameterSet:
    merged, _ = aggregate_with_counts(global_params, updates)
    return merged


def weighted_average(models: Sequence[ParameterSet], weights: Sequence[float]) -> ParameterSet:
    """Plain weighted average of full models (the FedAvg server step)."""
    total = float(np.sum(weights))
    return models[0].map(lambda key, _: sum(w * m[key] for m, w in zip(models, weights)) / total)
