from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from data.dataset import Dataset
from diffcore.functional import cross_entropy
from diffcore.graph import Graph, backward
from diffcore.optim import sgd_step
from models.classifier import classifier_forward
from models.parameter_set import ParameterSet

LOCAL_SCOPE = "local"


@dataclass
class LabelCounter:
    """Per label, the number of distinct local samples touched during training."""
    counts: np.ndarray

    @classmethod
    def empty(cls, num_classes: int) -> "LabelCounter":
        return cls(np.zeros(num_classes, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClientUpdate:
    params: ParameterSet
    label_counter: LabelCounter
    num_samples: int
    skipped: bool = False
    final_loss: float = 0.0


def client_update(sub: ParameterSet, widths: Sequence[int], local_train: Optional[Dataset], lr: float,
                  steps: int, batch_size: int, seed: Union[int, np.random.Generator],
                  with_replacement: bool = True, num_classes: int = None) -> ClientUpdate:
    """Local SGD on cross-entropy for ``steps`` sampled batches.

    Every distinct sample drawn in any step is cached once and counted under its label.
    A client without data is skipped and reports all-zero counts.
    """
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    if local_train is None or len(local_train) == 0:
        if num_classes is None:
            raise ValueError("an empty client needs num_classes to report its label counter")
        return ClientUpdate(sub, LabelCounter.empty(num_classes), 0, skipped=True)

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    size = len(local_train)
    cache = np.zeros(size, dtype=bool)
    params = sub
    loss_value = 0.0

    for _ in range(steps):
        if with_replacement:
            batch = rng.integers(0, size, size=batch_size)
        else:
            batch = rng.choice(size, size=min(batch_size, size), replace=False)
        cache[batch] = True

        graph = Graph()
        bound = graph.bind(params, LOCAL_SCOPE)
        loss = cross_entropy(classifier_forward(bound, widths, local_train.features[batch]),
                             local_train.labels[batch])
        grads = backward(loss, graph).for_scope(LOCAL_SCOPE)
        params = sgd_step(params, grads, lr)
        loss_value = loss.item()

    counts = np.bincount(local_train.labels[cache], minlength=local_train.num_classes)
    return ClientUpdate(params, LabelCounter(counts.astype(np.int64)), size, final_loss=loss_value)
