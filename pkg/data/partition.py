from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np

from data.dataset import Dataset


@dataclass
class Partition:
    """Disjoint per-client index lists into a parent dataset; empty shards are allowed."""
    client_indices: List[np.ndarray]

    def __post_init__(self):
        self.client_indices = [np.asarray(indices, dtype=np.int64) for indices in self.client_indices]
        merged = np.concatenate(self.client_indices) if self.client_indices else np.empty(0, np.int64)
        if np.unique(merged).size != merged.size:
            raise ValueError("partition shards overlap")

    @property
    def num_clients(self) -> int:
        return len(self.client_indices)

    def sizes(self) -> List[int]:
        return [int(indices.size) for indices in self.client_indices]

    def rows(self) -> Iterator[Tuple[int, int]]:
        """(client_id, sample_index) pairs for CSV export."""
        for client_id, indices in enumerate(self.client_indices):
            for index in indices:
                yield client_id, int(index)

    def label_counts(self, dataset: Dataset) -> np.ndarray:
        """N x C matrix of per-client label histograms."""
        counts = np.zeros((self.num_clients, dataset.num_classes), dtype=np.int64)
        for client_id, indices in enumerate(self.client_indices):
            if indices.size:
                counts[client_id] = np.bincount(dataset.labels[indices], minlength=dataset.num_classes)
        return counts


def largest_remainder(total: int, shares: np.ndarray) -> np.ndarray:
    """Integer counts summing exactly to ``total`` that follow ``shares`` (which sum to 1)."""
    raw = total * shares
    counts = np.floor(raw).astype(np.int64)
    missing = total - int(counts.sum())
    if missing > 0:
        # stable sort keeps ties in client order
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:missing]] += 1
    return counts


def dirichlet_partition(dataset: Dataset, num_clients: int, omega: float, seed: int) -> Partition:
    """Split every class across clients with shares q_c ~ Dir(omega * 1_N)."""
    if omega <= 0 or num_clients < 1:
        raise ValueError(f"dirichlet_partition needs omega > 0 and N >= 1, got omega={omega}, N={num_clients}")

    rng = np.random.default_rng(seed)
    shards: List[List[np.ndarray]] = [[] for _ in range(num_clients)]
    for label in range(dataset.num_classes):
        members = rng.permutation(np.flatnonzero(dataset.labels == label))
        counts = largest_remainder(members.size, rng.dirichlet(np.full(num_clients, omega)))
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for client_id in range(num_clients):
            shards[client_id].append(members[bounds[client_id]:bounds[client_id + 1]])

    return Partition([np.sort(np.concatenate(parts)) for parts in shards])


def split_local_test(test: Dataset, num_clients: int, seed: int) -> Partition:
    """Shuffle the test set and deal it into N shards whose sizes differ by at most one."""
    if num_clients < 1 or num_clients > len(test):
        raise ValueError(f"cannot split {len(test)} test samples across {num_clients} clients")
    order = np.random.default_rng(seed).permutation(len(test))
    return Partition(list(np.array_split(order, num_clients)))


def label_entropy(counts: np.ndarray) -> float:
    """Shannon entropy (nats) of a label histogram; 0 for an empty one."""
    total = counts.sum()
    if total == 0:
        return 0.0
    probs = counts[counts > 0] / total
    return float(-(probs * np.log(probs)).sum())
