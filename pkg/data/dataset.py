from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class Dataset:
    """Labelled samples with features in [-1, 1]."""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be [n, D], got shape {self.features.shape}")
        if self.features.shape[0] < 1:
            raise ValueError("a dataset needs at least one sample")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(f"{self.labels.shape[0]} labels for {self.features.shape[0]} samples")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if np.abs(self.features).max() > 1.0:
            raise ValueError("features must lie in [-1, 1]")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices: Sequence[int]) -> Optional["Dataset"]:
        """The samples at ``indices``; None for an empty selection."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return None
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)

    def label_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def class_centers(num_classes: int, dim: int, rng: np.random.Generator, radius: float = 0.6) -> np.ndarray:
    """Fixed per-class centers on a sphere of the given radius."""
    directions = rng.standard_normal((num_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return radius * directions


def make_blobs(num_classes: int, dim: int, n_per_class: int, spread: float, seed: int,
               centers: np.ndarray = None) -> Dataset:
    """Isotropic Gaussian blobs clipped to [-1, 1], ``n_per_class`` samples per class, class-sorted.

    Centers derive from ``seed`` unless given, so a train and a test set drawn with different
    seeds can share centers.
    """
    if num_classes < 2 or dim < 2:
        raise ValueError(f"make_blobs needs at least 2 classes and 2 dimensions, got C={num_classes}, dim={dim}")
    if n_per_class < 1 or spread < 0:
        raise ValueError(f"invalid blob size/spread: n_per_class={n_per_class}, spread={spread}")

    rng = np.random.default_rng(seed)
    if centers is None:
        centers = class_centers(num_classes, dim, rng)
    features = np.repeat(centers, n_per_class, axis=0)
    features = features + spread * rng.standard_normal(features.shape)
    labels = np.repeat(np.arange(num_classes), n_per_class)
    return Dataset(np.clip(features, -1.0, 1.0), labels, num_classes)
