from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np


class WeightingVariant(str, Enum):
    DYNAMIC = "dynamic"  # counts of samples touched in this round's local training
    STATIC = "static"    # full-shard label histograms of the participants
    AVERAGE = "average"  # equal weights, uniform labels


@dataclass
class WeightTable:
    """Per (client, label) ensemble weights tau and the label distribution p used for sampling."""
    tau: np.ndarray
    p: np.ndarray
    variant: WeightingVariant

    @property
    def can_sample(self) -> bool:
        return bool(self.p.sum() > 0)


def _proportional(counts: np.ndarray, participants: Sequence[int]):
    tau = np.zeros(counts.shape, dtype=np.float64)
    selected = counts[participants].astype(np.float64)
    per_label = selected.sum(axis=0)
    held = per_label > 0
    tau[participants] = np.where(held, selected / np.where(held, per_label, 1.0), 0.0)
    total = per_label.sum()
    p = per_label / total if total > 0 else np.zeros_like(per_label)
    return tau, p


def weighting_and_label_dist(label_stats: np.ndarray, participants: Sequence[int],
                             variant: Union[WeightingVariant, str],
                             static_counts: np.ndarray = None) -> WeightTable:
    """Ensemble weights and label distribution for the clients of one round.

    dynamic: tau[i, y] = n_ty(i) / sum_j n_ty(j), p(y) proportional to sum_j n_ty(j), over the
             participants, from the counts touched during local training (``label_stats``);
             labels nobody touched get tau = 0 and p = 0.
    static:  the same formulas on full-shard histograms (``static_counts``).
    average: tau = 1/|S_t| for participants, p uniform.
    """
    variant = WeightingVariant(variant)
    participants = np.asarray(sorted(participants), dtype=np.int64)
    if participants.size == 0:
        raise ValueError("weighting needs at least one participating client")
    label_stats = np.asarray(label_stats)
    if np.any(label_stats < 0):
        raise ValueError("label statistics must be non-negative")

    if variant == WeightingVariant.AVERAGE:
        num_clients, num_classes = label_stats.shape
        tau = np.zeros((num_clients, num_classes))
        tau[participants] = 1.0 / participants.size
        return WeightTable(tau, np.full(num_classes, 1.0 / num_classes), variant)

    if variant == WeightingVariant.STATIC:
        if static_counts is None:
            raise ValueError("static weighting needs the clients' full label histograms")
        tau, p = _proportional(np.asarray(static_counts), participants)
    else:
        tau, p = _proportional(label_stats, participants)
    return WeightTable(tau, p, variant)


def sample_labels(p: np.ndarray, batch_size: int, seed: Union[int, np.random.Generator]) -> np.ndarray:
    """I.i.d. categorical draws of ``batch_size`` class ids from p."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or p.sum() <= 0:
        raise ValueError(f"cannot sample labels from a degenerate distribution: {p.tolist()}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.choice(p.size, size=batch_size, p=p / p.sum())
