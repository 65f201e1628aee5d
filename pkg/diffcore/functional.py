"""Probability-level losses built from diffcore.ops. Temperature is 1 everywhere."""
from typing import Sequence

import numpy as np

from diffcore import ops
from diffcore.graph import ContractViolation, Tensor, as_tensor


def softmax(logits) -> Tensor:
    """Softmax along the last axis of a [C] or [B, C] tensor."""
    logits = as_tensor(logits)
    if logits.data.size == 0 or logits.shape[-1] == 0:
        raise ContractViolation("softmax of an empty tensor")
    return ops.exp(ops.log_softmax(logits))


def _check_batch(logits: Tensor, name: str) -> None:
    if logits.data.ndim != 2 or logits.shape[0] == 0:
        raise ContractViolation(f"{name} expects logits shaped [B, C], got {logits.shape}")


def cross_entropy(logits, labels: Sequence[int]) -> Tensor:
    """Mean over the batch of -log softmax(logits_b)[label_b]."""
    logits = as_tensor(logits)
    _check_batch(logits, "cross_entropy")
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = logits.shape[1]
    if labels.shape != (logits.shape[0],):
        raise ContractViolation(f"cross_entropy: {labels.shape[0]} labels for a batch of {logits.shape[0]}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ContractViolation(f"cross_entropy: label out of range [0, {num_classes}): {labels.tolist()}")
    return -ops.mean(ops.pick(ops.log_softmax(logits), labels))


def kl_div_rows(logits_p, logits_q) -> Tensor:
    """Per-row KL(P || Q) with P = softmax(logits_p), Q = softmax(logits_q); result [B]."""
    logits_p, logits_q = as_tensor(logits_p), as_tensor(logits_q)
    if logits_p.shape != logits_q.shape:
        raise ContractViolation(f"kl_div: shape mismatch {logits_p.shape} vs {logits_q.shape}")
    _check_batch(logits_p, "kl_div")
    log_p = ops.log_softmax(logits_p)
    log_q = ops.log_softmax(logits_q)
    return ops.sum(ops.exp(log_p) * (log_p - log_q), axis=1)


def kl_div(logits_p, logits_q) -> Tensor:
    """Mean over the batch of KL(softmax(logits_p) || softmax(logits_q))."""
    return ops.mean(kl_div_rows(logits_p, logits_q))
