"""Generator and distillation objectives of the server phase."""
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from diffcore import ops
from diffcore.functional import cross_entropy, kl_div, kl_div_rows
from diffcore.graph import ContractViolation, Tensor, as_tensor
from models.classifier import classifier_forward
from models.parameter_set import ParameterSet


class GateVariant(str, Enum):
    """Which synthetic samples feed the transferability loss."""
    DIAMOND = "diamond"    # global wrong and ensemble right
    TRIANGLE = "triangle"  # always on
    NABLA = "nabla"        # global and ensemble disagree


@dataclass
class LocalModel:
    """A frozen client model of the current round."""
    client_id: int
    params: ParameterSet
    widths: List[int]


@dataclass
class GeneratorLoss:
    total: Tensor
    fidelity: float
    transferability: float
    diversity: float


@dataclass
class DistillLoss:
    total: Tensor
    kl: float
    kl_ema: float


def ensemble_logits(local_models: Sequence[LocalModel], tau: np.ndarray, s, labels: Sequence[int]) -> Tensor:
    """sum_i tau[i, y_b] * f_i(s_b) for every sample b."""
    if not local_models:
        raise ContractViolation("the ensemble needs at least one local model")
    labels = np.asarray(labels, dtype=np.int64)
    total = None
    for local in local_models:
        weights = tau[local.client_id, labels][:, None]
        term = ops.mul(classifier_forward(local.params, local.widths, s), weights)
        total = term if total is None else ops.add(total, term)
    return total


def loss_fidelity(ensemble, labels: Sequence[int]) -> Tensor:
    return cross_entropy(ensemble, labels)


def transfer_gate(global_logits, ensemble, labels: Sequence[int], variant) -> np.ndarray:
    """Per-sample 0/1 gate; a constant for differentiation."""
    variant = GateVariant(variant)
    global_pred = np.argmax(as_tensor(global_logits).data, axis=-1)
    ensemble_pred = np.argmax(as_tensor(ensemble).data, axis=-1)
    labels = np.asarray(labels, dtype=np.int64)
    if variant == GateVariant.TRIANGLE:
        gate = np.ones(labels.shape, dtype=bool)
    elif variant == GateVariant.NABLA:
        gate = global_pred != ensemble_pred
    else:
        gate = (global_pred != labels) & (ensemble_pred == labels)
    return gate.astype(np.float64)


def loss_transferability(global_logits, ensemble, labels: Sequence[int], variant,
                         gate: Optional[np.ndarray] = None) -> Tensor:
    """-mean_b gate_b * KL(ensemble_b || global_b); pass ``gate`` to hold it fixed."""
    if gate is None:
        gate = transfer_gate(global_logits, ensemble, labels, variant)
    return -ops.mean(ops.mul(kl_div_rows(ensemble, global_logits), gate))


def loss_diversity(s, h) -> Tensor:
    """exp(-sum_{j,k} ||s_j - s_k|| * ||h_j - h_k|| / B^2) over all ordered pairs."""
    s, h = as_tensor(s), as_tensor(h)
    batch = s.shape[0]
    if batch < 2 or h.shape[0] != batch:
        raise ContractViolation(f"diversity needs matching batches of at least 2, got {s.shape} and {h.shape}")
    spread = ops.sum(ops.mul(ops.pairwise_distances(s), ops.pairwise_distances(h)))
    return ops.exp(ops.mul(spread, -1.0 / (batch * batch)))


def loss_generator(global_logits, ensemble, s, h, labels: Sequence[int], variant,
                   beta_tran: float = 1.0, beta_div: float = 1.0,
                   gate: Optional[np.ndarray] = None) -> GeneratorLoss:
    fidelity = loss_fidelity(ensemble, labels)
    total = fidelity
    transferability = diversity = 0.0
    if beta_tran:
        tran = loss_transferability(global_logits, ensemble, labels, variant, gate)
        total = ops.add(total, ops.mul(tran, beta_tran))
        transferability = tran.item()
    if beta_div:
        div = loss_diversity(s, h)
        total = ops.add(total, ops.mul(div, beta_div))
        diversity = div.item()
    return GeneratorLoss(total, fidelity.item(), transferability, diversity)


def loss_distill(global_params, global_widths: Sequence[int], local_models: Sequence[LocalModel],
                 tau: np.ndarray, s, labels: Sequence[int],
                 s_ema=None, labels_ema: Sequence[int] = None, alpha: float = 0.0) -> DistillLoss:
    """KL(global(s) || ensemble(s)) + alpha * KL(global(s_ema) || ensemble(s_ema)).

    Without an EMA batch the second term is absent, which is the alpha = 0 case.
    """
    if s_ema is None and alpha:
        raise ContractViolation("alpha must be 0 while the EMA generator is still the zero copy")

    target = ensemble_logits(local_models, tau, as_tensor(s).data, labels).data
    kl = kl_div(classifier_forward(global_params, global_widths, s), target)
    total, kl_ema = kl, 0.0
    if s_ema is not None and alpha:
        target_ema = ensemble_logits(local_models, tau, as_tensor(s_ema).data, labels_ema).data
        term = kl_div(classifier_forward(global_params, global_widths, s_ema), target_ema)
        total = ops.add(total, ops.mul(term, alpha))
        kl_ema = term.item()
    return DistillLoss(total, kl.item(), kl_ema)
