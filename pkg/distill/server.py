from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from diffcore.graph import Graph, backward
from diffcore.optim import LITERAL, AdamState, adam_step_literal, sgd_step
from distill.ema import EmaGenerator
from distill.losses import GateVariant, LocalModel, ensemble_logits, loss_distill, loss_generator
from distill.weighting import WeightTable, sample_labels
from models.classifier import classifier_forward
from models.generator import GeneratorState, generator_forward
from models.parameter_set import ParameterSet

GENERATOR_SCOPE = "generator"
GLOBAL_SCOPE = "global"


@dataclass
class ServerHyperParams:
    iterations: int = 10
    generator_steps: int = 5
    distill_steps: int = 2
    generator_lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    distill_lr: float = 0.1
    beta_tran: float = 1.0
    beta_div: float = 1.0
    alpha: float = 0.5
    batch_size: int = 64
    gate: GateVariant = GateVariant.DIAMOND
    bias_correction: str = LITERAL


@dataclass
class SyntheticBatch:
    samples: np.ndarray
    labels: np.ndarray


@dataclass
class ServerResult:
    global_params: ParameterSet
    generator: GeneratorState
    loss_fid: float = 0.0
    loss_tran: float = 0.0
    loss_div: float = 0.0
    loss_kl: float = 0.0
    loss_kl_ema: float = 0.0
    last_batch: Optional[SyntheticBatch] = None
    history: List[float] = field(default_factory=list)


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def _noise_batch(gen: GeneratorState, table: WeightTable, batch_size: int, rng: np.random.Generator):
    z = rng.standard_normal((batch_size, gen.spec.noise_dim))
    labels = sample_labels(table.p, batch_size, rng)
    return z, labels


def train_generator_step(gen: GeneratorState, global_params: ParameterSet, global_widths: Sequence[int],
                         local_models: Sequence[LocalModel], table: WeightTable, z: np.ndarray,
                         labels: np.ndarray, hyper: ServerHyperParams, state: AdamState):
    """One generator update on a fixed (z, y) batch; the classifiers stay frozen."""
    graph = Graph()
    bound = graph.bind(gen.params, GENERATOR_SCOPE)
    s, h = generator_forward(gen, z, labels, params=bound)
    ensemble = ensemble_logits(local_models, table.tau, s, labels)
    global_logits = classifier_forward(global_params, global_widths, s)
    loss = loss_generator(global_logits, ensemble, s, h, labels, hyper.gate, hyper.beta_tran, hyper.beta_div)
    grads = backward(loss.total, graph).for_scope(GENERATOR_SCOPE)
    state, params = adam_step_literal(state, gen.params, grads)
    return gen.with_params(params), state, loss


def distill_step(global_params: ParameterSet, global_widths: Sequence[int], local_models: Sequence[LocalModel],
                 table: WeightTable, s: np.ndarray, labels: np.ndarray, s_ema: Optional[np.ndarray],
                 labels_ema: Optional[np.ndarray], alpha: float, lr: float):
    graph = Graph()
    bound = graph.bind(global_params, GLOBAL_SCOPE)
    loss = loss_distill(bound, global_widths, local_models, table.tau, s, labels, s_ema, labels_ema, alpha)
    grads = backward(loss.total, graph).for_scope(GLOBAL_SCOPE)
    return sgd_step(global_params, grads, lr), loss


def server_update(local_models: Sequence[LocalModel], global_params: ParameterSet, global_widths: Sequence[int],
                  gen: GeneratorState, ema: Optional[EmaGenerator], table: WeightTable,
                  hyper: ServerHyperParams, rng: np.random.Generator) -> ServerResult:
    """Alternate generator training and robust distillation of the global model.

    Each outer iteration draws one (z, y) batch, resets the optimizer moments, runs
    ``generator_steps`` generator updates on that batch, then ``distill_steps`` SGD steps on
    the global model. While the EMA generator is live every distillation step also draws a
    fresh batch from it and weighs its KL term by alpha.
    """
    fid, tran, div, kl, kl_ema = [], [], [], [], []
    last_batch = None
    ema_live = ema is not None and ema.is_live

    for _ in range(hyper.iterations):
        z, labels = _noise_batch(gen, table, hyper.batch_size, rng)
        state = AdamState.zeros_like(gen.params, b1=hyper.beta1, b2=hyper.beta2, lr=hyper.generator_lr,
                                     bias_correction=hyper.bias_correction)
        for _ in range(hyper.generator_steps):
            gen, state, loss = train_generator_step(gen, global_params, global_widths, local_models, table,
                                                    z, labels, hyper, state)
            fid.append(loss.fidelity)
            tran.append(loss.transferability)
            div.append(loss.diversity)

        for _ in range(hyper.distill_steps):
            s = generator_forward(gen, z, labels)[0].data
            s_ema = labels_ema = None
            if ema_live:
                z_ema, labels_ema = _noise_batch(gen, table, hyper.batch_size, rng)
                s_ema = generator_forward(GeneratorState(gen.spec, ema.params), z_ema, labels_ema)[0].data
            global_params, loss = distill_step(global_params, global_widths, local_models, table, s, labels,
                                               s_ema, labels_ema, hyper.alpha if ema_live else 0.0,
                                               hyper.distill_lr)
            kl.append(loss.kl)
            kl_ema.append(loss.kl_ema)
            last_batch = SyntheticBatch(s, labels)

    return ServerResult(global_params, gen, _mean(fid), _mean(tran), _mean(div), _mean(kl), _mean(kl_ema),
                        last_batch, kl)
