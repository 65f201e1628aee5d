import logging
import time

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from data.dataset import Dataset
from data.partition import Partition, dirichlet_partition, split_local_test
from distill.ema import EmaGenerator, ema_update
from distill.losses import GateVariant, LocalModel
from distill.server import ServerHyperParams, SyntheticBatch, server_update
from distill.weighting import WeightingVariant, weighting_and_label_dist
from factories.dataset_factory import DatasetFactory
from factories.model_factory import ModelFactory
from heterofed.aggregation import ClientUpload, aggregate_with_counts
from heterofed.budgets import BudgetPlan, assign_budgets, homogeneous_budgets
from heterofed.extraction import ExtractionScheme, IndexMap, extract_submodel
from loaders.config_loader import ExperimentConfig
from models.classifier import predict
from models.generator import GeneratorState
from models.parameter_set import ParameterSet
from models.round_record import RoundRecord, RunSummary
from simulation.client import client_update
from utils.clogger import CLogger
from utils.seeding import SeedStream, derive_rng, derive_seed

FEDAVG = "fedavg"
DFRD = "dfrd"
DATA_FREE = "data_free"
EVERY_ROUND = "every_round"


@dataclass
class ExperimentResult:
    seed: int
    records: List[RoundRecord]
    summary: RunSummary
    final_params: ParameterSet
    partition: Partition
    index_maps: Dict[int, IndexMap] = field(default_factory=dict)
    synthetic: List[Tuple[int, SyntheticBatch]] = field(default_factory=list)


@dataclass
class SeedSummary:
    """mean +- population std over seeds of the per-run best G.acc and its L.acc"""
    seeds: List[int]
    mean_top_g_acc: float
    std_top_g_acc: float
    mean_l_acc: float
    std_l_acc: float


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("mean_std needs at least one value")
    return float(values.mean()), float(values.std())


def accuracy(params: ParameterSet, widths: Sequence[int], dataset: Dataset) -> float:
    return float(np.mean(predict(params, widths, dataset.features) == dataset.labels))


def evaluate_global(params: ParameterSet, widths: Sequence[int], test: Dataset) -> float:
    """Fraction of test samples whose argmax logit (lowest class on ties) equals the label."""
    return accuracy(params, widths, test)


def evaluate_local(local_models: Sequence[LocalModel], test: Dataset, partition: Partition) -> float:
    """Unweighted mean over clients of each sub-model's accuracy on that client's test shard."""
    scores = []
    for local in local_models:
        shard = test.subset(partition.client_indices[local.client_id])
        if shard is not None:
            scores.append(accuracy(local.params, local.widths, shard))
    return float(np.mean(scores)) if scores else 0.0


class Simulation:
    """
    One seeded federated run: partitions, budgets, the global model and the server-side generator.

    config (ExperimentConfig): The validated experiment configuration.
    seed (int): The master seed every random choice of the run derives from.
    """

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self._logger = CLogger.for_component("Simulation", CLogger.parse_level(config.output.log_level))

        fed, dist = config.federation, config.distill
        datasets = DatasetFactory.create(config.dataset, seed)
        self.train, self.test = datasets.train, datasets.test
        self.num_classes = self.train.num_classes

        self.partition = dirichlet_partition(self.train, fed.num_clients, fed.omega,
                                             derive_seed(seed, SeedStream.PARTITION))
        self.test_partition = split_local_test(self.test, fed.num_clients, derive_seed(seed, SeedStream.TEST_SPLIT))
        self.shards = [self.train.subset(indices) for indices in self.partition.client_indices]
        self.static_counts = self.partition.label_counts(self.train)

        if fed.scheme == FEDAVG:
            self.budgets: BudgetPlan = homogeneous_budgets(fed.num_clients)
            self.scheme = ExtractionScheme.STATIC
        else:
            self.budgets = assign_budgets(fed.num_clients, fed.sigma, fed.rho)
            self.scheme = ExtractionScheme(fed.scheme)

        self.classifier_spec = ModelFactory.create_classifier_spec(config, self.train.dim, self.num_classes)
        self.global_params = ModelFactory.create_global(self.classifier_spec, seed)
        self.full_widths = list(self.classifier_spec.hidden_widths)

        self.distilling = dist.method == DFRD
        self.generator: Optional[GeneratorState] = None
        self.ema: Optional[EmaGenerator] = None
        if self.distilling:
            generator_spec = ModelFactory.create_generator_spec(config, self.num_classes, self.train.dim)
            self.generator = ModelFactory.create_generator(generator_spec, seed)
            self.ema = EmaGenerator(None, dist.ema_momentum) if dist.use_ema else None
        self.hyper = ServerHyperParams(
            iterations=dist.iterations, generator_steps=dist.generator_steps, distill_steps=dist.distill_steps,
            generator_lr=dist.generator_lr, beta1=dist.beta1, beta2=dist.beta2, distill_lr=dist.distill_lr,
            beta_tran=dist.beta_tran, beta_div=dist.beta_div, alpha=dist.alpha, batch_size=dist.batch_size,
            gate=GateVariant(dist.gate), bias_correction=dist.bias_correction,
        )

        # LC: touched-sample counts per (client, label), cleared after every round
        self.label_stats = np.zeros((fed.num_clients, self.num_classes), dtype=np.int64)
        self.index_maps: Dict[int, IndexMap] = {}
        self.synthetic: List[Tuple[int, SyntheticBatch]] = []

        empty = [client_id for client_id, shard in enumerate(self.shards) if shard is None]
        if empty:
            self._logger.warning(f"clients without training data (excluded whenever sampled): {empty}")

    def sample_clients(self, round_index: int) -> List[int]:
        fed = self.config.federation
        rng = derive_rng(self.seed, SeedStream.CLIENT_SAMPLING, round_index)
        return sorted(int(c) for c in rng.choice(fed.num_clients, size=fed.active_clients, replace=False))

    def local_models_at(self, round_index: int, clients: Sequence[int]) -> List[LocalModel]:
        """Sub-models each client would receive from the current global model."""
        models = []
        for client_id in clients:
            sub, index_map = extract_submodel(self.global_params, self.budgets[client_id], self.scheme,
                                              round_index, self.seed, client_id)
            models.append(LocalModel(client_id, sub, index_map.widths()))
        return models

    def run_round(self, round_index: int) -> RoundRecord:
        """One communication round; returns its record after evaluating the resulting models."""
        started = time.perf_counter()
        fed, dist = self.config.federation, self.config.distill

        sampled = self.sample_clients(round_index)
        active = [client_id for client_id in sampled if self.shards[client_id] is not None]
        losses = {}

        if not active:
            self._logger.warning(f"round {round_index}: every sampled client {sampled} is empty, round skipped")
        else:
            uploads, local_models = [], []
            for client_id in active:
                sub, index_map = extract_submodel(self.global_params, self.budgets[client_id], self.scheme,
                                                  round_index, self.seed, client_id)
                widths = index_map.widths()
                update = client_update(sub, widths, self.shards[client_id], fed.local_lr, fed.local_steps,
                                       fed.batch_size,
                                       derive_rng(self.seed, SeedStream.CLIENT_BATCHES, round_index, client_id),
                                       with_replacement=fed.sample_with_replacement, num_classes=self.num_classes)
                uploads.append(ClientUpload(update.params, index_map, float(update.num_samples)))
                local_models.append(LocalModel(client_id, update.params, widths))
                self.label_stats[client_id] = update.label_counter.counts
                self.index_maps[client_id] = index_map

            if dist.mode == DATA_FREE:
                if dist.reinit == EVERY_ROUND:
                    self.global_params = ModelFactory.create_global(self.classifier_spec, self.seed, round_index + 1)
            else:
                self.global_params, counts = aggregate_with_counts(self.global_params, uploads)
                self._logger.debug(f"round {round_index}: {counts.untouched_fraction():.1%} of global "
                                   f"coordinates kept their previous value")

            if self.distilling:
                losses = self._distill(round_index, active, local_models)

        # LC is rebuilt from scratch by the next round's clients
        self.label_stats[:] = 0

        g_acc = evaluate_global(self.global_params, self.full_widths, self.test)
        l_acc = evaluate_local(self.local_models_at(round_index, range(fed.num_clients)), self.test,
                               self.test_partition)
        elapsed = time.perf_counter() - started
        self._logger.info(f"round {round_index}: G.acc={g_acc:.4f} L.acc={l_acc:.4f} "
                          f"clients={active} ({elapsed:.2f}s)")

        return RoundRecord(
            round=round_index, g_acc=g_acc, l_acc=l_acc,
            seconds=elapsed if self.config.output.record_wall_time else 0.0,
            participants=active, skipped=not active, **losses,
        )

    def _distill(self, round_index: int, active: List[int], local_models: List[LocalModel]) -> Dict[str, float]:
        dist = self.config.distill
        table = weighting_and_label_dist(self.label_stats, active, WeightingVariant(dist.weighting),
                                         static_counts=self.static_counts)
        if not table.can_sample:
            self._logger.warning(f"round {round_index}: no labels were touched, distillation skipped")
            return {}

        result = server_update(local_models, self.global_params, self.full_widths, self.generator, self.ema,
                               table, self.hyper, derive_rng(self.seed, SeedStream.SERVER, round_index))
        self.global_params = result.global_params
        self.generator = result.generator
        if self.ema is not None:
            self.ema = ema_update(self.ema, self.generator.params)
        if self.config.output.dump_synthetic and result.last_batch is not None:
            self.synthetic.append((round_index, result.last_batch))

        self._logger.debug(f"round {round_index}: fid={result.loss_fid:.4f} tran={result.loss_tran:.4f} "
                           f"div={result.loss_div:.4f} kl={result.loss_kl:.4f} kl_ema={result.loss_kl_ema:.4f}")
        return {
            "loss_fid": result.loss_fid, "loss_tran": result.loss_tran, "loss_div": result.loss_div,
            "loss_kl": result.loss_kl, "loss_kl_ema": result.loss_kl_ema,
        }

    def run(self) -> ExperimentResult:
        records = [self.run_round(t) for t in range(self.config.federation.rounds)]
        summary = RunSummary.from_records(self.seed, records)
        self._logger.info(f"seed {self.seed}: top G.acc={summary.top_g_acc:.4f} "
                          f"(L.acc {summary.l_acc_at_top:.4f}) at round {summary.best_round}")
        return ExperimentResult(self.seed, records, summary, self.global_params, self.partition,
                                dict(self.index_maps), list(self.synthetic))


def run_experiment(config: ExperimentConfig, seed: int = None) -> ExperimentResult:
    """Execute all rounds of ``config`` for one seed (the first configured seed by default)."""
    config.validate()
    seed = config.seeds[0] if seed is None else seed
    return Simulation(config, seed).run()


def summarize_seeds(results: Sequence[ExperimentResult]) -> SeedSummary:
    top_mean, top_std = mean_std([result.summary.top_g_acc for result in results])
    local_mean, local_std = mean_std([result.summary.l_acc_at_top for result in results])
    return SeedSummary([result.seed for result in results], top_mean, top_std, local_mean, local_std)


def run_seeds(config: ExperimentConfig, seeds: Sequence[int] = None) -> Tuple[List[ExperimentResult], SeedSummary]:
    seeds = list(config.seeds if seeds is None else seeds)
    results = [run_experiment(config, seed) for seed in seeds]
    summary = summarize_seeds(results)
    logger = CLogger.for_component("Simulation")
    if logger.isEnabledFor(logging.INFO):
        logger.info(f"{len(seeds)} seeds: top G.acc {summary.mean_top_g_acc:.4f} +- {summary.std_top_g_acc:.4f}, "
                    f"L.acc {summary.mean_l_acc:.4f} +- {summary.std_l_acc:.4f}")
    return results, summary
