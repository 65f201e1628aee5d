"""Fast structural checks of the simulator, run by ``simulator.py check``."""
import itertools

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np
from scipy import stats

from diffcore.functional import kl_div
from diffcore.gradcheck import check_gradients
from distill.ema import EmaGenerator, ema_update
from distill.losses import (GateVariant, LocalModel, ensemble_logits, loss_distill, loss_diversity, loss_fidelity,
                            loss_generator, loss_transferability, transfer_gate)
from distill.weighting import WeightingVariant, sample_labels, weighting_and_label_dist
from heterofed.aggregation import ClientUpload, aggregate, weighted_average
from heterofed.budgets import assign_budgets
from heterofed.extraction import ExtractionScheme, IndexMap, extract_submodel, select_indices
from loaders.config_loader import build_experiment
from models.classifier import ClassifierSpec, classifier_forward
from models.generator import GeneratorSpec, GeneratorState, MergeOp, generator_forward
from models.parameter_set import ParameterSet
from utils.clogger import CLogger

SIGNIFICANCE = 0.01

BUDGET_LISTS = {
    10: [1 / 2, 1 / 4, 1 / 8] + [1 / 16] * 7,
    40: [1 / 16] * 10,
    5: [1, 1 / 2, 1 / 2, 1 / 4, 1 / 4, 1 / 8, 1 / 8, 1 / 16, 1 / 16, 1 / 16],
}

TINY_RUN = {
    "dataset": {"kind": "blobs", "num_classes": 3, "dim": 4, "n_per_class": 20, "test_per_class": 5},
    "federation": {"num_clients": 4, "active_clients": 2, "rounds": 2, "local_steps": 2, "batch_size": 8},
    "model": {"hidden_widths": [6]},
    "generator": {"noise_dim": 3, "hidden_widths": [6]},
    "distill": {"iterations": 2, "generator_steps": 1, "distill_steps": 1, "batch_size": 8},
    "output": {"log_level": "WARNING"},
    "seeds": [3],
}


class InvariantViolation(AssertionError):
    pass


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvariantViolation(message)


class _LossFixture:
    """A small random server-phase setup: generator, global model and two slimmed local models."""

    def __init__(self, rng: np.random.Generator, merge_op: MergeOp = MergeOp.MUL):
        self.num_classes, self.batch = 3, 4
        classifier = ClassifierSpec(4, [5], self.num_classes)
        self.global_params = classifier.init_parameters(rng)
        self.widths = [5]
        self.locals = []
        for client_id, fraction in enumerate((1.0, 0.5)):
            sub, index_map = extract_submodel(classifier.init_parameters(rng), fraction, ExtractionScheme.STATIC,
                                              0, 0, client_id)
            self.locals.append(LocalModel(client_id, sub, index_map.widths()))
        tau = rng.uniform(0.1, 1.0, size=(2, self.num_classes))
        self.tau = tau / tau.sum(axis=0)

        generator_spec = GeneratorSpec(3, self.num_classes, 4, [4], merge_op)
        self.gen = GeneratorState(generator_spec, generator_spec.init_parameters(rng))
        self.z = rng.standard_normal((self.batch, 3))
        self.labels = rng.integers(0, self.num_classes, size=self.batch)
        self.gate = rng.integers(0, 2, size=self.batch).astype(np.float64)
        self.s = generator_forward(self.gen, self.z, self.labels)[0].data
        self.s_ema = rng.uniform(-1, 1, size=(self.batch, 4))
        self.labels_ema = rng.integers(0, self.num_classes, size=self.batch)

    def generator_params(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {"generator": {key: value.copy() for key, value in self.gen.params.items()}}

    def global_params_copy(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {"global": {key: value.copy() for key, value in self.global_params.items()}}

    def synthetic(self, bound):
        return generator_forward(self.gen, self.z, self.labels, params=bound["generator"])

    def losses(self) -> Dict[str, tuple]:
        def fidelity(graph, bound):
            s, _ = self.synthetic(bound)
            return loss_fidelity(ensemble_logits(self.locals, self.tau, s, self.labels), self.labels)

        def transferability(graph, bound):
            s, _ = self.synthetic(bound)
            ensemble = ensemble_logits(self.locals, self.tau, s, self.labels)
            global_logits = classifier_forward(self.global_params, self.widths, s)
            return loss_transferability(global_logits, ensemble, self.labels, GateVariant.DIAMOND, self.gate)

        def diversity(graph, bound):
            return loss_diversity(*self.synthetic(bound))

        def generator(graph, bound):
            s, h = self.synthetic(bound)
            ensemble = ensemble_logits(self.locals, self.tau, s, self.labels)
            global_logits = classifier_forward(self.global_params, self.widths, s)
            return loss_generator(global_logits, ensemble, s, h, self.labels, GateVariant.DIAMOND,
                                  gate=self.gate).total

        def distill(graph, bound):
            target = ensemble_logits(self.locals, self.tau, self.s, self.labels).data
            return kl_div(classifier_forward(bound["global"], self.widths, self.s), target)

        def distill_with_ema(graph, bound):
            return loss_distill(bound["global"], self.widths, self.locals, self.tau, self.s, self.labels,
                                self.s_ema, self.labels_ema, alpha=0.5).total

        return {
            "fidelity": (fidelity, self.generator_params),
            "transferability": (transferability, self.generator_params),
            "diversity": (diversity, self.generator_params),
            "generator": (generator, self.generator_params),
            "distill": (distill, self.global_params_copy),
            "distill_ema": (distill_with_ema, self.global_params_copy),
        }


def check_gradient_suite(instances: int = 100, seed: int = 0) -> str:
    """Finite-difference check of every server-side loss, ``instances`` random setups each, cycling the merge op."""
    rng = np.random.default_rng(seed)
    merge_ops = list(MergeOp)
    worst, checked = 0.0, 0
    for instance in range(instances):
        merge_op = merge_ops[instance % len(merge_ops)]
        fixture = _LossFixture(rng, merge_op)
        for name, (loss_fn, params) in fixture.losses().items():
            result = check_gradients(loss_fn, params(), rng, coordinates=8)
            _require(result.passed(), f"{name} ({merge_op.value}): relative error {result.relative_error:.3e} "
                                      f"({result.checked} checked, {result.skipped} skipped)")
            worst = max(worst, result.relative_error)
            checked += 1
    return f"{checked} loss instances over {len(merge_ops)} merge ops, worst relative error {worst:.2e}"


def check_fedavg_reduction(seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    spec = ClassifierSpec(5, [7, 4], 3)
    global_params = spec.init_parameters(rng)
    models = [spec.init_parameters(rng) for _ in range(3)]
    weights = rng.uniform(1, 50, size=3)
    full_map = IndexMap({"hidden0": np.arange(7), "hidden1": np.arange(4)})
    merged = aggregate(global_params, [ClientUpload(m, full_map, w) for m, w in zip(models, weights)])
    expected = weighted_average(models, weights)
    gap = max(float(np.max(np.abs(merged[key] - expected[key]))) for key in merged.keys())
    _require(gap <= 1e-12, f"full-width aggregation differs from weighted averaging by {gap:.3e}")
    return f"max deviation {gap:.1e}"


def check_budget_lists() -> str:
    for rho, expected in BUDGET_LISTS.items():
        fractions = assign_budgets(10, 4, rho).fractions
        _require(fractions == expected, f"rho={rho}: {fractions} != {expected}")
    return f"rho in {sorted(BUDGET_LISTS)}"


def check_rolling_coverage(random_rounds: int = 200) -> str:
    for width in (2, 4, 7, 16):
        covered = set()
        for round_index in range(width):
            covered.update(select_indices(width, 1 / width, ExtractionScheme.ROLLING, round_index, 0, 0, 0).tolist())
        _require(covered == set(range(width)), f"rolling over {width} rounds covered {sorted(covered)}")

        covered = set()
        for round_index in range(random_rounds):
            covered.update(select_indices(width, 1 / width, ExtractionScheme.RANDOM, round_index, 0, 0, 0).tolist())
        _require(covered == set(range(width)), f"random over {random_rounds} rounds covered {sorted(covered)}")
    return "rolling and random selections cover every node"


def label_sampling_pvalue(p: np.ndarray, draws: int, rng: np.random.Generator) -> float:
    """Chi-square goodness of fit of ``draws`` sampled labels against p, over the labels with p > 0."""
    counts = np.bincount(sample_labels(p, draws, rng), minlength=p.size)
    support = p > 0
    _require(not np.any(counts[~support]), "sampled a label whose probability is zero")
    if support.sum() == 1:
        return 1.0
    expected = p[support] / p[support].sum() * draws
    return float(stats.chisquare(counts[support], expected).pvalue)


def check_weighting(tables: int = 1000, draws: int = 10000, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    for _ in range(tables):
        label_stats = rng.integers(0, 6, size=(5, 4)) * rng.integers(0, 2, size=(5, 4))
        participants = sorted(rng.choice(5, size=rng.integers(1, 6), replace=False).tolist())
        table = weighting_and_label_dist(label_stats, participants, WeightingVariant.DYNAMIC)
        held = label_stats[participants].sum(axis=0) > 0
        column_sums = table.tau.sum(axis=0)
        _require(np.all(np.abs(column_sums[held] - 1.0) <= 1e-12), f"tau columns sum to {column_sums}")
        _require(np.all(column_sums[~held] == 0), "labels nobody touched must carry no weight")
        if held.any():
            _require(abs(table.p.sum() - 1.0) <= 1e-12, f"p sums to {table.p.sum()}")

    p = np.array([0.1, 0.2, 0.3, 0.4])
    pvalue = label_sampling_pvalue(p, draws, rng)
    _require(pvalue >= SIGNIFICANCE, f"sampled labels reject p at significance {SIGNIFICANCE} (p-value {pvalue:.4f})")
    return f"{tables} tables, label sampling p-value {pvalue:.3f}"


def check_gate_truth_table() -> str:
    rows = list(itertools.product((0, 1), repeat=3))
    one_hot = np.eye(2)
    global_logits = np.array([one_hot[g] for g, _, _ in rows])
    ensemble = np.array([one_hot[e] for _, e, _ in rows])
    labels = np.array([y for _, _, y in rows])
    gates = {variant: transfer_gate(global_logits, ensemble, labels, variant) for variant in GateVariant}
    for index, (g, e, y) in enumerate(rows):
        expected = {GateVariant.DIAMOND: g != y and e == y, GateVariant.TRIANGLE: True, GateVariant.NABLA: g != e}
        for variant, value in expected.items():
            _require(gates[variant][index] == float(value),
                     f"{variant.value} gate wrong for global={g} ensemble={e} label={y}")
    diamond = gates[GateVariant.DIAMOND]
    _require(np.all(diamond <= gates[GateVariant.TRIANGLE]) and np.all(diamond <= gates[GateVariant.NABLA]),
             "diamond samples must also pass the triangle and nabla gates")
    return f"{len(rows)} sign patterns"


def check_ema() -> str:
    previous = ParameterSet({"w": np.array([2.0, -4.0])})
    current = ParameterSet({"w": np.array([6.0, 0.0])})
    identity = ema_update(EmaGenerator(previous), current, momentum=0.0)
    _require(np.array_equal(identity.params["w"], current["w"]), "momentum 0 must copy the generator")
    midpoint = ema_update(EmaGenerator(previous), current, momentum=0.5)
    _require(np.array_equal(midpoint.params["w"], np.array([4.0, -2.0])), "momentum 0.5 must give the midpoint")

    momentum, ema = 0.99, EmaGenerator(previous, 0.99)
    for _ in range(100):
        ema = ema_update(ema, current)
    decay = momentum ** 100
    closed_form = decay * previous["w"] + (1 - decay) * current["w"]
    gap = float(np.max(np.abs(ema.params["w"] - closed_form)))
    _require(gap <= 1e-6, f"100 EMA steps drift {gap:.3e} from the geometric closed form")
    return "identity, midpoint and geometric decay"


def check_determinism() -> str:
    from simulation.orchestrator import run_experiment

    config = build_experiment(TINY_RUN)
    first = [record.to_row() for record in run_experiment(config).records]
    second = [record.to_row() for record in run_experiment(config).records]
    _require(first == second, "two runs with the same seed produced different records")
    return f"{len(first)} identical rounds"


CHECKS: Dict[str, Callable[[], str]] = {
    "gradients": check_gradient_suite,
    "fedavg_reduction": check_fedavg_reduction,
    "budgets": check_budget_lists,
    "rolling_coverage": check_rolling_coverage,
    "weighting": check_weighting,
    "gates": check_gate_truth_table,
    "ema": check_ema,
    "determinism": check_determinism,
}


def run_checks(names: Sequence[str] = None) -> List[CheckOutcome]:
    """Run the named checks (all by default); failures are reported, not raised."""
    logger = CLogger.for_component("Invariants")
    outcomes = []
    for name in names or CHECKS:
        if name not in CHECKS:
            raise KeyError(f"unknown check: {name}, available checks are => {list(CHECKS)}")
        try:
            outcome = CheckOutcome(name, True, CHECKS[name]())
            logger.info(f"{name}: ok ({outcome.detail})")
        except InvariantViolation as e:
            outcome = CheckOutcome(name, False, str(e))
            logger.error(f"{name}: FAILED ({outcome.detail})")
        outcomes.append(outcome)
    return outcomes
