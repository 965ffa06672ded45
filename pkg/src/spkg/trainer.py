"""Mini-batch training with sparse AdaGrad and best-epoch selection."""

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .evaluation import FilterIndex, calibration_metrics, ranking_metrics, triple_scores
from .models import ModelConfig, init_embeddings
from .objectives import NEG, ObjectiveConfig, corrupt_batch, negsampling_batch_loss, sp_batch_loss
from .seeding import derive_rng

logger = logging.getLogger(__name__)

VALID_MRR = "valid_mrr"
VALID_NLL = "valid_nll"


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    l2: float = 0.0
    dropout: float = 0.0
    batch_size: int = 100
    epochs: int = 100
    seed: int = 0
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    selection_metric: str = VALID_MRR
    eval_every: int = 1

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("lr must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.selection_metric not in (VALID_MRR, VALID_NLL):
            raise ConfigError(f"unknown selection metric {self.selection_metric!r}")
        if self.eval_every < 0:
            raise ConfigError("eval_every must be >= 0")


def make_batches(train, batch_size, rng):
    """Shuffle ``train`` with ``rng`` and cut it into chunks of ``batch_size``."""
    train = np.asarray(train, dtype=np.int64).reshape(-1, 3)
    order = rng.permutation(len(train))
    shuffled = train[order]
    return [shuffled[i:i + batch_size] for i in range(0, len(train), batch_size)]


@dataclass
class AdaGradState:
    """Squared-gradient accumulators, one dense array per table, allocated on first touch."""

    eps: float = 1e-10
    accumulators: dict = field(default_factory=dict)


def adagrad_update(params, grads, state, lr):
    """Sparse AdaGrad step on the rows present in ``grads`` (in place)."""
    for table, (idx, g) in grads.items():
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient in table {table!r}")
        acc = state.accumulators.get(table)
        if acc is None:
            acc = state.accumulators[table] = np.zeros_like(params[table])
        acc[idx] += g * g
        params[table][idx] -= lr * g / (np.sqrt(acc[idx]) + state.eps)


def apply_regularization_and_dropout(grads, params, l2, dropout_p, rng=None):
    """Add ``l2 * theta`` to touched rows, then drop gradient elements with inverted scaling."""
    if l2 == 0 and dropout_p == 0:
        return grads
    if dropout_p > 0 and rng is None:
        raise ValueError("dropout needs an rng")
    keep = 1.0 - dropout_p

    def transform(table, idx, rows):
        if l2:
            rows = rows + l2 * params[table][idx]
        if dropout_p:
            mask = rng.random(rows.shape) < keep
            rows = np.where(mask, rows / keep, 0.0)
        return rows

    return grads.map_rows(transform)


@dataclass
class EpochReport:
    epoch: int
    loss: float
    total_ms: float
    sampling_ms: float
    rest_ms: float
    n_scores: int = 0
    valid_metric: float | None = None

    @property
    def sampling_fraction(self):
        return self.sampling_ms / self.total_ms if self.total_ms > 0 else 0.0


class EpochRunner:
    """Holds optimizer state and the derived random streams across epochs."""

    def __init__(self, model, config):
        self.model = model
        self.config = config
        self.state = AdaGradState()
        self.batch_rng = derive_rng(config.seed, "batches")
        self.neg_rng = derive_rng(config.seed, "negatives")
        self.dropout_rng = derive_rng(config.seed, "dropout")

    def run(self, train, epoch, clock=time.perf_counter):
        cfg = self.config
        obj = cfg.objective
        start = clock()
        sampling = 0.0
        losses = []
        n_scores = 0
        for batch in make_batches(train, cfg.batch_size, self.batch_rng):
            if obj.mode == NEG:
                t0 = clock()
                negatives = corrupt_batch(batch, obj.neg_ratio, self.model.n_entities, self.neg_rng)
                sampling += clock() - t0
                res = negsampling_batch_loss(self.model, batch, obj, negatives=negatives)
            else:
                res = sp_batch_loss(self.model, batch, obj)
            if not np.isfinite(res.total):
                raise NumericalError(f"non-finite loss in epoch {epoch}")
            grads = apply_regularization_and_dropout(res.gradients, self.model.params, cfg.l2,
                                                     cfg.dropout, self.dropout_rng)
            adagrad_update(self.model.params, grads, self.state, cfg.lr)
            losses.append(res.total)
            n_scores += res.n_scores
        total = clock() - start
        return EpochReport(epoch=epoch, loss=float(np.mean(losses)) if losses else 0.0,
                           total_ms=1e3 * total, sampling_ms=1e3 * sampling,
                           rest_ms=1e3 * (total - sampling), n_scores=n_scores)


def train_epoch(model, train, config, runner=None, epoch=1, clock=time.perf_counter):
    """Run one epoch in place; pass the same ``runner`` to continue optimizer state."""
    runner = runner or EpochRunner(model, config)
    return runner.run(train, epoch, clock)


@dataclass
class TrainResult:
    best_model: object
    best_epoch: int
    history: list


def validation_metric(model, dataset, metric, filter_index=None):
    """Higher-is-better value of ``metric`` on the validation split."""
    if metric == VALID_NLL:
        scores = triple_scores(model, dataset.valid)
        return -calibration_metrics(scores, dataset.valid_labels).nll
    valid = dataset.positives("valid")
    if filter_index is None:
        filter_index = FilterIndex(dataset.known_triples())
    return ranking_metrics(model, valid, filter_index).mrr_filtered


def train(dataset, config, model=None, on_epoch=None):
    """Train on ``dataset.train`` and keep the parameters of the best validation epoch.

    Validation runs every ``config.eval_every`` epochs (0 disables it, in which
    case the last epoch is kept). History entries carry the validation value
    as stored in the CSV: MRR for ``valid_mrr`` and NLL for ``valid_nll``.
    """
    mcfg = config.model
    if config.objective.mode != NEG and not mcfg.constrained:
        logger.warning("regularized objective with unconstrained scores; the sum is unbounded")
    evaluating = config.eval_every > 0 and len(dataset.valid) > 0
    if evaluating and config.selection_metric == VALID_NLL:
        if dataset.valid_labels is None:
            raise ConfigError("valid_nll selection needs a labeled validation split")
    if model is None:
        model = init_embeddings(mcfg, dataset.n_entities, dataset.n_relations)
    runner = EpochRunner(model, config)
    filter_index = FilterIndex(dataset.known_triples()) if evaluating else None
    history = []
    best, best_epoch, best_value = model.copy(), 0, -np.inf
    for epoch in range(1, config.epochs + 1):
        try:
            report = runner.run(dataset.train, epoch)
        except NumericalError as exc:
            exc.best_model = best
            raise
        if evaluating and (epoch % config.eval_every == 0 or epoch == config.epochs):
            value = validation_metric(model, dataset, config.selection_metric, filter_index)
            report.valid_metric = -value if config.selection_metric == VALID_NLL else value
            if value > best_value:
                best, best_epoch, best_value = model.copy(), epoch, value
        elif not evaluating:
            best, best_epoch = model, epoch
        history.append(report)
        logger.info("epoch %d loss %.6f (%.1f ms) valid %s", epoch, report.loss,
                    report.total_ms, report.valid_metric)
        if on_epoch is not None:
            on_epoch(report, model)
    if best is model:
        best = model.copy()
    return TrainResult(best, best_epoch, history)


HISTORY_COLUMNS = ("epoch", "loss", "total_ms", "sampling_ms", "rest_ms", "valid_metric")


def write_history_csv(path, history):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for r in history:
            writer.writerow([r.epoch, repr(r.loss), f"{r.total_ms:.3f}", f"{r.sampling_ms:.3f}",
                             f"{r.rest_ms:.3f}", "" if r.valid_metric is None else repr(r.valid_metric)])
