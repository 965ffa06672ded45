"""Epoch-time comparison of negative sampling against the regularized objective.

For a negative ratio ``n`` the regularized run uses a batch ``n + 1`` times
larger than the negative-sampling run, so both handle roughly the same
number of scored triples per batch.
"""

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .models import init_embeddings
from .objectives import NEG, SP, ObjectiveConfig
from .trainer import EpochRunner, TrainConfig


@dataclass(frozen=True)
class BenchRow:
    model: str
    neg_ratio: int
    batch_neg: int
    batch_sp: int
    neg_epoch_ms: float
    sp_epoch_ms: float
    reduction_pct: float
    neg_sampling_pct: float
    neg_rest_pct: float
    neg_scores: int
    sp_scores: int


def _mean_epoch(dataset, config, epochs):
    model = init_embeddings(config.model, dataset.n_entities, dataset.n_relations)
    runner = EpochRunner(model, config)
    reports = [runner.run(dataset.train, e) for e in range(1, epochs + 1)]
    return reports, model.counters.triple_scores // epochs


def benchmark(dataset, model_config, neg_ratios=(1, 10), batch_size=100, epochs_per_point=1,
              seed=0, lam=0.1):
    """One :class:`BenchRow` per negative ratio."""
    rows = []
    for n in neg_ratios:
        neg_cfg = TrainConfig(batch_size=batch_size, epochs=epochs_per_point, seed=seed,
                              objective=ObjectiveConfig(mode=NEG, neg_ratio=n), model=model_config)
        sp_cfg = TrainConfig(batch_size=(n + 1) * batch_size, epochs=epochs_per_point, seed=seed,
                             objective=ObjectiveConfig(mode=SP, lam=lam), model=model_config)
        neg_reports, neg_scores = _mean_epoch(dataset, neg_cfg, epochs_per_point)
        sp_reports, sp_scores = _mean_epoch(dataset, sp_cfg, epochs_per_point)
        t_neg = float(np.mean([r.total_ms for r in neg_reports]))
        t_sp = float(np.mean([r.total_ms for r in sp_reports]))
        sampling = float(np.mean([r.sampling_ms for r in neg_reports]))
        rows.append(BenchRow(
            model=model_config.kind, neg_ratio=n, batch_neg=batch_size,
            batch_sp=(n + 1) * batch_size, neg_epoch_ms=t_neg, sp_epoch_ms=t_sp,
            reduction_pct=100.0 * (t_neg - t_sp) / t_neg if t_neg > 0 else 0.0,
            neg_sampling_pct=100.0 * sampling / t_neg if t_neg > 0 else 0.0,
            neg_rest_pct=100.0 * (t_neg - sampling) / t_neg if t_neg > 0 else 0.0,
            neg_scores=neg_scores, sp_scores=sp_scores,
        ))
    return rows


def write_bench_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(BenchRow.__dataclass_fields__))
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
