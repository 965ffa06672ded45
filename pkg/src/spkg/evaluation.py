"""Link-prediction ranking metrics, calibration metrics and Platt scaling."""

import csv
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .models import DISTMULT, _scale, forward_batch
from .objectives import softplus_loss

HITS_AT = (1, 3, 10)
HEAD = "head"
TAIL = "tail"


class FilterIndex:
    """Known-true completions for filtered ranking.

    ``tails[(h, r)]`` and ``heads[(r, t)]`` hold every entity that completes the
    query to a known triple. Duplicate triples collapse (set semantics).
    """

    def __init__(self, *splits):
        tails, heads = {}, {}
        for split in splits:
            for h, r, t in np.asarray(split, dtype=np.int64).reshape(-1, 3).tolist():
                tails.setdefault((h, r), set()).add(t)
                heads.setdefault((r, t), set()).add(h)
        self.tails = {k: np.fromiter(v, dtype=np.int64) for k, v in tails.items()}
        self.heads = {k: np.fromiter(v, dtype=np.int64) for k, v in heads.items()}

    def known(self, triple, side):
        h, r, t = (int(x) for x in triple)
        empty = np.empty(0, dtype=np.int64)
        if side == TAIL:
            return self.tails.get((h, r), empty)
        return self.heads.get((r, t), empty)

    def __contains__(self, triple):
        h, r, t = (int(x) for x in triple)
        return t in self.tails.get((h, r), ())


def _tables(model):
    f = np.tanh if model.config.constrained else (lambda x: x)
    return {name: f(p) for name, p in model.params.items()}


def candidate_scores(model, triples, side, tables=None):
    """Prediction scores of every entity completing each query.

    Returns an array of shape ``(len(triples), n_entities)``. ``side`` names
    the position being replaced.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    tb = _tables(model) if tables is None else tables
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    if model.kind == DISTMULT:
        e, rel = tb["entity"], tb["relation"]
        query = rel[r] * (e[h] if side == TAIL else e[t])
        raw = query @ e.T
    else:
        eh, et, rf, ri = tb["entity_head"], tb["entity_tail"], tb["relation"], tb["relation_inv"]
        if side == TAIL:
            raw = (eh[h] * rf[r]) @ et.T + (ri[r] * et[h]) @ eh.T
        else:
            raw = (rf[r] * et[t]) @ eh.T + (eh[t] * ri[r]) @ et.T
    model.counters.triple_scores += raw.size
    return _scale(model, model.config.constrained) * raw + model.config.psi


def _ranks_from_scores(scores, true_ids, exclude=None):
    """Pessimistic ranks: 1 + number of other candidates scoring >= the true one."""
    rows = np.arange(len(true_ids))
    true_scores = scores[rows, true_ids]
    ahead = scores >= true_scores[:, None]
    ahead[rows, true_ids] = False
    if exclude is not None:
        for i, known in enumerate(exclude):
            if known.size:
                ahead[i, known] = False
                ahead[i, true_ids[i]] = False
    return 1 + ahead.sum(axis=1)


def compute_ranks(model, triples, filter_index=None, chunk=256):
    """Raw and filtered ranks for both queries of every triple.

    Returns ``(raw, filtered)``, each of shape ``(n, 2)`` with column 0 the
    head query ``(?, r, t)`` and column 1 the tail query ``(h, r, ?)``.
    Without ``filter_index`` the filtered ranks equal the raw ones.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    tables = _tables(model)
    raw = np.zeros((len(triples), 2), dtype=np.int64)
    filt = np.zeros_like(raw)
    for start in range(0, len(triples), chunk):
        part = triples[start:start + chunk]
        for col, side in enumerate((HEAD, TAIL)):
            scores = candidate_scores(model, part, side, tables)
            true_ids = part[:, 0] if side == HEAD else part[:, 2]
            raw[start:start + len(part), col] = _ranks_from_scores(scores, true_ids)
            if filter_index is None:
                filt[start:start + len(part), col] = raw[start:start + len(part), col]
            else:
                known = [filter_index.known(tr, side) for tr in part]
                filt[start:start + len(part), col] = _ranks_from_scores(scores, true_ids, known)
    return raw, filt


def rank_entity(model, triple, side, filter_index=None):
    """Rank of the true entity for one query; filtered when ``filter_index`` is given."""
    raw, filt = compute_ranks(model, [triple], filter_index)
    col = 0 if side == HEAD else 1
    return int((filt if filter_index is not None else raw)[0, col])


@dataclass(frozen=True)
class RankingReport:
    mrr_raw: float
    mrr_filtered: float
    hits_raw: dict = field(default_factory=dict)
    hits_filtered: dict = field(default_factory=dict)
    n_queries: int = 0

    def rows(self):
        yield "ranking", "mrr_raw", self.mrr_raw
        yield "ranking", "mrr_filtered", self.mrr_filtered
        for k in sorted(self.hits_raw):
            yield "ranking", f"hit@{k}_raw", self.hits_raw[k]
        for k in sorted(self.hits_filtered):
            yield "ranking", f"hit@{k}_filtered", self.hits_filtered[k]


def metrics_from_ranks(raw, filtered, hits_at=HITS_AT):
    raw = np.asarray(raw).ravel()
    filtered = np.asarray(filtered).ravel()
    return RankingReport(
        mrr_raw=float(np.mean(1.0 / raw)),
        mrr_filtered=float(np.mean(1.0 / filtered)),
        hits_raw={k: float(np.mean(raw <= k)) for k in hits_at},
        hits_filtered={k: float(np.mean(filtered <= k)) for k in hits_at},
        n_queries=int(raw.size),
    )


def ranking_metrics(model, test, filter_index=None, hits_at=HITS_AT):
    """MRR and Hit@k over head and tail queries, raw and filtered."""
    test = np.asarray(test, dtype=np.int64).reshape(-1, 3)
    if len(test) == 0:
        raise ValueError("ranking metrics need at least one test triple")
    raw, filt = compute_ranks(model, test, filter_index)
    return metrics_from_ranks(raw, filt, hits_at)


# Calibration ----------------------------------------------------------------------------------


def auc_score(scores, labels):
    """Probability that a random positive outscores a random negative (ties count 1/2).

    Returns ``None`` when only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def probability_histogram(scores, n_bins=10):
    """Counts of ``sigmoid(scores)`` in equal-width bins over [0, 1], plus the probabilities.

    The right edge 1.0 belongs to the last bin.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    probs = expit(np.asarray(scores, dtype=np.float64))
    bins = np.minimum((probs * n_bins).astype(np.int64), n_bins - 1)
    return np.bincount(bins, minlength=n_bins), probs


@dataclass(frozen=True)
class CalibrationReport:
    nll: float
    brier: float
    auc: float | None
    histogram: tuple = ()
    n: int = 0

    def rows(self, group="calibration"):
        yield group, "nll", self.nll
        yield group, "brier", self.brier
        yield group, "auc", "" if self.auc is None else self.auc


def calibration_metrics(scores, labels, n_bins=10):
    """NLL (labels in {-1, +1}), Brier score, AUC and a probability histogram."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.size == 0:
        raise ValueError("need equally many scores and labels, at least one")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    nll = float(np.mean(softplus_loss(scores, labels)))
    target = (labels > 0).astype(np.float64)
    brier = float(np.mean((expit(scores) - target) ** 2))
    counts, _ = probability_histogram(scores, n_bins)
    return CalibrationReport(nll, brier, auc_score(scores, labels), tuple(int(c) for c in counts),
                             int(scores.size))


def triple_scores(model, triples):
    """Prediction scores (unshifted score plus ``psi``) for an ``(n, 3)`` array."""
    fwd = forward_batch(model, triples)
    return fwd.scores + model.config.psi


def write_probability_csv(path, probabilities, labels=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["triple_index", "label", "probability"])
        for i, p in enumerate(np.asarray(probabilities)):
            writer.writerow([i, "" if labels is None else int(labels[i]), repr(float(p))])


def write_report_csv(path, *reports):
    """One ``metric,name,value`` row per reported number."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "name", "value"])
        for rows in reports:
            for row in rows:
                writer.writerow(row)


def format_rows(*reports):
    lines = []
    for rows in reports:
        for group, name, value in rows:
            value = f"{value:.6f}" if isinstance(value, float) else str(value)
            lines.append(f"{group:<24} {name:<16} {value}")
    return "\n".join(lines)


# Platt scaling --------------------------------------------------------------------------------


@dataclass(frozen=True)
class PlattParams:
    a: float = 1.0
    b: float = 0.0
    converged: bool = True
    n_iter: int = 0

    def as_dict(self):
        return asdict(self)


def _platt_objective(a, b, scores, labels):
    return float(np.mean(softplus_loss(a * scores + b, labels)))


def platt_fit(scores, labels, tol=1e-8, max_iter=100):
    """Fit ``sigmoid(a * score + b)`` by damped Newton on the mean softplus loss.

    Starts from the identity map ``(1, 0)`` and halves each step until the loss
    does not increase, so the result never does worse than the identity.
    Stops when the gradient norm drops below ``tol``; after ``max_iter``
    iterations the best iterate is returned with ``converged=False``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if not (np.any(labels > 0) and np.any(labels < 0)):
        raise ValueError("Platt scaling needs both positive and negative examples")
    theta = np.array([1.0, 0.0])
    design = np.column_stack([scores, np.ones_like(scores)])
    loss = _platt_objective(theta[0], theta[1], scores, labels)
    for it in range(max_iter + 1):
        z = design @ theta
        resid = -labels * expit(-labels * z)
        grad = design.T @ resid / len(scores)
        if np.linalg.norm(grad) < tol:
            return PlattParams(float(theta[0]), float(theta[1]), True, it)
        if it == max_iter:
            break
        w = expit(z) * expit(-z)
        hess = (design * w[:, None]).T @ design / len(scores)
        hess[np.diag_indices(2)] += 1e-12
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while t > 1e-12:
            cand = theta - t * step
            cand_loss = _platt_objective(cand[0], cand[1], scores, labels)
            if cand_loss <= loss:
                break
            t *= 0.5
        else:
            # no descent possible at machine precision
            return PlattParams(float(theta[0]), float(theta[1]), True, it)
        theta, loss = cand, cand_loss
    warnings.warn("Platt scaling did not converge; returning the best iterate", RuntimeWarning)
    return PlattParams(float(theta[0]), float(theta[1]), False, max_iter)


def platt_apply(params, score):
    """Calibrated probability ``sigmoid(a * score + b)``."""
    out = expit(params.a * np.asarray(score, dtype=np.float64) + params.b)
    return float(out) if out.ndim == 0 else out
