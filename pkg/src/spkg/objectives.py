"""Training objectives: negative sampling and the closed-form score-sum regularizer.

Both objectives use the softplus negative log-likelihood on individual
triples. The regularized objective replaces negatives with a penalty on the
sum of unshifted scores over every (head, relation, tail) combination of the
batch's entities and relations. For bilinear models that sum factorizes into
per-dimension sums of embedding vectors, so it costs one pass over the
distinct batch rows instead of |E_B|^2 |R_B| score evaluations.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError
from .models import DISTMULT, ENTITY_TABLES, Gradients, _scale, forward_batch, score_unshifted

NEG = "neg"
SP = "sp"
BATCH = "batch"
GLOBAL = "global"

BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class ObjectiveConfig:
    """``mode`` is ``"neg"`` or ``"sp"``; the shift ``psi`` lives on the model config."""

    mode: str = SP
    neg_ratio: int = 1
    lam: float = 0.1
    p: int = 1
    scope: str = BATCH

    def __post_init__(self):
        if self.mode not in (NEG, SP):
            raise ConfigError(f"unknown objective {self.mode!r}")
        if self.mode == NEG and self.neg_ratio < 1:
            raise ConfigError("negative ratio must be >= 1")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.p not in (1, 2):
            raise ConfigError("p must be 1 or 2")
        if self.scope not in (BATCH, GLOBAL):
            raise ConfigError(f"unknown regularizer scope {self.scope!r}")


@dataclass
class BatchLossResult:
    positive_loss: float
    regularizer: float
    negative_loss: float
    total: float
    gradients: Gradients
    n_scores: int = 0


def softplus_loss(score, label):
    """``log(1 + exp(-label * score))`` without overflow."""
    out = np.logaddexp(0.0, -np.asarray(label, dtype=np.float64) * np.asarray(score, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def softplus_loss_grad(score, label):
    """Derivative of :func:`softplus_loss` with respect to ``score``."""
    label = np.asarray(label, dtype=np.float64)
    return -label * expit(-label * np.asarray(score, dtype=np.float64))


def corrupt_batch(triples, n, n_entities, rng):
    """``n`` corruptions per triple, grouped by source triple.

    Each corruption replaces the head or the tail (fair coin) with an entity
    drawn uniformly from ``[0, n_entities)``. Relations are never corrupted
    and the draws are not filtered against known triples.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    neg = np.repeat(triples, n, axis=0)
    m = len(neg)
    replace_head = rng.random(m) < 0.5
    entities = rng.integers(0, n_entities, size=m)
    neg[:, 0] = np.where(replace_head, entities, neg[:, 0])
    neg[:, 2] = np.where(replace_head, neg[:, 2], entities)
    return neg


def neg_sample(triple, n, n_entities, rng):
    """List of ``n`` corrupted copies of a single triple."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [tuple(int(x) for x in row) for row in corrupt_batch([triple], n, n_entities, rng)]


def negsampling_batch_loss(model, batch, config, rng=None, negatives=None):
    """Softplus loss on positives (label +1) and generated negatives (label -1).

    Pass ``negatives`` to reuse a fixed corruption set; otherwise ``rng``
    draws ``config.neg_ratio`` corruptions per positive.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if negatives is None:
        if rng is None:
            raise ValueError("either rng or negatives is required")
        negatives = corrupt_batch(batch, config.neg_ratio, model.n_entities, rng)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, 3)
    triples = np.concatenate([batch, negatives])
    labels = np.r_[np.ones(len(batch)), -np.ones(len(negatives))]
    fwd = forward_batch(model, triples)
    s = fwd.scores + model.config.psi
    losses = softplus_loss(s, labels)
    pos = float(np.sum(losses[:len(batch)]))
    neg = float(np.sum(losses[len(batch):]))
    grads = fwd.gradients(softplus_loss_grad(s, labels)) if len(triples) else Gradients()
    return BatchLossResult(pos, 0.0, neg, pos + neg, grads, n_scores=len(triples))


class FactorizedSum:
    """All-triples score sum over an entity set and relation set, plus its gradient.

    Reads each distinct entity row and relation row exactly once; the
    per-dimension sums are cached for the gradient.
    """

    def __init__(self, model, entities, relations, constrained=None):
        entities = np.unique(np.asarray(entities, dtype=np.int64))
        relations = np.unique(np.asarray(relations, dtype=np.int64))
        if entities.size == 0 or relations.size == 0:
            raise ValueError("factorized sum needs at least one entity and one relation")
        if constrained is None:
            constrained = model.config.constrained
        self.model = model
        self.entities = entities
        self.relations = relations
        self.constrained = constrained
        self.scale = _scale(model, constrained)
        f = np.tanh if constrained else (lambda x: x)
        p = model.params
        self._rows = {}
        for name in ENTITY_TABLES[model.kind]:
            self._rows[name] = f(p[name][entities])
        rel_tables = ("relation",) if model.kind == DISTMULT else ("relation", "relation_inv")
        for name in rel_tables:
            self._rows[name] = f(p[name][relations])
        model.counters.vector_reads += len(entities) * len(ENTITY_TABLES[model.kind])
        model.counters.vector_reads += len(relations) * len(rel_tables)
        self._sums = {name: rows.sum(axis=0) for name, rows in self._rows.items()}
        s = self._sums
        if model.kind == DISTMULT:
            total = np.dot(s["entity"] * s["entity"], s["relation"])
        else:
            # both SimplE terms factor to the same head-role and tail-role sums
            total = np.dot(s["entity_head"] * s["entity_tail"], s["relation"] + s["relation_inv"])
        self.value = float(self.scale * total)

    def _local(self, name):
        rows = self._rows[name]
        return 1.0 - rows * rows if self.constrained else np.ones_like(rows)

    def gradients(self, upstream=1.0):
        """Gradient of ``upstream * value`` w.r.t. the raw parameters."""
        s = self._sums
        c = upstream * self.scale
        grads = Gradients()
        if self.model.kind == DISTMULT:
            grads.add("entity", self.entities, c * 2.0 * s["entity"] * s["relation"] * self._local("entity"))
            grads.add("relation", self.relations, c * s["entity"] ** 2 * self._local("relation"))
        else:
            rel = s["relation"] + s["relation_inv"]
            ht = s["entity_head"] * s["entity_tail"]
            grads.add("entity_head", self.entities, c * s["entity_tail"] * rel * self._local("entity_head"))
            grads.add("entity_tail", self.entities, c * s["entity_head"] * rel * self._local("entity_tail"))
            grads.add("relation", self.relations, c * ht * self._local("relation"))
            grads.add("relation_inv", self.relations, c * ht * self._local("relation_inv"))
        return grads


def factorized_score_sum(model, entity_set, relation_set):
    """Sum of unshifted scores over ``entity_set x relation_set x entity_set``."""
    return FactorizedSum(model, entity_set, relation_set).value


def brute_force_score_sum(model, entity_set, relation_set):
    """Same sum as :func:`factorized_score_sum`, by enumerating every triple."""
    es = np.unique(np.asarray(entity_set, dtype=np.int64))
    rs = np.unique(np.asarray(relation_set, dtype=np.int64))
    if es.size == 0 or rs.size == 0:
        raise ValueError("brute-force sum needs at least one entity and one relation")
    n = es.size * es.size * rs.size
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{n} triples exceeds the enumeration limit {BRUTE_FORCE_LIMIT}; "
                         "use factorized_score_sum")
    rr, tt = (g.ravel() for g in np.meshgrid(rs, es, indexing="ij"))
    total = 0.0
    for h in es:
        total += float(np.sum(score_unshifted(model, np.full(rr.size, h), rr, tt)))
    return total


def _batch_sets(model, batch, scope):
    if scope == GLOBAL:
        return np.arange(model.n_entities), np.arange(model.n_relations)
    return np.unique(batch[:, [0, 2]]), np.unique(batch[:, 1])


def sp_regularizer(model, batch_entities, batch_relations, p=1):
    """``|S|^p`` where ``S`` is the all-triples sum over the given sets."""
    return abs(factorized_score_sum(model, batch_entities, batch_relations)) ** p


def sp_batch_loss(model, batch, config):
    """Shifted-score softplus loss on positives plus ``lam`` times the regularizer.

    Only the distinct entities and relations of ``batch`` enter the
    regularizer unless ``config.scope == "global"``. The subgradient of
    ``|S|`` at ``S == 0`` is taken as 0.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if len(batch) == 0:
        return BatchLossResult(0.0, 0.0, 0.0, 0.0, Gradients())
    fwd = forward_batch(model, batch)
    s = fwd.scores + model.config.psi
    pos = float(np.sum(softplus_loss(s, 1.0)))
    grads = fwd.gradients(softplus_loss_grad(s, 1.0))
    entities, relations = _batch_sets(model, batch, config.scope)
    fsum = FactorizedSum(model, entities, relations)
    reg = abs(fsum.value) ** config.p
    if config.lam > 0:
        if config.p == 1:
            d_reg = float(np.sign(fsum.value))
        else:
            d_reg = config.p * abs(fsum.value) ** (config.p - 1) * float(np.sign(fsum.value))
        if d_reg != 0.0:
            grads.update(fsum.gradients(config.lam * d_reg))
    return BatchLossResult(pos, reg, 0.0, pos + config.lam * reg, grads, n_scores=len(batch))


def batch_loss(model, batch, config, rng=None):
    """Dispatch on ``config.mode``."""
    if config.mode == NEG:
        return negsampling_batch_loss(model, batch, config, rng)
    return sp_batch_loss(model, batch, config)
