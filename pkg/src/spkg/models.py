"""DistMult and SimplE embeddings with raw, tanh-capped and shifted scores.

Parameters are stored unconstrained. When a model is *constrained* every
embedding element ``x`` enters the score as ``tanh(x)`` and the bilinear
product is multiplied by ``cap / dim``, so scores lie in ``(-cap, cap)``.
The shift ``psi`` is added on top of that for prediction and for the
positive-triple loss.

Table layout
------------
DistMult: ``entity`` (|E|, d), ``relation`` (|R|, d).

SimplE: ``entity_head`` and ``entity_tail`` (|E|, d) hold each entity's
head-role and tail-role vectors; ``relation`` and ``relation_inv`` (|R|, d)
hold the forward and inverse relation vectors. The score is::

    0.5 * (<head_h, rel_r, tail_t> + <head_t, inv_r, tail_h>)
"""

import struct
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.special import expit

from .errors import ConfigError, DataError
from .seeding import derive_rng

DISTMULT = "distmult"
SIMPLE = "simple"

TABLES = {
    DISTMULT: ("entity", "relation"),
    SIMPLE: ("entity_head", "entity_tail", "relation", "relation_inv"),
}
ENTITY_TABLES = {
    DISTMULT: ("entity",),
    SIMPLE: ("entity_head", "entity_tail"),
}


@dataclass(frozen=True)
class ModelConfig:
    kind: str = DISTMULT
    dim: int = 100
    cap: float = 5.0
    psi: float = 0.0
    seed: int = 0
    constrained: bool = True

    def __post_init__(self):
        if self.kind not in TABLES:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {sorted(TABLES)}")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if not self.cap > 0:
            raise ConfigError("cap must be > 0")


@dataclass
class ScoreCounters:
    """Instrumentation for the complexity checks.

    ``triple_scores`` counts individual triple scores evaluated by the batch
    scorer; ``vector_reads`` counts parameter rows gathered by the
    factorized all-triples sum.
    """

    triple_scores: int = 0
    vector_reads: int = 0

    def reset(self):
        self.triple_scores = 0
        self.vector_reads = 0


class EmbeddingModel:
    """Parameter tables for one bilinear model."""

    def __init__(self, config, n_entities, n_relations, params=None):
        self.config = config
        self.n_entities = int(n_entities)
        self.n_relations = int(n_relations)
        if params is None:
            params = {name: np.zeros(self._shape(name)) for name in self.table_names}
        for name in self.table_names:
            if name not in params or params[name].shape != self._shape(name):
                raise ConfigError(f"parameter table {name!r} missing or mis-shaped")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in self.table_names}
        self.counters = ScoreCounters()

    def _shape(self, name):
        rows = self.n_entities if name.startswith("entity") else self.n_relations
        return (rows, self.config.dim)

    @property
    def kind(self):
        return self.config.kind

    @property
    def dim(self):
        return self.config.dim

    @property
    def table_names(self):
        return TABLES[self.config.kind]

    @property
    def n_parameters(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return EmbeddingModel(self.config, self.n_entities, self.n_relations,
                              {k: v.copy() for k, v in self.params.items()})

    def with_config(self, **changes):
        """Same parameters (shared, not copied) under a modified config."""
        return EmbeddingModel(replace(self.config, **changes), self.n_entities,
                              self.n_relations, self.params)

    def __repr__(self):
        c = self.config
        return (f"EmbeddingModel(kind={c.kind!r}, dim={c.dim}, n_entities={self.n_entities}, "
                f"n_relations={self.n_relations}, constrained={c.constrained})")


def init_embeddings(config, n_entities, n_relations):
    """Draw every parameter i.i.d. from U[-0.1, 0.1] using ``config.seed``."""
    rng = derive_rng(config.seed, "init")
    model = EmbeddingModel(config, n_entities, n_relations)
    for name in model.table_names:
        model.params[name] = rng.uniform(-0.1, 0.1, size=model._shape(name))
    return model


def _check_ids(model, h, r, t):
    h, r, t = (np.asarray(x, dtype=np.int64) for x in (h, r, t))
    for ids, bound, what in ((h, model.n_entities, "head"), (r, model.n_relations, "relation"),
                             (t, model.n_entities, "tail")):
        if ids.size and (ids.min() < 0 or ids.max() >= bound):
            raise IndexError(f"{what} id out of range [0, {bound})")
    return h, r, t


def _scale(model, constrained):
    half = 0.5 if model.kind == SIMPLE else 1.0
    return half * (model.config.cap / model.dim if constrained else 1.0)


def _product(model, h, r, t, constrained):
    p = model.params
    f = np.tanh if constrained else (lambda x: x)
    if model.kind == DISTMULT:
        s = np.sum(f(p["entity"][h]) * f(p["relation"][r]) * f(p["entity"][t]), axis=-1)
    else:
        s = (np.sum(f(p["entity_head"][h]) * f(p["relation"][r]) * f(p["entity_tail"][t]), axis=-1)
             + np.sum(f(p["entity_head"][t]) * f(p["relation_inv"][r]) * f(p["entity_tail"][h]),
                      axis=-1))
    return _scale(model, constrained) * s


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def score_raw(model, h, r, t):
    """Bilinear score on the untransformed parameters (no tanh, no cap, no shift)."""
    h, r, t = _check_ids(model, h, r, t)
    return _out(_product(model, h, r, t, constrained=False))


def score_constrained(model, h, r, t):
    """Bilinear score on tanh-transformed parameters, multiplied by ``cap / dim``."""
    h, r, t = _check_ids(model, h, r, t)
    return _out(_product(model, h, r, t, constrained=True))


def score_shifted(model, h, r, t):
    """:func:`score_constrained` plus ``psi``."""
    return _out(np.asarray(score_constrained(model, h, r, t)) + model.config.psi)


def score_unshifted(model, h, r, t):
    """The model's own score before the shift: constrained or raw per its config."""
    h, r, t = _check_ids(model, h, r, t)
    return _out(_product(model, h, r, t, model.config.constrained))


def score(model, h, r, t):
    """Prediction score: :func:`score_unshifted` plus ``psi``."""
    return _out(np.asarray(score_unshifted(model, h, r, t)) + model.config.psi)


def probability(score):
    """Logistic sigmoid, evaluated without overflow."""
    return _out(expit(np.asarray(score, dtype=np.float64)))


def _scatter(indices, rows):
    """Sum ``rows`` that share an index; returns sorted unique indices and sums."""
    uniq, inverse = np.unique(indices, return_inverse=True)
    if uniq.size == 0:
        return uniq, rows[:0]
    n = len(indices)
    summer = sparse.csr_matrix((np.ones(n), (inverse.ravel(), np.arange(n))), shape=(uniq.size, n))
    return uniq, np.asarray(summer @ rows)


class Gradients:
    """Sparse row gradients keyed by table name.

    Rows are accumulated with :meth:`add` and summed per index lazily; only
    rows of entities and relations actually touched are ever stored.
    """

    def __init__(self):
        self._parts = defaultdict(list)
        self._coalesced = None

    def add(self, table, indices, rows):
        self._parts[table].append((np.asarray(indices, dtype=np.int64).ravel(),
                                   np.asarray(rows, dtype=np.float64)))
        self._coalesced = None

    def update(self, other):
        for table, (idx, rows) in other.items():
            self.add(table, idx, rows)
        return self

    def _coalesce(self):
        if self._coalesced is None:
            out = {}
            for table, parts in self._parts.items():
                idx = np.concatenate([p[0] for p in parts])
                rows = np.concatenate([p[1] for p in parts])
                out[table] = _scatter(idx, rows)
            self._parts = defaultdict(list, {k: [v] for k, v in out.items()})
            self._coalesced = out
        return self._coalesced

    def items(self):
        return self._coalesce().items()

    def __getitem__(self, table):
        return self._coalesce()[table]

    def __contains__(self, table):
        return table in self._coalesce()

    def tables(self):
        return list(self._coalesce())

    def map_rows(self, fn):
        """New :class:`Gradients` with ``fn(table, indices, rows)`` applied to each table."""
        out = Gradients()
        for table, (idx, rows) in self.items():
            out.add(table, idx, fn(table, idx, rows))
        return out

    def dense(self, model):
        """Full-size arrays, zero where untouched (for tests and debugging)."""
        out = {name: np.zeros_like(p) for name, p in model.params.items()}
        for table, (idx, rows) in self.items():
            out[table][idx] += rows
        return out

    def is_finite(self):
        return all(np.isfinite(rows).all() for _, rows in self.items())


@dataclass
class ScoredBatch:
    """Forward pass over a batch of triples, kept for the backward pass.

    ``scores`` are unshifted (the model's constrained or raw score); add
    ``model.config.psi`` for the prediction score.
    """

    model: EmbeddingModel
    triples: np.ndarray
    scores: np.ndarray
    factors: dict = field(repr=False)
    constrained: bool = True

    def gradients(self, upstream):
        """Gradient of ``sum_b upstream[b] * scores[b]`` w.r.t. the raw parameters."""
        up = np.asarray(upstream, dtype=np.float64).reshape(-1, 1) * _scale(self.model, self.constrained)
        h, r, t = self.triples[:, 0], self.triples[:, 1], self.triples[:, 2]
        grads = Gradients()
        fx = self.factors

        def local(name):
            # d tanh(x)/dx = 1 - tanh(x)^2
            v = fx[name]
            return 1.0 - v * v if self.constrained else 1.0

        if self.model.kind == DISTMULT:
            a, b, c = fx["h"], fx["r"], fx["t"]
            grads.add("entity", h, up * b * c * local("h"))
            grads.add("relation", r, up * a * c * local("r"))
            grads.add("entity", t, up * a * b * local("t"))
        else:
            hh, rf, tt = fx["hh"], fx["rf"], fx["tt"]
            th, ri, ht = fx["th"], fx["ri"], fx["ht"]
            grads.add("entity_head", h, up * rf * tt * local("hh"))
            grads.add("relation", r, up * hh * tt * local("rf"))
            grads.add("entity_tail", t, up * hh * rf * local("tt"))
            grads.add("entity_head", t, up * ri * ht * local("th"))
            grads.add("relation_inv", r, up * th * ht * local("ri"))
            grads.add("entity_tail", h, up * th * ri * local("ht"))
        return grads


def forward_batch(model, triples, constrained=None):
    """Score an ``(n, 3)`` batch, counting ``n`` triple scores."""
    if constrained is None:
        constrained = model.config.constrained
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    h, r, t = _check_ids(model, triples[:, 0], triples[:, 1], triples[:, 2])
    p = model.params
    f = np.tanh if constrained else (lambda x: x)
    if model.kind == DISTMULT:
        fx = {"h": f(p["entity"][h]), "r": f(p["relation"][r]), "t": f(p["entity"][t])}
        s = np.sum(fx["h"] * fx["r"] * fx["t"], axis=1)
    else:
        fx = {"hh": f(p["entity_head"][h]), "rf": f(p["relation"][r]), "tt": f(p["entity_tail"][t]),
              "th": f(p["entity_head"][t]), "ri": f(p["relation_inv"][r]), "ht": f(p["entity_tail"][h])}
        s = (np.sum(fx["hh"] * fx["rf"] * fx["tt"], axis=1)
             + np.sum(fx["th"] * fx["ri"] * fx["ht"], axis=1))
    model.counters.triple_scores += len(triples)
    return ScoredBatch(model, triples, _scale(model, constrained) * s, fx, constrained)


def score_gradients(model, triples, upstream, constrained=None):
    """Gradient of ``sum_b upstream[b] * score(triple_b)`` (unshifted score)."""
    return forward_batch(model, triples, constrained).gradients(upstream)


# Checkpoints -----------------------------------------------------------------------------------

MAGIC = b"SPKG"
FORMAT_VERSION = 1
_KIND_CODES = {DISTMULT: 0, SIMPLE: 1}
# magic, version, kind, constrained, dim, cap, psi, seed, n_entities, n_relations
_HEADER = struct.Struct("<4sHBBIddqQQ")


def save_checkpoint(model, path, vocabulary=None):
    """Write a binary checkpoint and, if given, a ``<path>.vocab`` sidecar.

    The header is little-endian ``magic "SPKG", u16 version, u8 kind
    (0 distmult, 1 simple), u8 constrained, u32 dim, f64 cap, f64 psi,
    i64 seed, u64 n_entities, u64 n_relations``. It is followed by the
    parameter tables as little-endian float64 in row-major order: entity
    tables first, then relation tables, in :data:`TABLES` order.
    """
    c = model.config
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, _KIND_CODES[c.kind], int(c.constrained),
                          c.dim, float(c.cap), float(c.psi), int(c.seed),
                          model.n_entities, model.n_relations)
    with open(path, "wb") as fh:
        fh.write(header)
        for name in model.table_names:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    if vocabulary is not None:
        vocabulary.save(vocab_path(path))


def vocab_path(path):
    return f"{path}.vocab"


def load_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated checkpoint header")
    magic, version, kind, constrained, dim, cap, psi, seed, n_e, n_r = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    kinds = {v: k for k, v in _KIND_CODES.items()}
    if kind not in kinds:
        raise DataError(f"{path}: unknown model kind code {kind}")
    config = ModelConfig(kind=kinds[kind], dim=dim, cap=cap, psi=psi, seed=seed,
                         constrained=bool(constrained))
    model = EmbeddingModel(config, n_e, n_r)
    offset = _HEADER.size
    for name in model.table_names:
        shape = model._shape(name)
        count = shape[0] * shape[1]
        if offset + 8 * count > len(raw):
            raise DataError(f"{path}: truncated parameter block {name!r}")
        block = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        model.params[name] = block.astype(np.float64).reshape(shape)
        offset += 8 * count
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes")
    return model
