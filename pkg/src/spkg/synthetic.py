"""Seeded synthetic knowledge graphs for tests, demos and benchmarks."""

import numpy as np

from .data import Dataset, Vocabulary
from .seeding import derive_rng


def pattern_kg(seed=0, n_groups=5, group_size=4, n_test=20):
    """A 20-entity, 2-relation graph generated from group structure.

    Entities ``0..19`` fall into five groups of four (``group = e // 4``).

    * ``same_group(a, b)`` holds for every ordered pair in a group,
      self-pairs included (80 triples).
    * ``partner(a, b)`` holds for ``b = a XOR 1``: each group splits into two
      partner pairs, so partners are a refinement of groups (20 triples).

    ``n_test`` triples are held out. Every held-out triple with distinct
    ends keeps its reverse in train, and every entity keeps at least two
    train triples, so each test fact is implied by the training facts.
    The validation split is empty.
    """
    rng = derive_rng(seed, "pattern_kg")
    n_e = n_groups * group_size
    triples = []
    for a in range(n_e):
        for b in range(n_e):
            if a // group_size == b // group_size:
                triples.append((a, 0, b))
    for a in range(n_e):
        triples.append((a, 1, a ^ 1))
    triples = np.array(triples, dtype=np.int64)
    keys = {tuple(t) for t in triples.tolist()}
    test = set()
    for i in rng.permutation(len(triples)):
        if len(test) == n_test:
            break
        h, r, t = triples[i].tolist()
        if h != t and ((t, r, h) in test or (t, r, h) not in keys):
            continue
        remaining = [x for x in keys - test - {(h, r, t)}]
        involved = np.bincount(np.array(remaining)[:, [0, 2]].ravel(), minlength=n_e)
        if involved.min() < 2:
            continue
        test.add((h, r, t))
    is_test = np.array([tuple(t) in test for t in triples.tolist()])
    vocab = Vocabulary([f"e{i:02d}" for i in range(n_e)], ["same_group", "partner"])
    return Dataset(vocab, triples[~is_test], np.empty((0, 3), dtype=np.int64), triples[is_test])


def random_kg(n_entities, n_triples, n_relations=10, seed=0, n_valid=0, n_test=0):
    """Uniformly random distinct triples, with every entity used at least once when possible."""
    rng = derive_rng(seed, "random_kg")
    total = n_triples + n_valid + n_test
    space = n_entities * n_entities * n_relations
    if total > space:
        raise ValueError("more triples requested than exist")
    codes = set()
    if total >= n_entities:
        for e, other in zip(rng.permutation(n_entities), rng.integers(0, n_entities, n_entities)):
            r = int(rng.integers(n_relations))
            codes.add((int(e) * n_relations + r) * n_entities + int(other))
    while len(codes) < total:
        codes.update(rng.integers(0, space, size=total - len(codes)).tolist())
    codes = np.array(sorted(codes), dtype=np.int64)
    codes = codes[rng.permutation(len(codes))]
    h = codes // (n_relations * n_entities)
    r = (codes // n_entities) % n_relations
    t = codes % n_entities
    triples = np.column_stack([h, r, t])
    vocab = Vocabulary([f"e{i}" for i in range(n_entities)], [f"r{i}" for i in range(n_relations)])
    return Dataset(vocab, triples[:n_triples], triples[n_triples:n_triples + n_valid],
                   triples[n_triples + n_valid:])
