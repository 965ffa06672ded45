"""Triple files, vocabularies, dataset statistics and unseen-entity cleaning.

Triple files hold one record per line with TAB separated fields::

    head<TAB>relation<TAB>tail[<TAB>label]

where ``label`` is ``1`` or ``-1`` in labeled (classification) splits.
"""

import csv
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DataError, ParseError

STRICT = "strict"
SKIP = "skip"


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class LabeledTriple(NamedTuple):
    triple: Triple
    label: int


class Record(NamedTuple):
    """A raw triple with surface names, as read from disk."""

    head: str
    relation: str
    tail: str
    label: int | None = None


def parse_line(line, lineno=None, labeled=False, path=None):
    """Parse one TAB separated line into a :class:`Record`."""
    fields = line.rstrip("\r\n").split("\t")
    expected = 4 if labeled else 3
    if len(fields) != expected:
        raise ParseError(
            f"expected {expected} tab-separated fields, got {len(fields)}",
            line=lineno, path=path,
        )
    label = None
    if labeled:
        try:
            label = int(fields[3])
        except ValueError:
            label = None
        if label not in (1, -1):
            raise ParseError(f"label must be 1 or -1, got {fields[3]!r}", line=lineno, path=path)
    if not all(fields[:3]):
        raise ParseError("empty field", line=lineno, path=path)
    return Record(fields[0], fields[1], fields[2], label)


def read_records(path, labeled=False):
    """Read every non-blank line of ``path`` as a :class:`Record`."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(parse_line(line, lineno, labeled=labeled, path=path))
    return records


def write_records(path, records):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for rec in records:
            fields = [rec.head, rec.relation, rec.tail]
            if rec.label is not None:
                fields.append(str(rec.label))
            fh.write("\t".join(fields) + "\n")


def _as_records(lines):
    for lineno, item in enumerate(lines, start=1):
        if isinstance(item, str):
            if not item.strip():
                continue
            if "\t" not in item:
                item = "\t".join(item.split())
            yield parse_line(item, lineno)
        else:
            if len(item) not in (3, 4):
                raise ParseError(f"expected 3 fields, got {len(item)}", line=lineno)
            yield Record(*item)


class Vocabulary:
    """Bidirectional mapping between entity/relation names and dense ids."""

    def __init__(self, entity_names=(), relation_names=()):
        self.entity_names = []
        self.relation_names = []
        self._entity_ids = {}
        self._relation_ids = {}
        for name in entity_names:
            self._add_entity(name)
        for name in relation_names:
            self._add_relation(name)

    def _add_entity(self, name):
        if name not in self._entity_ids:
            self._entity_ids[name] = len(self.entity_names)
            self.entity_names.append(name)
        return self._entity_ids[name]

    def _add_relation(self, name):
        if name not in self._relation_ids:
            self._relation_ids[name] = len(self.relation_names)
            self.relation_names.append(name)
        return self._relation_ids[name]

    @property
    def n_entities(self):
        return len(self.entity_names)

    @property
    def n_relations(self):
        return len(self.relation_names)

    def entity_id(self, name):
        return self._entity_ids[name]

    def relation_id(self, name):
        return self._relation_ids[name]

    def has_entity(self, name):
        return name in self._entity_ids

    def has_relation(self, name):
        return name in self._relation_ids

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.entity_names == other.entity_names
                and self.relation_names == other.relation_names)

    def __repr__(self):
        return f"Vocabulary(n_entities={self.n_entities}, n_relations={self.n_relations})"

    def save(self, path):
        """Write the sidecar format: ``e<TAB>name`` then ``r<TAB>name`` lines in id order."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for name in self.entity_names:
                fh.write(f"e\t{name}\n")
            for name in self.relation_names:
                fh.write(f"r\t{name}\n")

    @classmethod
    def load(cls, path):
        vocab = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                kind, sep, name = line.rstrip("\r\n").partition("\t")
                if not sep or kind not in ("e", "r") or not name:
                    raise ParseError("bad vocabulary line", line=lineno, path=path)
                if kind == "e":
                    vocab._add_entity(name)
                else:
                    vocab._add_relation(name)
        return vocab


def build_vocabulary(train_lines):
    """Build a vocabulary from training records in first-appearance order.

    ``train_lines`` may hold raw text lines or already parsed records.
    Heads are registered before tails within each record.
    """
    vocab = Vocabulary()
    for rec in _as_records(train_lines):
        vocab._add_entity(rec.head)
        vocab._add_relation(rec.relation)
        vocab._add_entity(rec.tail)
    return vocab


class LoadedSplit(NamedTuple):
    triples: np.ndarray
    labels: np.ndarray | None
    skipped: int


def resolve_records(records, vocabulary, policy=SKIP, labeled=None, path=None):
    """Map name records to an ``(n, 3)`` id array under ``policy``.

    Under ``"skip"`` records naming unknown entities or relations are dropped
    and counted; under ``"strict"`` they raise :class:`DataError`.
    """
    if policy not in (STRICT, SKIP):
        raise ValueError(f"unknown policy {policy!r}")
    records = list(records)
    if labeled is None:
        labeled = bool(records) and records[0].label is not None
    ids, labels, skipped = [], [], 0
    for lineno, rec in enumerate(records, start=1):
        unknown = [name for name in (rec.head, rec.tail) if not vocabulary.has_entity(name)]
        if not vocabulary.has_relation(rec.relation):
            unknown.append(rec.relation)
        if unknown:
            if policy == STRICT:
                raise ParseError(f"unknown name {unknown[0]!r}", line=lineno, path=path)
            skipped += 1
            continue
        ids.append((vocabulary.entity_id(rec.head), vocabulary.relation_id(rec.relation),
                    vocabulary.entity_id(rec.tail)))
        if labeled:
            labels.append(rec.label)
    triples = np.array(ids, dtype=np.int64).reshape(-1, 3)
    return LoadedSplit(triples, np.array(labels, dtype=np.int64) if labeled else None, skipped)


def load_split(path, vocabulary, labeled=False, policy=SKIP):
    """Read a split file and resolve it against ``vocabulary``."""
    records = read_records(path, labeled=labeled)
    return resolve_records(records, vocabulary, policy=policy, labeled=labeled, path=path)


@dataclass
class Dataset:
    """Train/valid/test id arrays sharing one train-derived vocabulary."""

    vocabulary: Vocabulary
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    valid_labels: np.ndarray | None = None
    test_labels: np.ndarray | None = None

    def __post_init__(self):
        for name in ("train", "valid", "test"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 3)
            setattr(self, name, arr)
            if len(arr) and (arr[:, [0, 2]].max() >= self.n_entities
                             or arr[:, 1].max() >= self.n_relations or arr.min() < 0):
                raise DataError(f"{name} split has ids outside the vocabulary")

    @property
    def n_entities(self):
        return self.vocabulary.n_entities

    @property
    def n_relations(self):
        return self.vocabulary.n_relations

    @property
    def labeled(self):
        return self.valid_labels is not None or self.test_labels is not None

    def positives(self, split):
        """Triples of ``split`` that are true facts (label +1, or all if unlabeled)."""
        triples = getattr(self, split)
        labels = getattr(self, f"{split}_labels", None)
        if labels is None:
            return triples
        return triples[labels == 1]

    def known_triples(self):
        """All known-true triples (train, valid and test positives)."""
        return np.concatenate([self.train, self.positives("valid"), self.positives("test")])


def load_dataset(train_path, valid_path, test_path, labeled=False, policy=SKIP):
    """Load three split files; returns ``(dataset, skipped_counts)``."""
    train_records = read_records(train_path)
    if not train_records:
        raise DataError(f"{train_path}: training split is empty")
    vocab = build_vocabulary(train_records)
    train = resolve_records(train_records, vocab, policy=STRICT, path=train_path)
    valid = load_split(valid_path, vocab, labeled=labeled, policy=policy)
    test = load_split(test_path, vocab, labeled=labeled, policy=policy)
    ds = Dataset(vocab, train.triples, valid.triples, test.triples, valid.labels, test.labels)
    return ds, {"valid": valid.skipped, "test": test.skipped}


def split_paths(data_dir):
    """Conventional ``train.txt``/``valid.txt``/``test.txt`` locations."""
    return tuple(os.path.join(data_dir, f"{name}.txt") for name in ("train", "valid", "test"))


@dataclass
class CleanReport:
    """What :func:`clean_dataset` removed from each evaluation split."""

    removed: dict = field(default_factory=dict)
    unseen_entities: dict = field(default_factory=dict)
    unseen_relations: dict = field(default_factory=dict)

    def summary(self):
        lines = []
        for split in ("valid", "test"):
            lines.append(
                f"{split}: removed {self.removed.get(split, 0)} triples; "
                f"{len(self.unseen_entities.get(split, ()))} unseen entities, "
                f"{len(self.unseen_relations.get(split, ()))} unseen relations"
            )
        return "\n".join(lines)

    def write_csv(self, path):
        """Columns ``split, removed_count, unseen_entity``; one row per unseen entity."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["split", "removed_count", "unseen_entity"])
            for split in ("valid", "test"):
                removed = self.removed.get(split, 0)
                unseen = sorted(self.unseen_entities.get(split, ()))
                if not unseen:
                    writer.writerow([split, removed, ""])
                for name in unseen:
                    writer.writerow([split, removed, name])


def _seen_sets(train):
    train = list(_as_records(train))
    if not train:
        raise DataError("training split is empty; no vocabulary can be formed")
    entities = {rec.head for rec in train} | {rec.tail for rec in train}
    return entities, {rec.relation for rec in train}


def clean_mask(train, records):
    """Boolean mask of ``records`` whose head, tail and relation all occur in ``train``."""
    seen_e, seen_r = _seen_sets(train)
    return np.array([rec.head in seen_e and rec.tail in seen_e and rec.relation in seen_r
                     for rec in _as_records(records)], dtype=bool)


def clean_dataset(train, valid, test):
    """Drop valid/test records whose head, tail or relation never occurs in train.

    Returns ``(valid_clean, test_clean, report)``; the input order of kept
    records is preserved and ``train`` is not touched.
    """
    seen_entities, seen_relations = _seen_sets(train)
    report = CleanReport()
    cleaned = []
    for split, records in (("valid", valid), ("test", test)):
        records = list(_as_records(records))
        kept = []
        unseen_e, unseen_r = set(), set()
        for rec in records:
            missing = {rec.head, rec.tail} - seen_entities
            rel_missing = rec.relation not in seen_relations
            if missing or rel_missing:
                unseen_e |= missing
                if rel_missing:
                    unseen_r.add(rec.relation)
                continue
            kept.append(rec)
        report.removed[split] = len(records) - len(kept)
        report.unseen_entities[split] = unseen_e
        report.unseen_relations[split] = unseen_r
        cleaned.append(kept)
    return cleaned[0], cleaned[1], report


@dataclass(frozen=True)
class DatasetStats:
    n_entities: int
    n_relations: int
    n_train: int
    n_valid: int
    n_test: int
    beta: float


def dataset_stats(dataset):
    """Sizes plus ``beta``, the mean number of train triples per entity.

    Each triple counts once for its head and once for its tail, so a
    self-loop adds two memberships to its entity.
    """
    n_e = dataset.n_entities
    counts = np.bincount(dataset.train[:, [0, 2]].ravel(), minlength=n_e)
    beta = float(counts.sum()) / n_e if n_e else 0.0
    return DatasetStats(n_e, dataset.n_relations, len(dataset.train), len(dataset.valid),
                        len(dataset.test), beta)


def cwa_psi(dataset):
    """Fraction of all |E|^2 |R| possible triples present in the train split."""
    n_e, n_r = dataset.n_entities, dataset.n_relations
    if n_e == 0 or n_r == 0:
        raise DataError("closed-world prior needs at least one entity and one relation")
    return len(dataset.train) / (n_e * n_e * n_r)
