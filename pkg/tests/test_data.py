import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spkg.data import (
    SKIP,
    STRICT,
    Dataset,
    Record,
    Vocabulary,
    build_vocabulary,
    clean_dataset,
    clean_mask,
    cwa_psi,
    dataset_stats,
    load_dataset,
    load_split,
    read_records,
    resolve_records,
    write_records,
)
from spkg.errors import DataError, ParseError


def write(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_vocabulary_single_line():
    vocab = build_vocabulary(["a\tr\tb"])
    assert vocab.entity_names == ["a", "b"]
    assert vocab.relation_names == ["r"]
    assert vocab.entity_id("a") == 0 and vocab.entity_id("b") == 1
    assert vocab.relation_id("r") == 0


def test_vocabulary_whitespace_separated_text_lines():
    assert build_vocabulary(["a r b"]).entity_names == ["a", "b"]


def test_vocabulary_ignores_duplicates():
    assert build_vocabulary(["a\tr\tb"] * 2) == build_vocabulary(["a\tr\tb"])


def test_vocabulary_first_appearance_order():
    vocab = build_vocabulary(["c\tr2\ta", "a\tr1\tb", "b\tr2\tc"])
    assert vocab.entity_names == ["c", "a", "b"]
    assert vocab.relation_names == ["r2", "r1"]


def test_malformed_line_names_line_number(tmp_path):
    path = write(tmp_path / "train.txt", ["a\tr\tb", "a\tr"])
    with pytest.raises(ParseError, match=":2:"):
        read_records(path)


def test_bad_label(tmp_path):
    path = write(tmp_path / "valid.txt", ["a\tr\tb\t0"])
    with pytest.raises(ParseError, match="label"):
        read_records(path, labeled=True)


def test_vocabulary_round_trip(tmp_path):
    vocab = build_vocabulary(["x y\tr\tz", "z\ts\tw"])
    vocab.save(tmp_path / "v.vocab")
    back = Vocabulary.load(tmp_path / "v.vocab")
    assert back == vocab
    for i, name in enumerate(back.entity_names):
        assert back.entity_id(name) == i


def test_load_split_skip_and_strict(tmp_path):
    vocab = build_vocabulary(["a\tr\tb"])
    clean = write(tmp_path / "clean.txt", ["b\tr\ta"])
    dirty = write(tmp_path / "dirty.txt", ["c\tr\ta"])
    loaded = load_split(clean, vocab, policy=SKIP)
    assert loaded.skipped == 0
    assert loaded.triples.tolist() == [[1, 0, 0]]
    loaded = load_split(dirty, vocab, policy=SKIP)
    assert loaded.skipped == 1 and len(loaded.triples) == 0
    with pytest.raises(DataError, match="'c'"):
        load_split(dirty, vocab, policy=STRICT)


def test_load_labeled_split(tmp_path):
    vocab = build_vocabulary(["a\tr\tb"])
    path = write(tmp_path / "valid.txt", ["a\tr\tb\t1", "b\tr\ta\t-1"])
    loaded = load_split(path, vocab, labeled=True)
    assert loaded.labels.tolist() == [1, -1]


def test_clean_all_seen():
    train = [Record("a", "r", "b")]
    valid = [Record("b", "r", "a")]
    test = [Record("a", "r", "a")]
    v, t, report = clean_dataset(train, valid, test)
    assert v == valid and t == test
    assert report.removed == {"valid": 0, "test": 0}


def test_clean_toy_unseen():
    train = [("a", "r", "b")]
    test = [("a", "r", "b"), ("a", "r", "c")]
    _, t, report = clean_dataset(train, [], test)
    assert t == [Record("a", "r", "b")]
    assert report.removed["test"] == 1
    assert report.unseen_entities["test"] == {"c"}


def test_clean_removes_unseen_relations():
    _, t, report = clean_dataset([("a", "r", "b")], [], [("a", "s", "b")])
    assert t == [] and report.unseen_relations["test"] == {"s"}


def test_clean_empty_train():
    with pytest.raises(DataError):
        clean_dataset([], [], [])


def test_clean_report_csv(tmp_path):
    _, _, report = clean_dataset([("a", "r", "b")], [("a", "r", "x")], [("y", "r", "z")])
    report.write_csv(tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "split,removed_count,unseen_entity"
    assert "valid,1,x" in rows
    assert "test,1,y" in rows and "test,1,z" in rows
    assert "removed 1 triples" in report.summary()


names = st.sampled_from(list("abcdefg"))
rels = st.sampled_from(["r", "s"])
records = st.lists(st.tuples(names, rels, names).map(lambda x: Record(*x)), max_size=25)


@settings(max_examples=60, deadline=None)
@given(train=records.filter(bool), valid=records, test=records)
def test_clean_properties(train, valid, test):
    v1, t1, report = clean_dataset(train, valid, test)
    v2, t2, report2 = clean_dataset(train, v1, t1)
    assert (v2, t2) == (v1, t1)
    assert report2.removed == {"valid": 0, "test": 0}
    assert len(v1) + report.removed["valid"] == len(valid)
    assert len(t1) + report.removed["test"] == len(test)
    vocab = build_vocabulary(train)
    resolve_records(v1, vocab, policy=STRICT)
    resolve_records(t1, vocab, policy=STRICT)
    assert clean_mask(train, test).sum() == len(t1)


def _dataset(train, n_entities, n_relations):
    vocab = Vocabulary([f"e{i}" for i in range(n_entities)], [f"r{i}" for i in range(n_relations)])
    empty = np.empty((0, 3), dtype=np.int64)
    return Dataset(vocab, np.array(train).reshape(-1, 3), empty, empty)


def test_beta_single_triple():
    assert dataset_stats(_dataset([(0, 0, 1)], 2, 1)).beta == 1.0


def test_beta_matches_brute_force_count(rng):
    train = np.column_stack([rng.integers(0, 12, 50), rng.integers(0, 3, 50), rng.integers(0, 12, 50)])
    ds = _dataset(train, 12, 3)
    count = {e: 0 for e in range(12)}
    for h, _, t in train.tolist():
        count[h] += 1
        count[t] += 1
    assert dataset_stats(ds).beta == pytest.approx(sum(count.values()) / 12)


def test_self_loop_counts_twice():
    assert dataset_stats(_dataset([(0, 0, 0)], 1, 1)).beta == 2.0


def test_cwa_psi():
    assert cwa_psi(_dataset([(0, 0, 0)], 1, 1)) == 1.0
    full = [(h, 0, t) for h in range(2) for t in range(2)]
    assert cwa_psi(_dataset(full, 2, 1)) == 1.0
    vocab = Vocabulary([f"e{i}" for i in range(40559)], [f"r{i}" for i in range(11)])
    train = np.zeros((86835, 3), dtype=np.int64)
    empty = np.empty((0, 3), dtype=np.int64)
    assert cwa_psi(Dataset(vocab, train, empty, empty)) == pytest.approx(4.798744706e-6, rel=1e-9)


def test_cwa_psi_empty():
    with pytest.raises(DataError):
        cwa_psi(_dataset([], 0, 0))


@settings(max_examples=40, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 4), st.integers(0, 2), st.integers(0, 4)), min_size=1))
def test_cwa_psi_in_unit_interval(triples):
    ds = _dataset(sorted(triples), 5, 3)
    assert 0 < cwa_psi(ds) <= 1


def test_load_dataset_and_write_records(tmp_path):
    write_records(tmp_path / "train.txt", [Record("a", "r", "b"), Record("b", "r", "c")])
    write(tmp_path / "valid.txt", ["a\tr\tc\t1", "q\tr\tc\t-1"])
    write(tmp_path / "test.txt", ["c\tr\ta\t-1"])
    ds, skipped = load_dataset(tmp_path / "train.txt", tmp_path / "valid.txt", tmp_path / "test.txt",
                               labeled=True)
    assert skipped == {"valid": 1, "test": 0}
    assert ds.labeled and ds.valid_labels.tolist() == [1]
    assert ds.positives("test").shape == (0, 3)
    assert ds.known_triples().shape == (3, 3)


def test_dataset_rejects_out_of_range_ids():
    vocab = Vocabulary(["a"], ["r"])
    with pytest.raises(DataError):
        Dataset(vocab, np.array([[0, 0, 1]]), np.empty((0, 3)), np.empty((0, 3)))
