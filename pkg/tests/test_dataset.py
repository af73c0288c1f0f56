import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grcnet.dataset import (
    ClassLabel,
    SignalRecord,
    SplitConfig,
    load_dataset,
    load_record,
    split_dataset,
    split_records,
    window_signal,
)
from grcnet.errors import EmptyClass, EmptyFile, MissingFile, ParseError, WindowTooLong
from oracles import brute_window_offsets


def make_record(rid, label, length, rng=None):
    rng = rng or np.random.default_rng(0)
    return SignalRecord(rid, ClassLabel.parse(label), rng.integers(-500, 500, length).astype(float))


def make_corpus(per_class=100, length=4097):
    rng = np.random.default_rng(7)
    return [
        make_record(f"{label.name}{i:03d}", label, length, rng)
        for label in ClassLabel
        for i in range(per_class)
    ]


def test_class_label_indices():
    assert [(c.name, int(c)) for c in ClassLabel] == [("Z", 0), ("O", 1), ("N", 2), ("F", 3), ("S", 4)]
    assert ClassLabel.parse("s") is ClassLabel.S
    assert ClassLabel.parse(2) is ClassLabel.N
    with pytest.raises(ValueError):
        ClassLabel.parse("Q")


def test_load_record_full_length(tmp_path):
    path = tmp_path / "Z001.txt"
    values = np.random.default_rng(0).integers(-2048, 2048, 4097)
    path.write_text("\n".join(str(v) for v in values) + "\n")
    rec = load_record(path, "Z")
    assert rec.length == 4097
    assert rec.conforming
    assert rec.id == "Z001"
    assert rec.label is ClassLabel.Z
    assert rec.sample_rate == pytest.approx(173.61)
    np.testing.assert_array_equal(rec.samples, values)


def test_load_record_nonconforming_length_is_flagged(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("1\n2\n3\n")
    rec = load_record(path, ClassLabel.O)
    assert rec.length == 3 and not rec.conforming


def test_load_record_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_record(tmp_path / "missing.txt", "Z")
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    with pytest.raises(EmptyFile):
        load_record(empty, "Z")
    bad = tmp_path / "bad.txt"
    bad.write_text("1\n2\nabc\n4\n")
    with pytest.raises(ParseError) as err:
        load_record(bad, "Z")
    assert err.value.line == 3


def test_load_dataset_layout(tmp_path):
    for label in ClassLabel:
        d = tmp_path / label.name.lower()
        d.mkdir()
        for i in range(2):
            (d / f"{label.name}{i:03d}.txt").write_text("\n".join(map(str, range(600))))
    records = load_dataset(tmp_path)
    assert len(records) == 10
    assert [r.label for r in records[:2]] == [ClassLabel.Z, ClassLabel.Z]


def test_load_dataset_empty_class_named(tmp_path):
    for label in ClassLabel:
        d = tmp_path / label.name
        d.mkdir()
        if label is not ClassLabel.F:
            (d / "a.txt").write_text("1\n2\n")
    with pytest.raises(EmptyClass, match="F"):
        load_dataset(tmp_path)


@pytest.mark.parametrize(
    "length, window, stride, expected",
    [(4097, 512, 64, 57), (4097, 512, 128, 29), (512, 512, 128, 1)],
)
def test_window_counts(length, window, stride, expected):
    rec = make_record("r", "Z", length)
    windows = window_signal(rec, window, stride)
    assert len(windows) == expected
    assert windows[0].offset == 0
    assert windows[-1].offset == (expected - 1) * stride


def test_window_too_long():
    with pytest.raises(WindowTooLong):
        window_signal(make_record("r", "Z", 100), 101, 1)


@settings(max_examples=300, deadline=None)
@given(
    length=st.integers(1, 100),
    window=st.integers(1, 16),
    stride=st.integers(1, 16),
)
def test_count_law_matches_enumeration(length, window, stride):
    rec = make_record("r", "Z", length)
    offsets = brute_window_offsets(length, window, stride)
    if window > length:
        with pytest.raises(WindowTooLong):
            window_signal(rec, window, stride)
        return
    got = window_signal(rec, window, stride)
    assert [w.offset for w in got] == offsets
    assert len(got) == (length - window) // stride + 1


@settings(max_examples=100, deadline=None)
@given(length=st.integers(2, 200), window=st.integers(1, 16), stride=st.integers(1, 16))
def test_windows_are_contiguous_slices_and_reconstruct_prefix(length, window, stride):
    if window > length:
        return
    rec = make_record("r", "N", length, np.random.default_rng(length))
    got = window_signal(rec, window, stride)
    covered = got[-1].offset + window
    rebuilt = np.full(covered, np.nan)
    for inst in got:
        assert inst.offset + window <= length
        np.testing.assert_array_equal(inst.values, rec.samples[inst.offset : inst.offset + window])
        rebuilt[inst.offset : inst.offset + window] = inst.values
    if stride <= window:
        np.testing.assert_array_equal(rebuilt, rec.samples[:covered])


def test_split_counts_match_protocol():
    train, test = split_dataset(make_corpus(), SplitConfig(0.9, 0, 512, 64))
    for label in ClassLabel:
        assert sum(i.label is label for i in train) == 5130
        assert sum(i.label is label for i in test) == 570


def test_split_is_record_disjoint_and_stratified():
    records = make_corpus(per_class=13, length=700)
    train, test = split_dataset(records, SplitConfig(0.7, 3, 512, 64))
    assert not {i.record_id for i in train} & {i.record_id for i in test}
    tr_recs, te_recs = split_records(records, 0.7, 3)
    for label in ClassLabel:
        n_train = sum(r.label is label for r in tr_recs)
        n_test = sum(r.label is label for r in te_recs)
        assert n_train + n_test == 13
        assert abs(n_train - 0.7 * 13) < 1


def test_split_full_fraction_and_determinism():
    records = make_corpus(per_class=5, length=600)
    train, test = split_dataset(records, SplitConfig(1.0, 0, 512, 64))
    assert test == [] and len(train) == 25 * 2
    a = split_records(records, 0.6, 42)
    b = split_records(records, 0.6, 42)
    assert [r.id for r in a[0]] == [r.id for r in b[0]]
    c = split_records(records, 0.6, 43)
    assert [r.id for r in a[0]] != [r.id for r in c[0]] or [r.id for r in a[1]] != [r.id for r in c[1]]


def test_split_requires_every_class():
    records = [r for r in make_corpus(per_class=2, length=600) if r.label is not ClassLabel.S]
    with pytest.raises(EmptyClass):
        split_dataset(records, SplitConfig())


def test_split_config_validation():
    with pytest.raises(ValueError):
        SplitConfig(window_len=1)
    with pytest.raises(ValueError):
        SplitConfig(train_fraction=0.0)
    with pytest.raises(ValueError):
        SplitConfig(stride=0)
