import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nary_ecoc import datasets
from nary_ecoc.datasets import Dataset
from nary_ecoc.errors import DataFormatError, InvalidParametersError
from nary_ecoc.learners import LearnerSpec, fit


def test_sparse_single_line(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("3 1:0.5 4:2.0\n")
    d = datasets.load_sparse(p)
    assert d.features.tolist() == [[0.5, 0.0, 0.0, 2.0]]
    assert d.labels.tolist() == [1] and d.label_values == (3,)


def test_sparse_remaps_labels_in_numeric_order(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("10 1:1\n-1 2:1\n10 1:2\n# comment\n\n2 3:1  # trailing\n")
    d = datasets.load_sparse(p)
    assert d.label_values == (-1, 2, 10)
    assert d.labels.tolist() == [3, 1, 3, 2]
    assert d.n_features == 3


@pytest.mark.parametrize(
    "text,line",
    [("", None), ("x 1:1\n", 1), ("1 1:1\n2 1-3\n", 2), ("1 0:1\n", 1), ("1 2:abc\n", 1)],
)
def test_sparse_errors(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(DataFormatError) as err:
        datasets.load_sparse(p)
    assert err.value.line == line


def test_sparse_round_trip(tmp_path):
    d = datasets.make_blobs(3, 4, 5, 1.0, seed=2)
    d = Dataset(d.features, d.labels, 3, (7, 8, 9))
    p = tmp_path / "rt.txt"
    datasets.write_sparse(d, p)
    assert datasets.load_sparse(p, n_features=5) == d


def test_csv_header_on_and_off(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("f1,f2,label\n1.5,2,cat\n3,4,dog\n5,6,cat\n")
    b.write_text("1.5,2,cat\n3,4,dog\n5,6,cat\n")
    da = datasets.load_csv(a)
    db = datasets.load_csv(b, header=False)
    assert da == db
    assert da.feature_names == ("f1", "f2")
    assert da.features.tolist() == [[1.5, 2.0], [3.0, 4.0], [5.0, 6.0]]
    assert da.labels.tolist() == [1, 2, 1] and da.label_values == ("cat", "dog")


def test_csv_label_column_first(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("2,0.1,0.2\n1,0.3,0.4\n2,0.5,0.6\n")
    d = datasets.load(p, label_column=0)
    assert d.features.tolist() == [[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]
    assert d.labels.tolist() == [2, 1, 2]


@pytest.mark.parametrize("text", ["1,,2\n", "1,2\n3\n", "", "a,b\n", "1,x,2\n1,2,3\n"])
def test_csv_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataFormatError):
        datasets.load_csv(p, header=False if text.startswith("1,x") else None)


def test_dataset_rejects_bad_labels():
    with pytest.raises(InvalidParametersError):
        Dataset(np.zeros((2, 1)), [0, 1], 2)
    with pytest.raises(InvalidParametersError):
        Dataset(np.zeros((2, 1)), [1, 3], 2)
    with pytest.raises(InvalidParametersError):
        Dataset(np.zeros((0, 1)), [], 2)


def test_split_half_balanced():
    d = Dataset(np.arange(10.0).reshape(-1, 1), [1, 2] * 5, 2)
    tr, te = datasets.split(d, 0.5, stratified=True, seed=0)
    assert tr.n_instances == te.n_instances == 5
    assert sorted(np.bincount(tr.labels).tolist()) == [0, 2, 3]


def test_split_seed_changes_membership():
    d = datasets.make_blobs(2, 20, 1, 1.0, seed=0)
    a = datasets.split_indices(d.labels, 0.5, seed=0)[0]
    b = datasets.split_indices(d.labels, 0.5, seed=1)[0]
    assert not np.array_equal(a, b)
    assert np.array_equal(a, datasets.split_indices(d.labels, 0.5, seed=0)[0])


def test_split_rounding_on_three_instances():
    tr, te = datasets.split_indices([1, 2, 3], 0.99, stratified=False, seed=0)
    assert (tr.size, te.size) == (2, 1)


def test_split_singleton_class_goes_to_train(caplog):
    tr, te = datasets.split_indices([1, 1, 1, 1, 2], 0.5, seed=0)
    assert 4 in tr
    assert "single instance" in caplog.text


def test_split_bad_fraction():
    with pytest.raises(InvalidParametersError):
        datasets.split_indices([1, 2], 1.0)


@settings(max_examples=50, deadline=None)
@given(labels=st.lists(st.integers(1, 4), min_size=2, max_size=60),
       fraction=st.floats(0.05, 0.95), seed=st.integers(0, 100), stratified=st.booleans())
def test_split_is_a_partition_with_stratified_proportions(labels, fraction, seed, stratified):
    y = np.array(labels)
    tr, te = datasets.split_indices(y, fraction, stratified, seed)
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(y.size))
    if stratified:
        for c in np.unique(y):
            n_c = (y == c).sum()
            if n_c > 1:
                assert abs((y[tr] == c).sum() - fraction * n_c) <= 1


def test_kfold_partitions():
    folds = datasets.kfold_indices(23, 5, seed=1)
    assert len(folds) == 5
    tests = np.concatenate([t for _, t in folds])
    assert np.array_equal(np.sort(tests), np.arange(23))
    for tr, te in folds:
        assert np.intersect1d(tr, te).size == 0 and tr.size + te.size == 23


def test_blobs_deterministic_and_shaped():
    a = datasets.make_blobs(4, 5, 3, 0.5, seed=3)
    b = datasets.make_blobs(4, 5, 3, 0.5, seed=3)
    assert a == b and a.features.shape == (20, 3)
    assert np.bincount(a.labels).tolist() == [0, 5, 5, 5, 5]


def test_blobs_single_class():
    d = datasets.make_blobs(1, 7, 2, 1.0, seed=0)
    assert (d.labels == 1).all() and d.n_classes == 1


def test_blobs_zero_spread_is_centroid_separable():
    d = datasets.make_blobs(8, 10, 2, 1e-9, seed=4)
    model = fit(LearnerSpec(kind="centroid"), d.features, d.labels)
    assert (model.predict(d.features) == d.labels).all()
