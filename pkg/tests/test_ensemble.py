import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nary_ecoc import coding, ensemble
from nary_ecoc.coding import EXAMPLE_NARY_MATRIX, CodingMatrix
from nary_ecoc.datasets import Dataset, make_blobs, split
from nary_ecoc.ensemble import EcocModel
from nary_ecoc.errors import InvalidParametersError, UntrainableMatrixError
from nary_ecoc.learners import LearnerSpec
from nary_ecoc.metrics import Distance, bound_report, hamming_distance

TREE = LearnerSpec(kind="tree")
CENTROID = LearnerSpec(kind="centroid")


@pytest.fixture(scope="module")
def separable():
    return make_blobs(3, 20, 2, 0.01, seed=1)


@pytest.fixture(scope="module")
def blobs():
    data = make_blobs(10, 60, 16, 1.25, seed=0)
    return split(data, 0.5, seed=0)


class Fixed:
    """Stub base model returning preset labels regardless of input."""

    def __init__(self, labels):
        self.labels = np.asarray(labels)

    def predict(self, x):
        return self.labels[: len(x)]


def _example_model(decoding="hamming"):
    m = EXAMPLE_NARY_MATRIX
    values = tuple(np.arange(1, 5) for _ in range(m.code_length))
    models = tuple(Fixed([1]) for _ in range(m.code_length))
    return EcocModel(m, models, values, Distance.parse(decoding), TREE, 1)


def test_ova_trains_one_separator_per_class(separable):
    m = coding.generate("ova", 3)
    model = ensemble.train(m, TREE, separable)
    assert len(model.models) == 3 and model.active.all()
    codes = model.predict_codes(separable.features)
    np.testing.assert_array_equal(codes, m.entries[separable.labels - 1])


def test_example_last_column_groups():
    _, groups = coding.relabel_column(EXAMPLE_NARY_MATRIX, 5, np.arange(1, 8))
    assert groups.tolist() == [1, 1, 1, 2, 3, 4, 4]


def test_single_class_data_is_untrainable():
    data = Dataset(np.random.default_rng(0).normal(size=(5, 2)), [1] * 5, 3)
    with pytest.raises(UntrainableMatrixError):
        ensemble.train(coding.generate("ova", 3), TREE, data)


def test_labels_beyond_matrix_rejected(separable):
    with pytest.raises(InvalidParametersError):
        ensemble.train(coding.generate("ova", 2), TREE, separable)


def test_perfect_models_reproduce_rows(separable):
    m = coding.generate("nary", 3, 5, 3, seed=4)
    model = ensemble.train(m, TREE, separable)
    np.testing.assert_array_equal(model.predict_codes(separable.features),
                                  m.entries[separable.labels - 1])


def test_predict_codes_empty_batch(separable):
    model = ensemble.train(coding.generate("ova", 3), CENTROID, separable)
    assert model.predict_codes(np.empty((0, 2))).shape == (0, 3)
    assert model.predict(np.empty((0, 2))).size == 0


def test_walkthrough_code_decodes_to_class_four():
    code = [4, 3, 1, 2, 4, 2]
    assert all(1 <= v <= 4 for v in code)
    rows = EXAMPLE_NARY_MATRIX.entries
    dists = [hamming_distance(code, r) for r in rows]
    assert dists[3] == 1 and min(d for i, d in enumerate(dists) if i != 3) >= 2
    assert _example_model().decode(code) == 4


def test_exact_row_decodes_to_itself():
    model = _example_model("absolute")
    for c in range(1, 8):
        assert model.decode(EXAMPLE_NARY_MATRIX.row(c)) == c


def test_tie_goes_to_lowest_class():
    m = CodingMatrix([[1, 1], [2, 2], [1, 2]], "nary", 2)
    # [2, 1]: distance 1 to rows 1 and 2, 2 to row 3
    assert ensemble.nearest_rows(m.entries, [[2, 1]]).tolist() == [1]
    m = CodingMatrix([[1, 1, 1], [2, 2, 2], [1, 1, 2]], "nary", 2)
    # [1, 2, 1]: distance 1 to rows 1 and 3, 2 to row 2
    assert ensemble.nearest_rows(m.entries, [[1, 2, 1]]).tolist() == [1]


def _oracle_decode(rows, code, distance, active):
    best, best_d = None, None
    for r, row in enumerate(rows, 1):
        d = 0.0
        for s, (a, b) in enumerate(zip(row, code)):
            if not active[s]:
                continue
            if distance == "absolute":
                d += abs(a - b)
            elif a == 0 or b == 0:
                d += 0.5
            else:
                d += a != b
        if best_d is None or d < best_d:
            best, best_d = r, d
    return best


@settings(max_examples=200, deadline=None)
@given(
    scheme=st.sampled_from(["nary", "sparse", "dense"]),
    seed=st.integers(0, 10**6),
    distance=st.sampled_from(["hamming", "absolute"]),
    data=st.data(),
)
def test_decode_matches_exhaustive_scan(scheme, seed, distance, data):
    m = coding.generate(scheme, 6, 8, 4, seed)
    values = sorted(set(np.unique(m.entries).tolist()) | {0} if scheme != "nary" else range(1, 5))
    code = data.draw(st.lists(st.sampled_from(values), min_size=8, max_size=8))
    active = data.draw(st.lists(st.booleans(), min_size=8, max_size=8).filter(any))
    got = ensemble.nearest_rows(m.entries, [code], distance, active)[0]
    assert got == _oracle_decode(m.entries.tolist(), code, distance, active)


def test_evaluation_report_perfect():
    y = np.array([1, 2, 3, 3, 2, 1])
    r = ensemble.evaluation_report(y, y, 3)
    assert r.accuracy == 1.0
    assert r.confusion_percent == [[100.0, 0.0, 0.0], [0.0, 100.0, 0.0], [0.0, 0.0, 100.0]]
    assert r.precision_percent == [100.0] * 3 and r.recall_percent == [100.0] * 3


def test_evaluation_report_constant_predictor():
    y = np.array([1, 2] * 5)
    r = ensemble.evaluation_report(y, np.ones(10, dtype=int), 2)
    assert r.accuracy == 0.5
    assert r.recall_percent == [100.0, 0.0]
    assert r.precision_percent == [50.0, None]
    for row in r.confusion_percent:
        assert sum(row) == pytest.approx(100.0)


def test_evaluation_report_absent_class_is_null():
    r = ensemble.evaluation_report([1, 1, 2], [1, 2, 2], 3)
    assert r.recall_percent[2] is None and r.precision_percent[2] is None
    assert r.confusion_percent[2] is None


def test_nary_not_worse_than_ova_on_overlapping_blobs(blobs):
    train, test = blobs
    nary = coding.select_best("nary", 10, 45, 4, pool_size=100, seed=0)
    acc_nary = ensemble.evaluate(ensemble.train(nary, TREE, train), test).accuracy
    acc_ova = ensemble.evaluate(ensemble.train(coding.generate("ova", 10), TREE, train),
                                test).accuracy
    assert acc_nary >= acc_ova


@pytest.mark.parametrize("decoding", ["hamming", "absolute"])
@pytest.mark.parametrize("scheme", ["nary", "sparse", "ova", "ovo"])
def test_trained_models_have_no_half_rho_violations(blobs, scheme, decoding):
    train, test = blobs
    m = coding.generate(scheme, 10, 20, 4, seed=3)
    model = ensemble.train(m, TREE, train, decoding=decoding)
    assert ensemble.half_rho_check(model, test) == 0


def test_half_rho_hand_built():
    m = CodingMatrix([[1, 1], [2, 2]], "nary", 2)
    assert ensemble.half_rho_violations(m.entries, [[1, 1]], [1]) == 0
    # misdecoded at distance 2 >= rho / 2 = 1: not a violation
    assert ensemble.half_rho_violations(m.entries, [[2, 2]], [1]) == 0


def test_half_rho_counts_a_broken_decoder(monkeypatch):
    m = CodingMatrix([[1, 1], [2, 2]], "nary", 2)
    monkeypatch.setattr(ensemble, "nearest_rows", lambda *a, **k: np.array([2]))
    assert ensemble.half_rho_violations(m.entries, [[1, 1]], [1]) == 1


def test_end_to_end_determinism(blobs):
    train, test = blobs
    m = coding.select_best("nary", 10, 15, 5, pool_size=20, seed=9)
    spec = LearnerSpec(kind="lr", epochs=30, batch_size=16, seed=3)
    a = ensemble.evaluate(ensemble.train(m, spec, train), test)
    b = ensemble.evaluate(ensemble.train(m, spec, train), test)
    assert a == b


def test_column_order_and_parallelism_do_not_matter(blobs):
    train, test = blobs
    m = coding.generate("nary", 10, 8, 3, seed=2)
    spec = LearnerSpec(kind="lr", epochs=20, batch_size=32)
    serial = ensemble.train(m, spec, train)
    parallel = ensemble.train(m, spec, train, jobs=2)
    reverse = [ensemble._fit_column(m, spec, train.features, train.labels, s)
               for s in reversed(range(m.code_length))][::-1]
    for s in range(m.code_length):
        for other in (parallel.models[s], reverse[s][0]):
            np.testing.assert_array_equal(serial.models[s].weights, other.weights)
    np.testing.assert_array_equal(serial.predict(test.features), parallel.predict(test.features))


@pytest.mark.parametrize("spec", [TREE, CENTROID, LearnerSpec(kind="lr", epochs=50)])
def test_identity_column_reduces_to_direct_learner(blobs, spec):
    train, test = blobs
    m = CodingMatrix(np.arange(1, 11).reshape(-1, 1), "nary", 10)
    ecoc = ensemble.evaluate(ensemble.train(m, spec, train), test).accuracy
    direct = ensemble.fit_direct(spec, train)
    assert ecoc == np.mean(direct.predict(test.features) == test.labels)


def test_degenerate_columns_are_skipped():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(20, 2)), np.repeat([1, 2], 10), 4)
    m = coding.generate("ovo", 4)  # only the (1, 2) column sees two groups
    model = ensemble.train(m, CENTROID, data)
    assert model.degenerate_columns == [1, 2, 3, 4, 5]
    codes = model.predict_codes(data.features)
    assert (codes[:, 1:] == ensemble.DEGENERATE).all()
    assert set(model.predict(data.features).tolist()) <= {1, 2, 3, 4}


def test_bound_invariant_under_class_permutation(blobs):
    train, test = blobs
    m = coding.generate("nary", 10, 12, 4, seed=5)
    perm = np.random.default_rng(3).permutation(10)  # new label of class c is perm[c-1]+1
    inverse = np.argsort(perm)
    pm = CodingMatrix(m.entries[inverse], "nary", 4)

    def relabel(d):
        return Dataset(d.features, perm[d.labels - 1] + 1, 10)

    a = bound_report(ensemble.train(m, TREE, train), test)
    b = bound_report(ensemble.train(pm, TREE, relabel(train)), relabel(test))
    assert a.bound == pytest.approx(b.bound, rel=1e-12)
    assert a.rho == b.rho


def test_model_archive_round_trip(tmp_path, blobs):
    train, test = blobs
    m = coding.generate("sparse", 10, 12, seed=1)
    for spec in (TREE, LearnerSpec(kind="lr", epochs=10)):
        model = ensemble.train(m, spec, train, decoding="absolute")
        ensemble.save_model(model, tmp_path / spec.kind.value)
        again = ensemble.load_model(tmp_path / spec.kind.value)
        assert again.matrix == m and again.decoding is Distance.ABSOLUTE
        np.testing.assert_array_equal(again.predict_codes(test.features),
                                      model.predict_codes(test.features))


def test_select_n_by_cv_returns_a_candidate(blobs):
    train, _ = blobs
    best, scores = ensemble.select_n_by_cv(train, [2, 4], CENTROID, code_length=10, k=3)
    assert best in (2, 4) and set(scores) == {2, 4}
    assert all(0 <= v <= 1 for v in scores.values())


def test_decode_matches_pairwise_enumeration_on_example():
    rows = EXAMPLE_NARY_MATRIX.entries
    for code in itertools.islice(itertools.product(range(1, 5), repeat=6), 0, 4096, 7):
        expected = _oracle_decode(rows.tolist(), code, "hamming", [True] * 6)
        assert _example_model().decode(code) == expected
