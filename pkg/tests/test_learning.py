import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.utils.estimator_checks import check_estimator

from airwaysurv.errors import (AlignmentError, DegenerateTrainingError, EmptyInputError,
                               MissingLabelsError, SchemaError, StratificationError,
                               UndefinedCorrelationError)
from airwaysurv.learning import (FeatureTable, MinMaxScaler, PearsonSelector, SelectionConfig,
                                 SMOClassifier, apply_minmax, classification_report,
                                 combine_tables, cross_validate, fit_bundle, fit_minmax,
                                 grid_search, load_model, pearson_r, read_table, roc_auc,
                                 save_model, select_features, stratified_folds, svm_predict,
                                 svm_train, write_table)
from airwaysurv.learning.svm import rbf_kernel
from oracles import svm as ref


def _table(X, y=None, prefix="f"):
    X = np.asarray(X, dtype=float)
    return FeatureTable([f"c{i:03d}" for i in range(len(X))],
                        [f"{prefix}{j}" for j in range(X.shape[1])], X, y)


def _planted(n=60, seed=0, noise=0.1, n_noise=4):
    rng = np.random.default_rng(seed)
    y = np.zeros(n, dtype=int)
    y[rng.permutation(n)[: n // 2 + 5]] = 1
    X = rng.normal(size=(n, n_noise + 1))
    X[:, 0] = y + noise * rng.normal(size=n)
    return _table(X, y)


# -- tables ---------------------------------------------------------------

def test_table_validation():
    with pytest.raises(SchemaError):
        FeatureTable(["a", "a"], ["x"], [[1.0], [2.0]])
    with pytest.raises(SchemaError):
        FeatureTable(["a"], ["x"], [[np.nan]])
    with pytest.raises(SchemaError):
        FeatureTable(["a"], ["x"], [[1.0]], [2])


def test_table_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    t = _table(rng.normal(size=(5, 3)) * 1e-7, [0, 1, 1, 0, 1])
    write_table(t, tmp_path / "t.csv")
    back = read_table(tmp_path / "t.csv")
    assert back.case_ids == t.case_ids and back.feature_names == t.feature_names
    assert np.array_equal(back.values, t.values) and np.array_equal(back.labels, t.labels)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "case_id,f0,f1,f2,label"


def test_combine_tables():
    a = _table(np.ones((3, 30)))
    b = FeatureTable(a.case_ids, [f"g{j}" for j in range(40)], np.zeros((3, 40)))
    c = combine_tables(a, b)
    assert c.shape == (3, 70)
    assert c.feature_names[0] == "trachea__f0" and c.feature_names[30] == "airway__g0"
    assert np.array_equal(c.column("airway__g5"), b.column("g5"))
    empty = FeatureTable(a.case_ids, [], np.zeros((3, 0)))
    assert combine_tables(a, empty).shape == (3, 30)
    with pytest.raises(AlignmentError):
        combine_tables(a, a.subset([2, 1, 0]))


# -- Pearson selection ----------------------------------------------------

def test_pearson_trivial():
    y = np.array([0, 1, 0, 1, 1])
    assert pearson_r(y, y) == 1.0
    assert pearson_r(1 - y, y) == -1.0
    with pytest.raises(UndefinedCorrelationError):
        pearson_r(np.ones(5), y)
    with pytest.raises(UndefinedCorrelationError):
        pearson_r(y, np.zeros(5))


def _closed_form_r(x, y):
    n = len(x)
    sx, sy = sum(x), sum(y)
    sxy = sum(a * b for a, b in zip(x, y))
    sxx, syy = sum(a * a for a in x), sum(b * b for b in y)
    return (n * sxy - sx * sy) / math.sqrt((n * sxx - sx * sx) * (n * syy - sy * sy))


def test_pearson_matches_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(100):
        y = rng.integers(0, 2, 20)
        y[:2] = (0, 1)
        x = rng.normal(size=20)
        assert abs(pearson_r(x, y) - _closed_form_r(x.tolist(), y.tolist())) <= 1e-12


def test_select_features_examples():
    rng = np.random.default_rng(2)
    n = 400
    y = rng.integers(0, 2, n)
    z = (y - y.mean()) / y.std()
    cols = []
    for r in (0.1, 0.3, 0.5):
        e = rng.normal(size=n)
        e -= np.polyfit(z, e, 1)[0] * z  # orthogonalise against the labels
        e = (e - e.mean()) / e.std()
        cols.append(r * z + math.sqrt(1 - r * r) * e)
    X = np.column_stack(cols + [np.ones(n)])
    t = _table(X, y)
    rs = [abs(pearson_r(X[:, j], y)) for j in range(3)]
    np.testing.assert_allclose(rs, (0.1, 0.3, 0.5), atol=1e-9)
    assert select_features(t, SelectionConfig(0.41)) == ["f2"]
    assert select_features(t, 0.0) == ["f0", "f1", "f2"]  # constant f3 excluded
    t2 = _table(np.column_stack([X[:, :3], y]), y)
    assert select_features(t2, 1.0) == ["f3"]
    with pytest.raises(MissingLabelsError):
        select_features(_table(X), 0.2)
    with pytest.raises(ValueError):
        SelectionConfig(1.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-100, 100), st.floats(0, 1))
def test_selection_invariant_under_positive_affine(seed, a, b, thr):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 25)
    y[:2] = (0, 1)
    X = rng.normal(size=(25, 4)) + y[:, None] * rng.normal(size=4)
    X2 = X.copy()
    X2[:, 1] = a * X2[:, 1] + b
    r1 = [abs(pearson_r(X[:, j], y)) for j in range(4)]
    if any(abs(r - thr) < 1e-9 for r in r1):
        return
    assert select_features(_table(X, y), thr) == select_features(_table(X2, y), thr)


def test_prefix_thresholds_in_selector():
    from airwaysurv.learning import resolve_thresholds
    names = ["trachea__a", "airway__a", "other"]
    np.testing.assert_array_equal(resolve_thresholds(names, {"trachea": 0.2, "airway": 0.41}),
                                  [0.2, 0.41, 0.0])


# -- min-max --------------------------------------------------------------

def test_minmax_examples():
    t = _table([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]])
    s = fit_minmax(t)
    out = apply_minmax(s, t)
    np.testing.assert_array_equal(out.column("f0"), [0, 0.5, 1])
    np.testing.assert_array_equal(out.column("f1"), [0, 0, 0])
    new = apply_minmax(s, _table([[8.0, 1.0]]))
    assert new.column("f0")[0] == 1.5
    with pytest.raises(SchemaError):
        apply_minmax(s, _table([[1.0]], prefix="g"))
    assert np.all(s.data_max_ >= s.data_min_)


def test_minmax_exact_bounds_on_random_columns():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(37, 50)) * rng.uniform(1e-6, 1e6, 50) + rng.normal(size=50) * 1e3
    out = MinMaxScaler().fit_transform(X)
    assert np.all(out.min(axis=0) == 0.0) and np.all(out.max(axis=0) == 1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_minmax_preserves_order(col):
    x = np.array(col)[:, None]
    out = MinMaxScaler().fit_transform(x)[:, 0]
    i, j = np.triu_indices(len(col), 1)
    assert np.all((x[i, 0] < x[j, 0]) <= (out[i] <= out[j]))


# -- SVM ------------------------------------------------------------------

def test_two_point_closed_form():
    # dual of two points: alpha = 2 / (K11 + K22 - 2 K12) = 1 / (1 - k)
    X = np.array([[0.0, 0.0], [1.0, 2.0]])
    gamma = 0.3
    k = math.exp(-gamma * 5.0)
    alpha = 1.0 / (1.0 - k)
    m = svm_train(X, [0, 1], C=100.0, gamma=gamma, tol=1e-12)
    np.testing.assert_allclose(m.alphas, [alpha, alpha], rtol=1e-10)
    assert abs(m.bias) < 1e-10
    labels, f = svm_predict(m, X)
    assert labels.tolist() == [0, 1]
    np.testing.assert_allclose(f, [-1, 1], atol=1e-10)


def test_separable_four_points():
    X = np.array([[0, 0], [0, 1], [5, 5], [5, 6]], dtype=float)
    m = svm_train(X, [0, 0, 1, 1], C=10, gamma=0.1)
    assert svm_predict(m, X)[0].tolist() == [0, 0, 1, 1]


def _dataset(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    d = int(rng.integers(2, 6))
    X = rng.uniform(0, 1, (n, d))
    y = rng.integers(0, 2, n)
    y[:2] = (0, 1)
    return X, y


def _probe(d):
    g = np.linspace(0, 1, 5)
    P = np.full((25, d), 0.5)
    P[:, 0] = np.repeat(g, 5)
    P[:, 1] = np.tile(g, 5)
    return P


def _kkt_violation(m, X, y, C):
    ys = np.where(np.asarray(y) == 1, 1.0, -1.0)
    alpha = np.zeros(len(X))
    for sv, a in zip(m.support_vectors, m.alphas):
        alpha[np.flatnonzero((X == sv).all(axis=1))[0]] = a
    G = ys * (rbf_kernel(X, X, m.gamma) @ (alpha * ys)) - 1.0
    v = -ys * G
    up = np.where(ys > 0, alpha < C, alpha > 0)
    low = np.where(ys > 0, alpha > 0, alpha < C)
    return v[up].max() - v[low].min(), alpha


@pytest.mark.parametrize("seed", range(20))
def test_smo_matches_dense_qp(seed):
    X, y = _dataset(seed)
    C, gamma = 10.0, 1.0
    m = svm_train(X, y, C, gamma, tol=1e-6)
    a, b = ref.solve_dual(X, y, C, gamma)
    P = _probe(X.shape[1])
    f = m.decision_function(P)
    g = ref.decision(X, y, a, b, gamma, P)
    assert np.max(np.abs(f - g)) <= 1e-4
    viol, alpha = _kkt_violation(m, X, y, C)
    assert viol <= 1e-6
    assert abs(m.dual_coefs.sum()) <= 1e-8
    assert np.all((m.alphas > 0) & (m.alphas <= C))
    keep = np.abs(g) > 1e-6
    assert np.array_equal(np.sign(f[keep]), np.sign(g[keep]))


@pytest.mark.parametrize("seed", range(5))
def test_default_tolerance_meets_kkt_bound(seed):
    X, y = _dataset(seed)
    m = svm_train(X, y, C=8000.0, gamma=0.01)
    viol, _ = _kkt_violation(m, X, y, 8000.0)
    assert viol <= 1e-3 and m.kkt_gap <= 1e-3
    assert abs(m.dual_coefs.sum()) <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_free_support_vectors_on_margin(seed):
    X, y = _dataset(seed)
    C = 5.0
    m = svm_train(X, y, C, 2.0, tol=1e-8)
    ys = np.where(y == 1, 1, -1)
    for sv, coef in zip(m.support_vectors, m.dual_coefs):
        if abs(coef) < C - 1e-9:
            i = np.flatnonzero((X == sv).all(axis=1))[0]
            assert abs(ys[i] * m.decision_function(sv[None])[0] - 1) < 1e-4


@pytest.mark.parametrize("seed", range(8))
def test_label_swap_antisymmetry(seed):
    X, y = _dataset(seed)
    a = svm_train(X, y, 3.0, 1.5, tol=1e-8)
    b = svm_train(X, 1 - y, 3.0, 1.5, tol=1e-8)
    P = _probe(X.shape[1])
    np.testing.assert_allclose(a.decision_function(P), -b.decision_function(P), atol=1e-6)
    np.testing.assert_allclose(np.sort(a.alphas), np.sort(b.alphas), atol=1e-9)


def test_svm_errors():
    X = np.zeros((3, 2))
    with pytest.raises(DegenerateTrainingError):
        svm_train(X, [1, 1, 1])
    m = svm_train(np.array([[0.0, 0], [1, 1]]), [0, 1])
    with pytest.raises(SchemaError):
        svm_predict(m, np.zeros((1, 3)))
    with pytest.raises(ValueError):
        svm_train(np.array([[0.0, 0], [1, 1]]), [0, 1], C=-1)


@pytest.mark.parametrize("est", [SMOClassifier(C=10.0, gamma=0.5), MinMaxScaler(),
                                 PearsonSelector(0.0)], ids=lambda e: type(e).__name__)
def test_sklearn_estimator_contract(est):
    check_estimator(est)


def test_smo_classifier_matches_function():
    X, y = _dataset(3)
    clf = SMOClassifier(C=10.0, gamma=1.0, tol=1e-6).fit(X, y)
    m = svm_train(X, y, 10.0, 1.0, 1e-6)
    np.testing.assert_array_equal(clf.decision_function(X), m.decision_function(X))
    assert clf.get_params()["C"] == 10.0


# -- metrics --------------------------------------------------------------

def test_report_hand_count():
    r = classification_report([1, 1, 0, 0], [1, 0, 0, 0], [0.9, -0.2, -0.5, -0.7])
    assert (r.tp, r.fn, r.tn, r.fp) == (1, 1, 2, 0)
    assert r.sensitivity == 0.5 and r.specificity == 1.0 and r.accuracy == 0.75
    assert math.isclose(r.f1, 2 / 3)
    assert r.auc == 1.0


def test_report_perfect_and_empty():
    r = classification_report([0, 1, 1], [0, 1, 1], [-1, 1, 2])
    assert (r.accuracy, r.f1, r.sensitivity, r.specificity, r.auc) == (1, 1, 1, 1, 1)
    with pytest.raises(EmptyInputError):
        classification_report([], [])
    assert math.isnan(classification_report([1, 1], [1, 1], [0, 1]).auc)


def test_report_positive_class_switch():
    a = classification_report([1, 1, 0, 0], [1, 0, 0, 1], [2, -1, -2, 1], positive=1)
    b = classification_report([1, 1, 0, 0], [1, 0, 0, 1], [2, -1, -2, 1], positive=0)
    assert a.sensitivity == b.specificity and a.specificity == b.sensitivity
    assert a.auc == b.auc


def _mann_whitney(y, s):
    pos = [v for v, t in zip(s, y) if t == 1]
    neg = [v for v, t in zip(s, y) if t == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_matches_pairwise_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(4, 40))
        y = rng.integers(0, 2, n)
        y[:2] = (0, 1)
        s = np.round(rng.normal(size=n), 1)  # rounding forces ties
        assert abs(roc_auc(y, s) - _mann_whitney(y.tolist(), s.tolist())) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_report_consistent_with_counts(pairs):
    yt, yp = zip(*pairs)
    r = classification_report(yt, yp)
    assert r.n == len(pairs)
    assert r.accuracy == (r.tp + r.tn) / r.n
    if r.tp + r.fn:
        assert r.sensitivity == r.tp / (r.tp + r.fn)
    if r.tn + r.fp:
        assert r.specificity == r.tn / (r.tn + r.fp)


# -- folds and CV ---------------------------------------------------------

def test_stratified_folds_balance():
    y = np.array([0] * 36 + [1] * 59)
    f = stratified_folds(y, 5, seed=7)
    sizes = np.bincount(f)
    assert sizes.max() - sizes.min() <= 1
    for c in (0, 1):
        per = np.bincount(f[y == c], minlength=5)
        assert per.max() - per.min() <= 1
    assert np.array_equal(f, stratified_folds(y, 5, seed=7))
    assert not np.array_equal(f, stratified_folds(y, 5, seed=8))
    with pytest.raises(StratificationError):
        stratified_folds([0, 0, 0, 1, 1, 1, 1, 1], 5)


def test_cv_planted_signal_and_reproducible():
    t = _planted()
    a = cross_validate(t, 5, C=8000, gamma=0.01, seed=3, thresholds=0.8)
    assert a.mean_accuracy >= 0.9
    b = cross_validate(t, 5, C=8000, gamma=0.01, seed=3, thresholds=0.8)
    assert np.array_equal(a.folds, b.folds)
    assert a.decision_values.tobytes() == b.decision_values.tobytes()
    assert a.reports == b.reports


def test_cv_modes_differ_on_noise():
    rng = np.random.default_rng(11)
    y = rng.integers(0, 2, 40)
    t = _table(rng.normal(size=(40, 12)), y)
    lf = cross_validate(t, 5, 10.0, 1.0, seed=0, thresholds=0.1, mode="leak-free")
    pf = cross_validate(t, 5, 10.0, 1.0, seed=0, thresholds=0.1, mode="full-table")
    assert not np.array_equal(lf.decision_values, pf.decision_values)
    with pytest.raises(ValueError):
        cross_validate(t, mode="sometimes")


def test_cv_parallel_folds_equal_serial():
    t = _planted(seed=4)
    a = cross_validate(t, 5, 100.0, 0.1, seed=1)
    b = cross_validate(t, 5, 100.0, 0.1, seed=1, n_jobs=2)
    assert a.decision_values.tobytes() == b.decision_values.tobytes()


def test_grid_search():
    t = _planted(seed=2)
    C, g, res = grid_search(t, [8000.0], [0.01], seed=0, thresholds=0.8)
    assert (C, g) == (8000.0, 0.01) and len(res) == 1
    C, g, res = grid_search(t, [1e4, 1.0], [1.0, 1e-3], seed=0, thresholds=0.8)
    best = max(r.mean_accuracy for r in res)
    assert best == 1.0
    ties = [(r.C, r.gamma) for r in res if r.mean_accuracy == best]
    assert (C, g) == min(ties)
    assert grid_search(t, [1e4, 1.0], [1.0, 1e-3], seed=0, thresholds=0.8)[:2] == (C, g)
    with pytest.raises(ValueError):
        grid_search(t, [], [1.0])


def test_cv_requires_labels_and_classes():
    with pytest.raises(MissingLabelsError):
        cross_validate(_table(np.ones((10, 2))))
    with pytest.raises(DegenerateTrainingError):
        cross_validate(_table(np.random.default_rng(0).normal(size=(10, 2)), [1] * 10))


# -- model file -----------------------------------------------------------

def test_model_roundtrip_and_schema(tmp_path):
    t = _planted(seed=6)
    b = fit_bundle(t, 100.0, 0.5, thresholds=0.5)
    assert b.feature_names == ("f0",)
    save_model(b, tmp_path / "m.json", {"note": "x"})
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.decision_function(t), b.decision_function(t))
    with pytest.raises(SchemaError, match="f0"):
        back.predict(t.select(["f1", "f2"]))


def test_model_format_tag_checked(tmp_path):
    import json
    t = _planted(seed=6)
    save_model(fit_bundle(t, 100.0, 0.5, 0.5), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["format"] = "something-else"
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_model(tmp_path / "bad.json")
    doc["format"], doc["version"] = "airwaysurv-svm-model", 99
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        load_model(tmp_path / "bad.json")
