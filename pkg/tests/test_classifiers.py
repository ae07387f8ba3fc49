import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hybridguard.classifiers import (
    EXTERNAL_FACTORIES,
    ClassifierSpec,
    ForestConfig,
    fit,
    load_classifier,
    predict,
    predict_proba,
    register_external,
    save_classifier,
)
from hybridguard.classifiers.linear import softmax
from hybridguard.classifiers.tree import RandomForest, best_split, gini, majority_vote
from hybridguard.errors import ConfigError, DataError

FAST = {
    "logistic_regression": {"max_iter": 200},
    "gaussian_nb": {},
    "decision_tree": {},
    "random_forest": {"n_trees": 10},
    "mlp": {"hidden": 8, "epochs": 20, "batch_size": 32},
}


def _spec(kind, seed=0):
    return ClassifierSpec(kind, FAST[kind], seed)


def _blobs(seed=0, n=60, gap=3.0):
    rng = np.random.default_rng(seed)
    means = np.array([[0.0, 0.0], [gap, 0.0], [0.0, gap]])
    x = np.vstack([rng.normal(m, 1.0, (n, 2)) for m in means])
    return x, np.repeat(np.arange(3), n)


# --------------------------------------------------------------------------- Gaussian NB


def test_gnb_separated_gaussians():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 1, (200, 2)), rng.normal(10, 1, (200, 2))])
    y = np.repeat([0, 1], 200)
    model = fit(ClassifierSpec("gaussian_nb"), x, y)
    assert predict(model, np.array([[1.0, 1.0], [9.0, 9.0]])).tolist() == [0, 1]
    # far from both classes the posterior still normalizes
    p = predict_proba(model, np.array([[1e3, -1e3]]))
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_gnb_matches_closed_form_posterior():
    # oracle: log N(x | mean, var) with the same variance floor, plus log prior
    x, y = _blobs(3)
    model = fit(ClassifierSpec("gaussian_nb"), x, y)
    floor = 1e-9 * x.var(axis=0).max()
    probe = np.random.default_rng(4).normal(1.0, 2.0, (25, 2))
    logs = []
    for c in range(3):
        xc = x[y == c]
        mu, var = xc.mean(0), xc.var(0) + floor
        ll = -0.5 * (np.log(2 * np.pi * var) + (probe - mu) ** 2 / var).sum(1)
        logs.append(ll + np.log(len(xc) / len(x)))
    logs = np.column_stack(logs)
    expected = np.exp(logs - logs.max(1, keepdims=True))
    expected /= expected.sum(1, keepdims=True)
    assert np.allclose(predict_proba(model, probe), expected, atol=1e-12)


def test_gnb_agrees_with_sklearn():
    naive_bayes = pytest.importorskip("sklearn.naive_bayes")
    x, y = _blobs(5)
    probe = np.random.default_rng(6).normal(1.0, 2.0, (40, 2))
    ours = predict_proba(fit(ClassifierSpec("gaussian_nb"), x, y), probe)
    theirs = naive_bayes.GaussianNB().fit(x, y).predict_proba(probe)
    assert np.allclose(ours, theirs, atol=1e-9)


def test_gnb_means_classify_to_their_class():
    x, y = _blobs(1)
    model = fit(ClassifierSpec("gaussian_nb"), x, y)
    means = np.array([x[y == c].mean(0) for c in range(3)])
    assert predict(model, means).tolist() == [0, 1, 2]


# --------------------------------------------------------------------------- trees


def test_tree_one_split():
    x = np.array([[0.0], [1.0], [10.0], [11.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(ClassifierSpec("decision_tree"), x, y)
    assert model.model.n_nodes == 3
    assert model.model.threshold_[0] == 5.5
    assert predict(model, x).tolist() == [0, 0, 1, 1]


def test_gini_values():
    assert gini(np.array([5, 5])) == 0.5
    assert gini(np.array([4, 0])) == 0.0
    assert gini(np.array([0, 0])) == 0.0


def _enumerated_min_impurity(x, y, n_classes):
    n = y.size
    best = None
    for j in range(x.shape[1]):
        values = np.unique(x[:, j])
        for lo, hi in zip(values[:-1], values[1:]):
            t = (lo + hi) / 2
            mask = x[:, j] <= t
            score = 0.0
            for part in (y[mask], y[~mask]):
                counts = np.bincount(part, minlength=n_classes)
                score += part.size / n * (1 - ((counts / part.size) ** 2).sum())
            best = score if best is None else min(best, score)
    return best


@settings(max_examples=200, deadline=None)
@given(
    st.integers(2, 8).flatmap(
        lambda n: st.tuples(
            hnp.arrays(np.float64, st.tuples(st.just(n), st.integers(1, 3)), elements=st.integers(0, 5).map(float)),
            hnp.arrays(np.int64, n, elements=st.integers(0, 2)),
        )
    )
)
def test_cart_root_split_is_exhaustive_minimum(data):
    x, y = data
    oracle = _enumerated_min_impurity(x, y, 3)
    found = best_split(x, y, 3, range(x.shape[1]))
    if oracle is None:
        assert found is None
    else:
        assert found[2] == pytest.approx(oracle, abs=1e-12)


def test_tree_fits_training_data_perfectly():
    x, y = _blobs(2, gap=1.0)
    model = fit(ClassifierSpec("decision_tree"), x, y)
    assert np.array_equal(predict(model, x), y)


def test_tree_depth_cap():
    x, y = _blobs(2, gap=1.0)
    model = fit(ClassifierSpec("decision_tree", {"max_depth": 1}), x, y)
    assert model.model.n_nodes == 3


# --------------------------------------------------------------------------- forest


def test_majority_vote_and_ties():
    assert majority_vote(np.array([[0, 0, 1]]), 2).tolist() == [[2 / 3, 1 / 3]]
    assert np.argmax(majority_vote(np.array([[0, 0, 1]]), 2), axis=1).tolist() == [0]
    # 2-tree tie goes to the lower class id, whatever the vote order
    assert np.argmax(majority_vote(np.array([[1, 0], [0, 1]]), 2), axis=1).tolist() == [0, 0]
    assert majority_vote(np.array([[0, 0, 0, 1]]), 2).tolist() == [[0.75, 0.25]]


def test_forest_tie_breaks_low():
    forest = RandomForest(n_trees=2, bootstrap=False)

    class Fixed:
        def __init__(self, label):
            self.label = label

        def predict(self, x):
            return np.full(x.shape[0], self.label)

    forest.n_classes = 3
    forest.trees_ = [Fixed(2), Fixed(1)]
    assert forest.predict(np.zeros((1, 1))).tolist() == [1]


def test_forest_trees_use_offset_seeds():
    x, y = _blobs(7, gap=1.5)
    model = fit(ClassifierSpec("random_forest", {"n_trees": 4}, seed=10), x, y)
    assert [t.seed for t in model.model.trees_] == [10, 11, 12, 13]
    assert ForestConfig(n_trees=4, seed=10).to_spec().resolved()["max_features"] == "sqrt"


def test_forest_at_least_as_good_as_tree():
    rng = np.random.default_rng(21)

    def noisy(n):
        x = rng.normal(size=(n, 6))
        y = ((x[:, 0] + x[:, 1] + 0.8 * rng.normal(size=n)) > 0).astype(np.int64)
        return x, y

    x_train, y_train = noisy(400)
    x_test, y_test = noisy(400)
    tree = fit(ClassifierSpec("decision_tree", seed=0), x_train, y_train)
    forest = fit(ClassifierSpec("random_forest", {"n_trees": 100}, seed=0), x_train, y_train)
    tree_acc = (predict(tree, x_test) == y_test).mean()
    forest_acc = (predict(forest, x_test) == y_test).mean()
    assert forest_acc >= tree_acc


def test_forest_config_validation():
    with pytest.raises(ConfigError):
        ForestConfig(n_trees=0)
    with pytest.raises(ConfigError):
        ClassifierSpec("random_forest", {"n_trees": 0}).resolved()


# --------------------------------------------------------------------------- linear


def test_softmax_symmetry():
    assert softmax(np.array([[2.0, 2.0]])).tolist() == [[0.5, 0.5]]


def test_logistic_regression_separable():
    rng = np.random.default_rng(8)
    x = rng.uniform(-1, 1, (300, 2))
    y = (x[:, 0] - 0.5 * x[:, 1] > 0.1).astype(np.int64)
    keep = np.abs(x[:, 0] - 0.5 * x[:, 1] - 0.1) > 0.05  # margin
    x, y = x[keep], y[keep]
    model = fit(ClassifierSpec("logistic_regression", {"l2": 1e-4, "max_iter": 2000}), x, y)
    assert (predict(model, x) == y).mean() >= 0.99


def test_mlp_learns_blobs():
    x, y = _blobs(9, gap=5.0)
    model = fit(ClassifierSpec("mlp", {"hidden": 16, "epochs": 60, "batch_size": 32, "lr": 1e-2}), x, y)
    assert (predict(model, x) == y).mean() >= 0.95


# --------------------------------------------------------------------------- contract


@pytest.mark.parametrize("kind", list(FAST))
def test_proba_rows_sum_to_one_and_match_predict(kind):
    x, y = _blobs(11, gap=1.5)
    model = fit(_spec(kind), x, y)
    probe = np.random.default_rng(12).normal(0.0, 3.0, (50, 2))
    p = predict_proba(model, probe)
    assert np.all(p >= 0)
    assert np.allclose(p.sum(1), 1.0, atol=1e-9)
    assert np.array_equal(np.argmax(p, axis=1), predict(model, probe))


@pytest.mark.parametrize("kind", list(FAST))
def test_deterministic_fit(kind):
    x, y = _blobs(13, gap=1.5)
    a = predict_proba(fit(_spec(kind, 3), x, y), x)
    b = predict_proba(fit(_spec(kind, 3), x, y), x)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind", list(FAST))
def test_save_load_round_trip(kind, tmp_path):
    x, y = _blobs(14, gap=1.5)
    model = fit(_spec(kind), x, y, class_names=("a", "b", "c"))
    save_classifier(model, tmp_path / "m.json")
    back = load_classifier(tmp_path / "m.json")
    assert back.class_names == ("a", "b", "c")
    assert np.array_equal(predict_proba(back, x), predict_proba(model, x))


@pytest.mark.parametrize("kind", list(FAST))
def test_width_mismatch(kind):
    x, y = _blobs(15)
    model = fit(_spec(kind), x, y)
    with pytest.raises(DataError):
        predict(model, np.zeros((2, 3)))


@pytest.mark.parametrize("kind", list(FAST))
def test_single_class_is_constant(kind):
    x = np.random.default_rng(0).normal(size=(10, 2))
    model = fit(_spec(kind), x, np.full(10, 2), n_classes=4)
    assert predict(model, x).tolist() == [2] * 10
    assert predict_proba(model, x)[:, 2].tolist() == [1.0] * 10


def test_subset_classes_map_back_to_global_ids():
    x, y = _blobs(16)
    keep = y != 1
    model = fit(ClassifierSpec("gaussian_nb"), x[keep], np.where(y[keep] == 2, 4, y[keep]), n_classes=5)
    p = predict_proba(model, x)
    assert p.shape == (len(x), 5)
    assert set(predict(model, x).tolist()) <= {0, 4}
    assert np.all(p[:, [1, 2, 3]] == 0)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ClassifierSpec("svm").resolved()
    with pytest.raises(ConfigError):
        ClassifierSpec("gaussian_nb", {"depth": 3}).resolved()
    with pytest.raises(ConfigError):
        ClassifierSpec("external", {"name": "missing"}).resolved()
    with pytest.raises(DataError):
        fit(ClassifierSpec("gaussian_nb"), np.zeros((3, 2)), np.array([0, 1, 5]), n_classes=2)


def test_external_plugin(tmp_path):
    ensemble = pytest.importorskip("sklearn.ensemble")
    register_external("extra_trees", lambda options, seed: ensemble.ExtraTreesClassifier(random_state=seed, **options))
    try:
        x, y = _blobs(17)
        spec = ClassifierSpec("external", {"name": "extra_trees", "options": {"n_estimators": 20}}, seed=1)
        model = fit(spec, x, y)
        p = predict_proba(model, x)
        assert np.allclose(p.sum(1), 1.0)
        assert (predict(model, x) == y).mean() > 0.9
        with pytest.raises(ConfigError):
            save_classifier(model, tmp_path / "x.json")
    finally:
        EXTERNAL_FACTORIES.pop("extra_trees", None)


def test_external_predict_only_estimator():
    class Threshold:
        def fit(self, x, y):
            return self

        def predict(self, x):
            return (x[:, 0] > 0).astype(int)

    register_external("threshold", lambda options, seed: Threshold())
    try:
        model = fit(ClassifierSpec("external", {"name": "threshold"}), np.array([[-1.0], [1.0]]), np.array([0, 1]))
        assert predict_proba(model, np.array([[2.0], [-2.0]])).tolist() == [[0, 1], [1, 0]]
    finally:
        EXTERNAL_FACTORIES.pop("threshold", None)

