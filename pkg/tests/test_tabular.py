import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hybridguard.errors import ConfigError, DataError
from hybridguard.tabular import (
    Dataset,
    LabelEncoder,
    clean,
    encode_dataset,
    encode_labels,
    fit_scaler,
    inverse_transform,
    load_csv,
    save_csv,
    split_sizes,
    split_train_test,
    transform,
)


def _ds(rows, labels=None):
    x = np.asarray(rows, dtype=float)
    labels = np.zeros(len(x), dtype=np.int64) if labels is None else np.asarray(labels)
    return Dataset(x, labels, tuple(f"c{i}" for i in range(x.shape[1])), ("only",))


# --------------------------------------------------------------------------- load_csv


def test_load_three_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("a,b,label\n1,2,x\n3,4,y\n5,6,x\n")
    ds = load_csv(p, "label")
    assert ds.features.tolist() == [[1, 2], [3, 4], [5, 6]]
    assert list(ds.labels) == ["x", "y", "x"]
    assert ds.feature_names == ("a", "b")
    assert not ds.is_encoded


def test_load_recognizes_infinity_and_nan_tokens(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("a,b,label\nInfinity,1,x\nNaN,2,y\n-inf,,x\n4,5,y\n")
    ds = load_csv(p, "label")
    assert ds.features[0, 0] == math.inf
    assert math.isnan(ds.features[1, 0])
    assert ds.features[2, 0] == -math.inf and math.isnan(ds.features[2, 1])
    cleaned, report = clean(ds)
    assert cleaned.n_rows == 1
    assert report.rows_dropped_missing == 2 and report.rows_dropped_infinite == 1


def test_load_errors(tmp_path):
    with pytest.raises(DataError):
        load_csv(tmp_path / "missing.csv", "label")
    p = tmp_path / "a.csv"
    p.write_text("a,label\n1,x\n")
    with pytest.raises(ConfigError) as info:
        load_csv(p, "attack_cat")
    assert info.value.details["column"] == "attack_cat"
    p.write_text("a,b,label\n1,2,x\n3,oops,y\n")
    with pytest.raises(DataError) as info:
        load_csv(p, "label")
    assert info.value.details["row"] == 3 and info.value.details["column"] == "b"


def test_load_drop_and_categorical(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("id,proto,v,label\n1,udp,0.5,x\n2,tcp,1.5,y\n3,udp,2.5,x\n")
    ds = load_csv(p, "label", drop_columns=["id"], categorical_columns=["proto"])
    assert ds.feature_names == ("proto", "v")
    assert ds.features[:, 0].tolist() == [1, 0, 1]


def test_label_column_removed_from_features(tmp_path):
    # a 43-column file with the label among them gives 42 features
    p = tmp_path / "wide.csv"
    names = [f"f{i}" for i in range(42)]
    rows = [",".join(["1.0"] * 42 + ["Normal"]) for _ in range(3)]
    p.write_text(",".join(names + ["attack_cat"]) + "\n" + "\n".join(rows) + "\n")
    assert load_csv(p, "attack_cat").n_features == 42


def test_save_load_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    ds, _ = encode_dataset(Dataset(rng.normal(size=(20, 3)), np.array(list("xyz" * 6 + "xy"), dtype=object), ("a", "b", "c")))
    save_csv(ds, tmp_path / "d.csv")
    back, _ = encode_dataset(load_csv(tmp_path / "d.csv", "label"))
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.zeros(3, dtype=np.int64), ("a", "b"))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.zeros(2, dtype=np.int64), ("a", "a"))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.array([0, 2]), ("a",), ("x", "y"))


# --------------------------------------------------------------------------- clean


def test_clean_drop_missing():
    out, report = clean(_ds([[1, 2], [np.nan, 4]]), "drop")
    assert out.features.tolist() == [[1, 2]]
    assert report.rows_dropped_missing == 1


def test_clean_impute_mean():
    out, report = clean(_ds([[1], [3], [np.nan]]), "impute_mean")
    assert out.features.ravel().tolist() == [1, 3, 2]
    assert report.columns_imputed == ("c0",)


def test_clean_impute_all_missing_column():
    with pytest.raises(DataError):
        clean(_ds([[np.nan, 1], [np.nan, 2]]), "impute_mean")


def test_clean_outlier():
    # oracle: population z of 100 in [0,0,0,100] is (100-25)/sqrt(1875) = sqrt(3)
    z = (100 - 25) / math.sqrt((3 * 25**2 + 75**2) / 4)
    assert z == pytest.approx(math.sqrt(3))
    out, report = clean(_ds([[0], [0], [0], [100]]), outlier_zscore=1.5)
    assert out.features.ravel().tolist() == [0, 0, 0]
    assert report.rows_dropped_outlier == 1
    # sqrt(3) is the largest reachable z-score with four rows, so a threshold of 2 keeps everything
    out, _ = clean(_ds([[0], [0], [0], [100]]), outlier_zscore=2)
    assert out.n_rows == 4


def test_clean_rejects_bad_arguments():
    with pytest.raises(ConfigError):
        clean(_ds([[1]]), "median")
    with pytest.raises(ConfigError):
        clean(_ds([[1]]), outlier_zscore=0)


finite_or_missing = st.one_of(
    st.floats(-1e3, 1e3, allow_nan=False), st.just(math.nan), st.just(math.inf), st.just(-math.inf)
)


@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 25), st.integers(1, 3)), elements=finite_or_missing),
    st.sampled_from(["drop", "impute_mean"]),
    st.one_of(st.none(), st.floats(0.5, 3.0)),
)
def test_clean_is_idempotent_and_accounts_rows(x, policy, z):
    ds = _ds(x)
    try:
        once, report = clean(ds, policy, z)
    except DataError:
        return  # all-missing column under impute_mean
    assert np.isfinite(once.features).all()
    assert report.rows_dropped == ds.n_rows - once.n_rows
    twice, report2 = clean(once, policy, z)
    assert np.array_equal(twice.features, once.features)
    assert report2.rows_dropped == 0


# --------------------------------------------------------------------------- labels


def test_encode_labels_examples():
    codes, enc = encode_labels(["BENIGN", "Bot", "BENIGN"])
    assert codes.tolist() == [0, 1, 0] and enc.mapping == {"BENIGN": 0, "Bot": 1}
    codes, _ = encode_labels(["x"])
    assert codes.tolist() == [0]
    _, enc = encode_labels(["Worms", "Analysis", "Backdoor"])
    assert enc.mapping == {"Analysis": 0, "Backdoor": 1, "Worms": 2}
    assert enc.decode([2, 0]) == ["Worms", "Analysis"]
    assert LabelEncoder.from_dict(enc.to_dict()) == enc


@given(st.lists(st.sampled_from(["dos", "Normal", "probe", "r2l", "U2R"]), min_size=1, max_size=30), st.randoms())
def test_encoding_ignores_row_order(labels, rnd):
    shuffled = list(labels)
    rnd.shuffle(shuffled)
    assert encode_labels(labels)[1] == encode_labels(shuffled)[1]


def test_unknown_label_with_fixed_encoder():
    with pytest.raises(DataError):
        LabelEncoder(("a",)).encode(["b"])


# --------------------------------------------------------------------------- scaling


def test_standardize_closed_form():
    s = fit_scaler(np.array([[1.0], [2.0], [3.0]]), "standardize")
    out = transform(s, _ds([[1], [2], [3]])).features.ravel()
    r = 1 / math.sqrt(2 / 3)
    assert out == pytest.approx([-r, 0, r], abs=1e-15)


def test_l2_and_minmax_examples():
    assert transform(fit_scaler(_ds([[3, 4]]), "l2_normalize"), _ds([[3, 4]])).features.tolist() == [[0.6, 0.8]]
    ds = _ds([[0], [5], [10]])
    assert transform(fit_scaler(ds, "minmax_symmetric"), ds).features.ravel().tolist() == [-1, 0, 1]


def test_constant_columns_are_safe():
    ds = _ds([[2, 1], [2, 3]])
    for method in ("standardize", "minmax_symmetric"):
        s = fit_scaler(ds, method)
        out = transform(s, ds).features
        assert np.isfinite(out).all()
        assert np.allclose(inverse_transform(s, transform(s, ds)).features, ds.features)
    assert transform(fit_scaler(ds, "standardize"), ds).features[:, 0].tolist() == [0, 0]


def test_l2_inverse_is_unsupported():
    ds = _ds([[3, 4]])
    with pytest.raises(ConfigError):
        inverse_transform(fit_scaler(ds, "l2_normalize"), ds)


def test_scaler_serialization():
    from hybridguard.tabular import ScalerModel

    s = fit_scaler(np.random.default_rng(1).normal(size=(10, 3)), "standardize")
    back = ScalerModel.from_dict(s.to_dict())
    assert np.array_equal(back.mean, s.mean) and np.array_equal(back.std, s.std)
    assert s.to_dict()["schema_version"] >= 1


@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 4)), elements=st.floats(-1e6, 1e6)),
    st.sampled_from(["standardize", "minmax_symmetric"]),
)
def test_scaler_round_trip(x, method):
    ds = _ds(x)
    s = fit_scaler(ds, method)
    back = inverse_transform(s, transform(s, ds)).features
    scale = np.maximum(np.abs(x), 1.0)
    assert np.all(np.abs(back - x) <= 1e-9 * scale)


def test_minmax_range():
    x = np.random.default_rng(3).normal(size=(50, 4)) * 7
    out = transform(fit_scaler(_ds(x), "minmax_symmetric"), _ds(x)).features
    assert out.min() >= -1 - 1e-12 and out.max() <= 1 + 1e-12


# --------------------------------------------------------------------------- split


@pytest.mark.parametrize(
    "n,expected",
    [(257_673, (220_862, 36_811)), (286_552, (245_616, 40_936)), (625_783, (536_385, 89_398)), (7, (6, 1))],
)
def test_split_sizes(n, expected):
    assert split_sizes(n, 6, 1) == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**31), st.booleans())
def test_split_partitions_rows(n, seed, stratified):
    labels = np.arange(n) % 3
    ds = Dataset(np.arange(n, dtype=float)[:, None], labels, ("id",), ("a", "b", "c"))
    train, test = split_train_test(ds, 6, 1, seed, stratified)
    ids = np.concatenate([train.features[:, 0], test.features[:, 0]])
    assert sorted(ids.tolist()) == list(range(n))
    if not stratified:
        assert train.n_rows == n * 6 // 7
    else:
        for c in range(3):
            k = int((labels == c).sum())
            assert int((train.labels == c).sum()) == k * 6 // 7


def test_split_is_seeded():
    ds = _ds(np.arange(30.0)[:, None])
    a, _ = split_train_test(ds, seed=4)
    b, _ = split_train_test(ds, seed=4)
    c, _ = split_train_test(ds, seed=5)
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)
