"""Loading, cleaning, label encoding, scaling and splitting of labeled traffic tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from hybridguard import SCHEMA_VERSION
from hybridguard._io import write_atomic
from hybridguard.errors import ConfigError, DataError

MISSING_TOKENS = {"", "nan"}
INFINITE_TOKENS = {"inf", "+inf", "infinity", "+infinity"}
NEG_INFINITE_TOKENS = {"-inf", "-infinity"}

SCALER_METHODS = ("standardize", "l2_normalize", "minmax_symmetric")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus per-row labels.

    ``labels`` holds raw strings straight after :func:`load_csv` (``class_names`` is
    ``None``) and non-negative integers once encoded.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DataError("features must be a 2-D matrix", shape=list(features.shape))
        labels = np.asarray(self.labels)
        if labels.shape != (features.shape[0],):
            raise DataError(
                "label count does not match row count",
                rows=features.shape[0],
                labels=int(labels.size),
            )
        names = tuple(self.feature_names)
        if len(names) != features.shape[1]:
            raise DataError("feature_names length does not match column count")
        if len(set(names)) != len(names):
            raise DataError("feature names must be distinct")
        if self.class_names is not None:
            labels = labels.astype(np.int64)
            if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
                raise DataError("label outside the class-name range")
            object.__setattr__(self, "class_names", tuple(self.class_names))
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.class_names is None:
            raise DataError("dataset labels are not encoded")
        return len(self.class_names)

    @property
    def is_encoded(self) -> bool:
        return self.class_names is not None

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, features=self.features[rows], labels=self.labels[rows])

    def select_features(self, indices: Sequence[int]) -> "Dataset":
        indices = list(indices)
        return replace(
            self,
            features=self.features[:, indices],
            feature_names=tuple(self.feature_names[i] for i in indices),
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return replace(self, features=features)


def concat(first: Dataset, *others: Dataset) -> Dataset:
    for other in others:
        if other.feature_names != first.feature_names or other.class_names != first.class_names:
            raise DataError("cannot concatenate datasets with different schemas")
    parts = (first, *others)
    return replace(
        first,
        features=np.vstack([p.features for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
    )


# --------------------------------------------------------------------------- loading


def _parse_cell(text: str) -> float:
    token = text.strip()
    low = token.lower()
    if low in MISSING_TOKENS:
        return math.nan
    if low in INFINITE_TOKENS:
        return math.inf
    if low in NEG_INFINITE_TOKENS:
        return -math.inf
    return float(token)


def load_csv(
    path,
    label_column: str,
    drop_columns: Sequence[str] = (),
    categorical_columns: Sequence[str] = (),
) -> Dataset:
    """Read a headed CSV into an unencoded :class:`Dataset`.

    Columns listed in ``categorical_columns`` are label-encoded in lexicographic
    order; any other non-numeric cell is a :class:`DataError` naming its row and column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}", path=str(path))
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty CSV file: {path}", path=str(path)) from None
        if label_column not in header:
            raise ConfigError(
                f"label column {label_column!r} not in header",
                column=label_column,
                header=header,
            )
        unknown = [c for c in (*drop_columns, *categorical_columns) if c not in header]
        if unknown:
            raise ConfigError(f"columns not in header: {unknown}", columns=unknown)
        label_at = header.index(label_column)
        skip = set(drop_columns) | {label_column}
        keep = [i for i, name in enumerate(header) if name not in skip]
        categorical = {header.index(c) for c in categorical_columns}

        raw_rows = []
        raw_labels = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"row {line_no} has {len(row)} cells, header has {len(header)}",
                    row=line_no,
                )
            raw_rows.append(row)
            raw_labels.append(row[label_at].strip())

    columns = []
    for col in keep:
        cells = [r[col] for r in raw_rows]
        if col in categorical:
            mapping = {v: i for i, v in enumerate(sorted({c.strip() for c in cells}))}
            columns.append(np.array([mapping[c.strip()] for c in cells], dtype=np.float64))
            continue
        values = np.empty(len(cells), dtype=np.float64)
        for i, cell in enumerate(cells):
            try:
                values[i] = _parse_cell(cell)
            except ValueError:
                raise DataError(
                    f"non-numeric value {cell!r} at row {i + 2}, column {header[col]!r}",
                    row=i + 2,
                    column=header[col],
                    value=cell,
                ) from None
        columns.append(values)

    features = np.column_stack(columns) if columns else np.empty((len(raw_rows), 0))
    return Dataset(
        features=features,
        labels=np.array(raw_labels, dtype=object),
        feature_names=tuple(header[i] for i in keep),
    )


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write a dataset as CSV; encoded labels are written by class name.

    Floats use ``repr`` so a reload is bit-exact and reruns are byte-identical.
    """
    path = Path(path)
    if dataset.is_encoded:
        names = dataset.class_names
        labels = [names[i] for i in dataset.labels]
    else:
        labels = [str(v) for v in dataset.labels]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([*dataset.feature_names, label_column])
    for row, label in zip(dataset.features.tolist(), labels):
        writer.writerow([repr(v) for v in row] + [label])
    write_atomic(path, buffer.getvalue())


# --------------------------------------------------------------------------- cleaning


@dataclass(frozen=True)
class CleanReport:
    rows_dropped_missing: int = 0
    rows_dropped_infinite: int = 0
    rows_dropped_outlier: int = 0
    columns_imputed: tuple[str, ...] = ()

    @property
    def rows_dropped(self) -> int:
        return self.rows_dropped_missing + self.rows_dropped_infinite + self.rows_dropped_outlier

    def to_dict(self) -> dict:
        return {
            "rows_dropped_missing": self.rows_dropped_missing,
            "rows_dropped_infinite": self.rows_dropped_infinite,
            "rows_dropped_outlier": self.rows_dropped_outlier,
            "columns_imputed": list(self.columns_imputed),
        }


def _zscores(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)
    sigma = np.where(sigma > 0, sigma, 1.0)
    return (x - mu) / sigma


def clean(
    dataset: Dataset,
    policy: str = "drop",
    outlier_zscore: float | None = None,
) -> tuple[Dataset, CleanReport]:
    """Remove or repair missing and infinite feature values, then trim outliers.

    Under ``impute_mean`` both NaN and infinite cells are replaced by the column mean
    of the finite entries. Outlier trimming repeats until no row exceeds the
    threshold, so cleaning an already-clean dataset is a no-op.
    """
    if policy not in ("drop", "impute_mean"):
        raise ConfigError(f"unknown clean policy {policy!r}", policy=policy)
    if outlier_zscore is not None and not outlier_zscore > 0:
        raise ConfigError("outlier_zscore must be positive", outlier_zscore=outlier_zscore)

    x = dataset.features
    nan_rows = np.isnan(x).any(axis=1)
    inf_rows = np.isinf(x).any(axis=1) & ~nan_rows
    dropped_missing = dropped_infinite = 0
    imputed: list[str] = []

    if policy == "drop":
        keep = ~(nan_rows | inf_rows)
        dropped_missing = int(nan_rows.sum())
        dropped_infinite = int(inf_rows.sum())
        dataset = dataset.take(np.flatnonzero(keep))
    else:
        bad = ~np.isfinite(x)
        if bad.any():
            x = x.copy()
            for j in np.flatnonzero(bad.any(axis=0)):
                finite = x[~bad[:, j], j]
                if finite.size == 0:
                    raise DataError(
                        f"column {dataset.feature_names[j]!r} has no finite values to impute from",
                        column=dataset.feature_names[j],
                    )
                x[bad[:, j], j] = finite.mean()
                imputed.append(dataset.feature_names[j])
            dataset = dataset.with_features(x)

    dropped_outlier = 0
    if outlier_zscore is not None:
        while dataset.n_rows:
            outliers = (np.abs(_zscores(dataset.features)) > outlier_zscore).any(axis=1)
            if not outliers.any():
                break
            dropped_outlier += int(outliers.sum())
            dataset = dataset.take(np.flatnonzero(~outliers))

    report = CleanReport(dropped_missing, dropped_infinite, dropped_outlier, tuple(imputed))
    return dataset, report


# --------------------------------------------------------------------------- labels


@dataclass(frozen=True)
class LabelEncoder:
    classes: tuple[str, ...]

    @property
    def mapping(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.classes)}

    def encode(self, raw) -> np.ndarray:
        mapping = self.mapping
        try:
            return np.array([mapping[str(v)] for v in raw], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"unknown class label {exc.args[0]!r}", label=exc.args[0]) from None

    def decode(self, codes) -> list[str]:
        return [self.classes[int(i)] for i in codes]

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": "label_encoder", "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, payload: dict) -> "LabelEncoder":
        return cls(tuple(payload["classes"]))


def encode_labels(raw_labels) -> tuple[np.ndarray, LabelEncoder]:
    raw = [str(v) for v in raw_labels]
    if not raw:
        raise DataError("cannot encode an empty label list")
    encoder = LabelEncoder(tuple(sorted(set(raw))))
    return encoder.encode(raw), encoder


def encode_dataset(dataset: Dataset, encoder: LabelEncoder | None = None) -> tuple[Dataset, LabelEncoder]:
    if encoder is None:
        codes, encoder = encode_labels(dataset.labels)
    else:
        codes = encoder.encode(dataset.labels)
    return replace(dataset, labels=codes, class_names=encoder.classes), encoder


# --------------------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalerModel:
    method: str
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    minimum: np.ndarray | None = None
    maximum: np.ndarray | None = None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in a]

        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "scaler",
            "method": self.method,
            "mean": arr(self.mean),
            "std": arr(self.std),
            "min": arr(self.minimum),
            "max": arr(self.maximum),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ScalerModel":
        def arr(key):
            value = payload.get(key)
            return None if value is None else np.asarray(value, dtype=np.float64)

        return cls(payload["method"], arr("mean"), arr("std"), arr("min"), arr("max"))


def fit_scaler(dataset: Dataset | np.ndarray, method: str) -> ScalerModel:
    x = dataset.features if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)
    if method == "standardize":
        std = x.std(axis=0)
        return ScalerModel(method, mean=x.mean(axis=0), std=np.where(std > 0, std, 1.0))
    if method == "minmax_symmetric":
        return ScalerModel(method, minimum=x.min(axis=0), maximum=x.max(axis=0))
    if method == "l2_normalize":
        return ScalerModel(method)
    raise ConfigError(f"unknown scaler method {method!r}", method=method)


def _span(scaler: ScalerModel) -> np.ndarray:
    span = scaler.maximum - scaler.minimum
    return np.where(span > 0, span, 1.0)


def scale_array(scaler: ScalerModel, x: np.ndarray) -> np.ndarray:
    if scaler.method == "standardize":
        return (x - scaler.mean) / scaler.std
    if scaler.method == "minmax_symmetric":
        return 2.0 * (x - scaler.minimum) / _span(scaler) - 1.0
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms > 0, norms, 1.0)


def unscale_array(scaler: ScalerModel, x: np.ndarray) -> np.ndarray:
    if scaler.method == "standardize":
        return x * scaler.std + scaler.mean
    if scaler.method == "minmax_symmetric":
        return (x + 1.0) / 2.0 * _span(scaler) + scaler.minimum
    raise ConfigError("l2_normalize discards row norms and cannot be inverted")


def transform(scaler: ScalerModel, dataset: Dataset) -> Dataset:
    return dataset.with_features(scale_array(scaler, dataset.features))


def inverse_transform(scaler: ScalerModel, dataset: Dataset) -> Dataset:
    return dataset.with_features(unscale_array(scaler, dataset.features))


# --------------------------------------------------------------------------- splitting


def split_sizes(n_rows: int, train_parts: int = 6, test_parts: int = 1) -> tuple[int, int]:
    n_train = n_rows * train_parts // (train_parts + test_parts)
    return n_train, n_rows - n_train


def split_train_test(
    dataset: Dataset,
    train_parts: int = 6,
    test_parts: int = 1,
    seed: int = 0,
    stratified: bool = False,
) -> tuple[Dataset, Dataset]:
    """Seeded shuffle then prefix split at ``floor(n * train / (train + test))``.

    With ``stratified`` the same rule is applied inside each class and the train
    and test rows are then re-shuffled.
    """
    if train_parts <= 0 or test_parts <= 0:
        raise ConfigError("split parts must be positive")
    if dataset.n_rows == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    if not stratified:
        order = rng.permutation(dataset.n_rows)
        n_train, _ = split_sizes(dataset.n_rows, train_parts, test_parts)
        return dataset.take(order[:n_train]), dataset.take(order[n_train:])

    train_rows, test_rows = [], []
    for label in np.unique(dataset.labels):
        rows = np.flatnonzero(dataset.labels == label)
        rows = rows[rng.permutation(rows.size)]
        n_train, _ = split_sizes(rows.size, train_parts, test_parts)
        train_rows.append(rows[:n_train])
        test_rows.append(rows[n_train:])
    train_rows = np.concatenate(train_rows)
    test_rows = np.concatenate(test_rows)
    return (
        dataset.take(train_rows[rng.permutation(train_rows.size)]),
        dataset.take(test_rows[rng.permutation(test_rows.size)]),
    )

