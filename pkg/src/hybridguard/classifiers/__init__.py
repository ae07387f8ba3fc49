"""Uniform classifier contract over the built-in learners and plug-in ``external`` models.

Every fitted model maps the label ids seen during training onto a compact
internal range and back, so a model trained on a subset of the classes still
reports ids and probability columns in the full ``0..C-1`` space. Classes absent
from training receive probability 0 and are never predicted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from hybridguard import SCHEMA_VERSION
from hybridguard._io import dump_json, load_json, write_atomic
from hybridguard.classifiers.bayes import GaussianNB
from hybridguard.classifiers.linear import LogisticRegression, MLPClassifier
from hybridguard.classifiers.tree import DecisionTree, RandomForest
from hybridguard.errors import ConfigError, DataError
from hybridguard.neural import decode_params, encode_params

KINDS = ("logistic_regression", "gaussian_nb", "decision_tree", "random_forest", "mlp", "external")

DEFAULTS: dict[str, dict[str, Any]] = {
    "logistic_regression": {"l2": 1e-4, "lr": 0.05, "max_iter": 500},
    "gaussian_nb": {"var_smoothing": 1e-9},
    "decision_tree": {"max_depth": None, "min_samples_split": 2, "max_features": None},
    "random_forest": {
        "n_trees": 100,
        "max_depth": None,
        "min_samples_split": 2,
        "max_features": "sqrt",
        "bootstrap": True,
    },
    "mlp": {"hidden": 64, "lr": 1e-3, "epochs": 100, "batch_size": 128, "l2": 0.0, "leaky_slope": 0.2},
    "external": {"name": None, "options": {}},
}

# name -> factory(options: dict, seed: int) returning an object with fit(X, y) and
# predict_proba(X) or predict(X)
EXTERNAL_FACTORIES: dict[str, Callable[[dict, int], Any]] = {}


def register_external(name: str, factory: Callable[[dict, int], Any]) -> None:
    EXTERNAL_FACTORIES[name] = factory


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def resolved(self) -> dict[str, Any]:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {self.kind!r}", kind=self.kind)
        unknown = sorted(set(self.hyperparameters) - set(DEFAULTS[self.kind]))
        if unknown:
            raise ConfigError(f"unknown {self.kind} hyperparameters: {unknown}", kind=self.kind, keys=unknown)
        params = {**DEFAULTS[self.kind], **self.hyperparameters}
        if self.kind == "random_forest" and int(params["n_trees"]) < 1:
            raise ConfigError("random forest needs at least one tree")
        if self.kind == "external" and params["name"] not in EXTERNAL_FACTORIES:
            raise ConfigError(
                f"no external classifier registered as {params['name']!r}",
                name=params["name"],
                registered=sorted(EXTERNAL_FACTORIES),
            )
        return params

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters), "seed": self.seed}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ClassifierSpec":
        return cls(payload["kind"], dict(payload.get("hyperparameters", {})), payload.get("seed", 0))


class _Constant:
    """Stand-in when the training labels hold a single class."""

    def predict_proba(self, x):
        return np.ones((x.shape[0], 1))


class _External:
    def __init__(self, estimator, n_classes):
        self.estimator = estimator
        self.n_classes = n_classes

    def predict_proba(self, x):
        est = self.estimator
        if hasattr(est, "predict_proba"):
            raw = np.asarray(est.predict_proba(x), dtype=np.float64)
            cols = np.asarray(getattr(est, "classes_", np.arange(raw.shape[1])), dtype=np.int64)
            out = np.zeros((x.shape[0], self.n_classes))
            out[:, cols] = raw
            return out
        pred = np.asarray(est.predict(x), dtype=np.int64)
        out = np.zeros((x.shape[0], self.n_classes))
        out[np.arange(pred.size), pred] = 1.0
        return out


def _build(kind: str, params: dict, seed: int):
    if kind == "logistic_regression":
        return LogisticRegression(params["l2"], params["lr"], params["max_iter"], seed)
    if kind == "gaussian_nb":
        return GaussianNB(params["var_smoothing"])
    if kind == "decision_tree":
        return DecisionTree(params["max_depth"], params["min_samples_split"], params["max_features"], seed)
    if kind == "random_forest":
        return RandomForest(
            params["n_trees"],
            params["max_depth"],
            params["min_samples_split"],
            params["max_features"],
            params["bootstrap"],
            seed,
        )
    if kind == "mlp":
        return MLPClassifier(
            params["hidden"], params["lr"], params["epochs"], params["batch_size"], params["l2"],
            params["leaky_slope"], seed,
        )
    raise ConfigError(f"cannot build {kind!r}")


@dataclass
class TrainedClassifier:
    spec: ClassifierSpec
    model: Any
    classes: np.ndarray  # global ids in internal column order
    n_classes: int
    n_features: int
    class_names: tuple[str, ...] = ()

    @property
    def kind(self) -> str:
        return self.spec.kind

    def _check(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise DataError(
                f"expected rows of width {self.n_features}",
                expected=self.n_features,
                shape=list(rows.shape),
            )
        return rows

    def predict_proba(self, rows) -> np.ndarray:
        rows = self._check(rows)
        if isinstance(self.model, _External):
            return self.model.predict_proba(rows)
        local = self.model.predict_proba(rows)
        out = np.zeros((rows.shape[0], self.n_classes))
        out[:, self.classes] = local
        return out

    def predict(self, rows) -> np.ndarray:
        return np.argmax(self.predict_proba(rows), axis=1)


def fit(spec: ClassifierSpec, features, labels, n_classes: int | None = None, class_names=()) -> TrainedClassifier:
    """Fit a classifier; deterministic for a given ``spec.seed``.

    A single training class (for any kind) yields a constant model that always
    predicts that class.
    """
    params = spec.resolved()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.size or y.size == 0:
        raise DataError("fit needs a non-empty 2-D feature matrix with one label per row")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError("label outside 0..n_classes-1")
    classes = np.unique(y)
    local = np.searchsorted(classes, y)

    if spec.kind == "external":
        estimator = EXTERNAL_FACTORIES[params["name"]](dict(params["options"]), spec.seed)
        estimator.fit(x, y)
        model = _External(estimator, n_classes)
    elif classes.size == 1:
        model = _Constant()
    else:
        model = _build(spec.kind, params, spec.seed).fit(x, local, classes.size)
    return TrainedClassifier(spec, model, classes, n_classes, x.shape[1], tuple(class_names))


def predict(model: TrainedClassifier, rows) -> np.ndarray:
    return model.predict(rows)


def predict_proba(model: TrainedClassifier, rows) -> np.ndarray:
    return model.predict_proba(rows)


# --------------------------------------------------------------------------- persistence


def save_classifier(model: TrainedClassifier, path) -> None:
    """JSON envelope at ``path``; neural learners add a ``.params`` sidecar."""
    path = Path(path)
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "kind": model.kind,
        "spec": model.spec.to_dict(),
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "class_names": list(model.class_names),
        "classes": model.classes.tolist(),
    }
    inner = model.model
    if isinstance(inner, _External):
        raise ConfigError("external classifiers are not serializable")
    if isinstance(inner, _Constant):
        envelope["state"] = {"constant": True}
    elif isinstance(inner, (LogisticRegression, MLPClassifier)):
        sidecar = path.with_suffix(".params")
        write_atomic(sidecar, encode_params(inner.params, inner.spec))
        envelope["state"] = {"params": sidecar.name}
    else:
        envelope["state"] = inner.to_dict()
    dump_json(envelope, path)


def load_classifier(path) -> TrainedClassifier:
    path = Path(path)
    env = load_json(path)
    spec = ClassifierSpec.from_dict(env["spec"])
    state = env["state"]
    if state.get("constant"):
        inner = _Constant()
    elif "params" in state:
        params, net_spec, _ = decode_params((path.parent / state["params"]).read_bytes())
        inner = (LogisticRegression if spec.kind == "logistic_regression" else MLPClassifier)()
        inner.spec, inner.params = net_spec, params
    else:
        inner = {"gaussian_nb": GaussianNB, "decision_tree": DecisionTree, "random_forest": RandomForest}[
            spec.kind
        ].from_dict(state)
    return TrainedClassifier(
        spec,
        inner,
        np.asarray(env["classes"], dtype=np.int64),
        env["n_classes"],
        env["n_features"],
        tuple(env["class_names"]),
    )


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: int | str | None = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be at least 1", n_trees=self.n_trees)

    def to_spec(self) -> ClassifierSpec:
        hyper = {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
        }
        return ClassifierSpec("random_forest", hyper, self.seed)
