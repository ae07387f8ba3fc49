"""Two-phase detector.

Phase 1 fits any classifier on all classes over the top-k mutual-information
features. A Phase-1 prediction in a major class is final; every other row is
re-labelled by a random forest trained on the normal and minor classes only,
over its own top-k features and after random downsampling of the frequent
classes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from hybridguard import SCHEMA_VERSION
from hybridguard._io import dump_json, load_json
from hybridguard.classifiers import (
    ClassifierSpec,
    ForestConfig,
    TrainedClassifier,
    fit,
    load_classifier,
    save_classifier,
)
from hybridguard.errors import ConfigError, DataError
from hybridguard.featsel import BinningSpec, rank_features, select_top_k
from hybridguard.metrics import EvaluationReport, evaluate
from hybridguard.presets import COMBINATIONS
from hybridguard.tabular import Dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassPartition:
    normal_class: int
    major_classes: frozenset[int]
    minor_classes: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "major_classes", frozenset(int(c) for c in self.major_classes))
        object.__setattr__(self, "minor_classes", frozenset(int(c) for c in self.minor_classes))
        if self.major_classes & self.minor_classes or self.normal_class in self.major_classes | self.minor_classes:
            raise ConfigError("normal, major and minor class sets must be disjoint")

    @property
    def group2_classes(self) -> frozenset[int]:
        return self.minor_classes | {self.normal_class}

    def covers(self, n_classes: int) -> bool:
        return self.major_classes | self.group2_classes == set(range(n_classes))

    def to_dict(self, class_names=None) -> dict:
        def name(c):
            return class_names[c] if class_names else c

        return {
            "normal": name(self.normal_class),
            "major": [name(c) for c in sorted(self.major_classes)],
            "minor": [name(c) for c in sorted(self.minor_classes)],
        }


def partition_classes(
    dataset: Dataset,
    explicit: Mapping | None = None,
    threshold: float | None = None,
    normal: str | int | None = None,
) -> ClassPartition:
    """Build the partition from explicit class-name lists or a frequency threshold.

    With ``threshold`` every attack class whose training count is below
    ``threshold * (largest attack-class count)`` is minor; ``normal`` names the
    benign class.
    """
    names = dataset.class_names
    if dataset.n_classes < 2:
        raise DataError("partitioning needs at least two classes")
    index = {n: i for i, n in enumerate(names)}

    def resolve(value):
        if isinstance(value, (int, np.integer)):
            return int(value)
        if value not in index:
            raise ConfigError(f"partition names unknown class {value!r}", label=value)
        return index[value]

    if explicit is not None:
        part = ClassPartition(
            resolve(explicit["normal"]),
            frozenset(resolve(v) for v in explicit.get("major", ())),
            frozenset(resolve(v) for v in explicit.get("minor", ())),
        )
        if not part.covers(dataset.n_classes):
            missing = sorted(set(range(dataset.n_classes)) - part.major_classes - part.group2_classes)
            raise ConfigError(
                "partition does not cover every class",
                missing=[names[c] for c in missing],
            )
        return part
    if threshold is None or normal is None:
        raise ConfigError("partition needs explicit lists or both threshold and normal class")
    normal_id = resolve(normal)
    counts = dataset.class_counts()
    attacks = [c for c in range(dataset.n_classes) if c != normal_id]
    cap = max(counts[c] for c in attacks)
    minor = frozenset(c for c in attacks if counts[c] < threshold * cap)
    return ClassPartition(normal_id, frozenset(attacks) - minor, minor)


def downsample_majority(group2: Dataset, minor_classes, seed=0) -> Dataset:
    """Randomly subsample (without replacement) every class larger than the
    largest minor class down to that size; row order is otherwise preserved."""
    minor_classes = sorted(int(c) for c in minor_classes)
    counts = group2.class_counts()
    present = [c for c in minor_classes if counts[c] > 0]
    if not present:
        return group2
    cap = max(counts[c] for c in present)
    rng = np.random.default_rng(seed)
    keep = []
    for c in range(group2.n_classes):
        rows = np.flatnonzero(group2.labels == c)
        if rows.size > cap:
            rows = rng.choice(rows, size=cap, replace=False)
        keep.append(rows)
    return group2.take(np.sort(np.concatenate(keep)))


@dataclass
class PhaseModel:
    classifier: TrainedClassifier
    features: list[int]

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return self.classifier.predict(rows[:, self.features])


@dataclass
class DualNetModel:
    partition: ClassPartition
    phase1: PhaseModel
    phase2: PhaseModel
    n_features: int
    class_names: tuple[str, ...]
    trust_phase1_minor: bool = False
    degenerate: bool = False
    settings: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.settings, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def predict(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise DataError(f"expected rows of width {self.n_features}", shape=list(rows.shape))
        first = self.phase1.predict(rows)
        terminal = set(self.partition.major_classes)
        if self.trust_phase1_minor:
            terminal |= self.partition.minor_classes
        routed = ~np.isin(first, sorted(terminal))
        final = first.copy()
        if routed.any():
            final[routed] = self.phase2.predict(rows[routed])
        return final

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_classifier(self.phase1.classifier, directory / "phase1.json")
        save_classifier(self.phase2.classifier, directory / "phase2.json")
        dump_json(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "dualnet",
                "partition": self.partition.to_dict(),
                "phase1": {"model": "phase1.json", "features": self.phase1.features},
                "phase2": {"model": "phase2.json", "features": self.phase2.features},
                "n_features": self.n_features,
                "class_names": list(self.class_names),
                "trust_phase1_minor": self.trust_phase1_minor,
                "degenerate": self.degenerate,
                "settings": self.settings,
                "fingerprint": self.fingerprint,
            },
            directory / "dualnet.json",
        )

    @classmethod
    def load(cls, directory) -> "DualNetModel":
        directory = Path(directory)
        env = load_json(directory / "dualnet.json")
        part = env["partition"]
        return cls(
            ClassPartition(part["normal"], frozenset(part["major"]), frozenset(part["minor"])),
            PhaseModel(load_classifier(directory / env["phase1"]["model"]), env["phase1"]["features"]),
            PhaseModel(load_classifier(directory / env["phase2"]["model"]), env["phase2"]["features"]),
            env["n_features"],
            tuple(env["class_names"]),
            env["trust_phase1_minor"],
            env["degenerate"],
            env["settings"],
        )


def train_dualnet(
    train_dataset: Dataset,
    partition: ClassPartition,
    phase1_spec: ClassifierSpec,
    forest_config: ForestConfig = ForestConfig(),
    k_features: int = 30,
    binning: BinningSpec = BinningSpec(),
    downsample_seed: int = 0,
    rank_after_downsample: bool = False,
    trust_phase1_minor: bool = False,
    phase2: PhaseModel | None = None,
) -> DualNetModel:
    """Fit both phases. Pass ``phase2`` to reuse a forest already fitted with the
    same training rows, partition and forest settings; it does not depend on the
    Phase-1 learner."""
    if k_features < 1:
        raise ConfigError("k_features must be at least 1", k=k_features)
    d = train_dataset.n_features
    n_classes = train_dataset.n_classes

    f1 = select_top_k(rank_features(train_dataset, binning), k_features, d)
    phase1 = fit(phase1_spec, train_dataset.features[:, f1], train_dataset.labels, n_classes, train_dataset.class_names)

    in_group2 = np.isin(train_dataset.labels, sorted(partition.group2_classes))
    group2 = train_dataset.take(np.flatnonzero(in_group2))
    if group2.n_rows == 0:
        raise DataError("no normal or minor-class rows for the second phase")
    degenerate = not np.isin(group2.labels, sorted(partition.minor_classes)).any()
    if degenerate:
        log.warning("no minor-class training rows; the second phase can only answer the normal class")
    if phase2 is None:
        balanced = downsample_majority(group2, partition.minor_classes, downsample_seed)
        f2 = select_top_k(rank_features(balanced if rank_after_downsample else group2, binning), k_features, d)
        forest = fit(forest_config.to_spec(), balanced.features[:, f2], balanced.labels, n_classes, train_dataset.class_names)
        phase2 = PhaseModel(forest, f2)

    settings = {
        "phase1": phase1_spec.to_dict(),
        "forest": forest_config.to_spec().to_dict(),
        "k_features": k_features,
        "bins": binning.bins,
        "downsample_seed": downsample_seed,
        "rank_after_downsample": rank_after_downsample,
        "trust_phase1_minor": trust_phase1_minor,
    }
    return DualNetModel(
        partition,
        PhaseModel(phase1, f1),
        phase2,
        d,
        train_dataset.class_names,
        trust_phase1_minor,
        degenerate,
        settings,
    )


# --------------------------------------------------------------------------- combinations


def combination_spec(name: str, seed: int = 0, hyperparameters: Mapping | None = None) -> ClassifierSpec:
    """Phase-1 spec for a combination name ``M1``..``M10``."""
    if name not in COMBINATIONS:
        raise ConfigError(f"unknown combination {name!r}", name=name, known=list(COMBINATIONS))
    kind, external = COMBINATIONS[name]
    hyper = dict(hyperparameters or {})
    if kind == "external":
        hyper.setdefault("name", external)
    return ClassifierSpec(kind, hyper, seed)


@dataclass
class CombinationResult:
    name: str
    accuracy: float
    macro_f1: float
    far: float
    report: EvaluationReport | None = None

    @classmethod
    def from_report(cls, name: str, report: EvaluationReport) -> "CombinationResult":
        return cls(name, report.multiclass_accuracy, report.macro_f1, report.binary.far, report)


def _name_key(name: str):
    digits = name[1:]
    return (0, int(digits), name) if name[:1] == "M" and digits.isdigit() else (1, 0, name)


def select_best(results: Sequence[CombinationResult]) -> CombinationResult:
    """Highest accuracy, then highest macro-F1, then lowest FAR, then name order."""
    if not results:
        raise ConfigError("no combination results to choose from")
    return min(results, key=lambda r: (-r.accuracy, -r.macro_f1, r.far, _name_key(r.name)))


def evaluate_combinations(
    train: Dataset,
    test: Dataset,
    combinations: Mapping[str, ClassifierSpec] | Sequence[str],
    partition: ClassPartition,
    forest_config: ForestConfig = ForestConfig(),
    k_features: int = 30,
    seed: int = 0,
    **train_options,
) -> tuple[list[CombinationResult], dict[str, DualNetModel]]:
    """Train one detector per combination and score it on ``test``."""
    if not isinstance(combinations, Mapping):
        combinations = {name: combination_spec(name, seed) for name in combinations}
    if not combinations:
        raise ConfigError("no combinations configured")
    results, models = [], {}
    shared = None
    for name, spec in combinations.items():
        model = train_dualnet(
            train, partition, spec, forest_config, k_features, downsample_seed=seed, phase2=shared, **train_options
        )
        shared = model.phase2
        pred = model.predict(test.features)
        report = evaluate(test.labels, pred, test.n_classes, partition.normal_class, test.class_names)
        results.append(CombinationResult.from_report(name, report))
        models[name] = model
        log.info("%s accuracy %.4f macro-F1 %.4f FAR %.4f", name, report.multiclass_accuracy, report.macro_f1, report.binary.far)
    return results, models
