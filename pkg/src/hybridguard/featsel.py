"""Mutual-information feature ranking over equal-frequency discretized columns."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hybridguard import SCHEMA_VERSION
from hybridguard.errors import ConfigError, DataError
from hybridguard.tabular import Dataset


@dataclass(frozen=True)
class BinningSpec:
    bins: int = 10
    strategy: str = "equal_frequency"

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigError("binning needs at least 2 bins", bins=self.bins)
        if self.strategy != "equal_frequency":
            raise ConfigError(f"unsupported binning strategy {self.strategy!r}")


@dataclass(frozen=True)
class FeatureRanking:
    """(feature_index, mi_nats) pairs, best first; ties go to the lower index."""

    scores: tuple[tuple[int, float], ...]
    feature_names: tuple[str, ...] = ()

    @property
    def order(self) -> list[int]:
        return [i for i, _ in self.scores]

    def to_dict(self) -> dict:
        names = self.feature_names
        return {
            "schema_version": SCHEMA_VERSION,
            "ranking": [
                {"index": i, "name": names[i] if names else str(i), "mi_nats": s}
                for i, s in self.scores
            ],
        }


def discretize(column, bins: int = 10) -> np.ndarray:
    """Map a column to integer bin codes.

    A column with at most ``bins`` distinct values keeps one code per value.
    Otherwise cut points sit at the equal-frequency quantiles of the sorted
    column, and tied values always share a bin.
    """
    column = np.asarray(column, dtype=np.float64)
    uniques, codes = np.unique(column, return_inverse=True)
    if uniques.size <= bins:
        return codes.astype(np.int64)
    ordered = np.sort(column)
    n = ordered.size
    edges = np.unique(ordered[[(i * n) // bins for i in range(1, bins)]])
    return np.searchsorted(edges, column, side="right").astype(np.int64)


def _mi_from_codes(a: np.ndarray, b: np.ndarray) -> float:
    n = a.size
    _, a = np.unique(a, return_inverse=True)
    _, b = np.unique(b, return_inverse=True)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    terms = []
    for i, j in zip(*np.nonzero(table)):
        cell = int(table[i, j])
        # integer products keep the ratio exact before the log
        terms.append((cell / n) * math.log((cell * n) / (int(row[i]) * int(col[j]))))
    return max(0.0, math.fsum(terms))


def estimate_mutual_information(feature, labels, binning: BinningSpec = BinningSpec()) -> float:
    """Mutual information in nats between a discretized feature and integer labels."""
    feature = np.asarray(feature)
    labels = np.asarray(labels)
    if feature.shape != labels.shape or feature.ndim != 1:
        raise DataError(
            "feature and labels must be 1-D and the same length",
            feature=list(feature.shape),
            labels=list(labels.shape),
        )
    if feature.size < 2:
        raise DataError("mutual information needs at least 2 rows")
    return _mi_from_codes(discretize(feature, binning.bins), labels)


def rank_features(dataset: Dataset, binning: BinningSpec = BinningSpec()) -> FeatureRanking:
    scores = [
        (j, estimate_mutual_information(dataset.features[:, j], dataset.labels, binning))
        for j in range(dataset.n_features)
    ]
    scores.sort(key=lambda pair: (-pair[1], pair[0]))
    return FeatureRanking(tuple(scores), dataset.feature_names)


def select_top_k(ranking: FeatureRanking | Sequence[int], k: int, d: int | None = None) -> list[int]:
    if k < 1:
        raise ConfigError("k must be at least 1", k=k)
    order = ranking.order if isinstance(ranking, FeatureRanking) else list(ranking)
    if d is not None:
        k = min(k, d)
    return order[:k]
