"""Seeded synthetic datasets shared by several test modules."""

import csv

import numpy as np

from hybridguard.tabular import Dataset

IMBALANCED_CLASSES = ("normal", "major_a", "major_b", "minor_c", "minor_d")
IMBALANCED_SIZES = (5000, 1000, 1000, 50, 50)


def imbalanced(seed=11, d=10, sep=3.0, sizes=IMBALANCED_SIZES):
    """One normal class, two major and two minor Gaussian classes (unit variance).

    Majors sit 4 units out along dims 0 and 1; each minor class is shifted by
    ``sep`` along its own pair of dims (2-3 and 4-5), so it is separable from
    normal only with enough samples.
    """
    rng = np.random.default_rng(seed)
    means = np.zeros((5, d))
    means[1, 0] = 4
    means[2, 1] = 4
    means[3, [2, 3]] = sep
    means[4, [4, 5]] = sep
    x = np.vstack([rng.normal(means[c], 1.0, size=(n, d)) for c, n in enumerate(sizes)])
    y = np.repeat(np.arange(5), sizes)
    return Dataset(x, y, tuple(f"f{i}" for i in range(d)), IMBALANCED_CLASSES)


def gaussian_toy(seed=7):
    """The three-class, two-feature toy set for the GAN recovery check."""
    rng = np.random.default_rng(seed)
    means = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    sizes = (900, 600, 500)
    x = np.vstack([rng.normal(m, 1.0, size=(n, 2)) for m, n in zip(means, sizes)])
    y = np.repeat(np.arange(3), sizes)
    return Dataset(x, y, ("x0", "x1"), ("a", "b", "c"))


def write_csv(dataset: Dataset, path, label_column="label", decimals=6):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([*dataset.feature_names, label_column])
        names = dataset.class_names
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([*(f"{v:.{decimals}f}" for v in row), names[label] if names else label])
