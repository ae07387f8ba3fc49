from __future__ import annotations

import numpy as np


class GaussianNB:
    """Per-class diagonal Gaussians with empirical priors.

    Variances are floored by ``var_smoothing`` times the largest feature variance.
    """

    def __init__(self, var_smoothing=1e-9):
        self.var_smoothing = var_smoothing

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int):
        floor = self.var_smoothing * float(np.max(x.var(axis=0))) if x.size else 0.0
        if floor == 0.0:
            floor = self.var_smoothing
        self.means_ = np.zeros((n_classes, x.shape[1]))
        self.vars_ = np.ones((n_classes, x.shape[1]))
        counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        for c in range(n_classes):
            rows = x[y == c]
            if rows.shape[0]:
                self.means_[c] = rows.mean(axis=0)
                self.vars_[c] = rows.var(axis=0) + floor
        self.priors_ = counts / counts.sum()
        return self

    def joint_log_likelihood(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.priors_)
        quad = np.column_stack(
            [(((x - m) ** 2) / v).sum(axis=1) for m, v in zip(self.means_, self.vars_)]
        )
        norm = np.log(2.0 * np.pi * self.vars_).sum(axis=1)
        return log_prior[None] - 0.5 * (norm[None] + quad)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(x)
        jll = jll - jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.joint_log_likelihood(x), axis=1)

    def to_dict(self) -> dict:
        return {
            "var_smoothing": self.var_smoothing,
            "means": self.means_.tolist(),
            "vars": self.vars_.tolist(),
            "priors": self.priors_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GaussianNB":
        model = cls(payload["var_smoothing"])
        model.means_ = np.asarray(payload["means"], dtype=np.float64)
        model.vars_ = np.asarray(payload["vars"], dtype=np.float64)
        model.priors_ = np.asarray(payload["priors"], dtype=np.float64)
        return model
