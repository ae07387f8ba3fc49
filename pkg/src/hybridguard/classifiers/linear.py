"""Softmax models trained with the in-house network engine: multinomial
logistic regression and a one-hidden-layer MLP."""

from __future__ import annotations

import numpy as np

from hybridguard.neural import AdamState, MlpParams, MlpSpec, adam_step, backward, forward, init_params


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy_grad(params, spec, x, y, l2, mode="eval", seed=None):
    logits, trace = forward(params, spec, x, mode, seed)
    p = softmax(logits)
    p[np.arange(y.size), y] -= 1.0
    grads, _ = backward(params, spec, trace, p / y.size)
    if l2:
        grads = MlpParams([g + l2 * w for g, w in zip(grads.weights, params.weights)], grads.biases)
    return grads


class SoftmaxNetwork:
    """Shared fit/predict for softmax-output networks built on :mod:`hybridguard.neural`."""

    def __init__(self, spec: MlpSpec | None = None, params: MlpParams | None = None):
        self.spec = spec
        self.params = params

    def logits(self, x: np.ndarray) -> np.ndarray:
        return forward(self.params, self.spec, x, "eval")[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)


class LogisticRegression(SoftmaxNetwork):
    """Multinomial logistic regression, full-batch Adam on cross-entropy + L2."""

    def __init__(self, l2=1e-4, lr=0.05, max_iter=500, seed=0):
        super().__init__()
        self.l2, self.lr, self.max_iter, self.seed = l2, lr, max_iter, seed

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int):
        self.spec = MlpSpec(x.shape[1], (), n_classes, "linear")
        params = MlpParams([np.zeros((n_classes, x.shape[1]))], [np.zeros(n_classes)])
        opt = AdamState.for_params(params, lr=self.lr)
        for _ in range(self.max_iter):
            grads = _cross_entropy_grad(params, self.spec, x, y, self.l2)
            opt, params = adam_step(opt, params, grads)
        self.params = params
        return self


class MLPClassifier(SoftmaxNetwork):
    """One leaky-ReLU hidden layer and a softmax output, minibatch Adam."""

    def __init__(self, hidden=64, lr=1e-3, epochs=100, batch_size=128, l2=0.0, leaky_slope=0.2, seed=0):
        super().__init__()
        self.hidden, self.lr, self.epochs = hidden, lr, epochs
        self.batch_size, self.l2, self.leaky_slope, self.seed = batch_size, l2, leaky_slope, seed

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int):
        self.spec = MlpSpec(x.shape[1], (self.hidden,), n_classes, "linear", self.leaky_slope)
        rng = np.random.default_rng(self.seed)
        params = init_params(self.spec, rng)
        opt = AdamState.for_params(params, lr=self.lr)
        batch = min(self.batch_size, y.size)
        for _ in range(self.epochs):
            order = rng.permutation(y.size)
            for start in range(0, y.size, batch):
                rows = order[start : start + batch]
                grads = _cross_entropy_grad(params, self.spec, x[rows], y[rows], self.l2)
                opt, params = adam_step(opt, params, grads)
        self.params = params
        return self
