"""Dense networks with hand-written reverse mode, double backprop for the
gradient penalty, and Adam.

Only what the pipeline composes is supported: affine layers, leaky-ReLU hidden
units with optional inverted dropout, and a tanh or linear output. Everything is
float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hybridguard._io import write_atomic
from hybridguard.errors import ConfigError, DataError, NumericError

PARAMS_FORMAT_VERSION = 1
OUTPUT_ACTIVATIONS = ("tanh", "linear")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    layer_sizes: tuple[int, ...]
    output_dim: int
    output_activation: str = "linear"
    leaky_slope: float = 0.2
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if self.input_dim < 1 or self.output_dim < 1 or any(s < 1 for s in self.layer_sizes):
            raise ConfigError("layer dimensions must be positive", spec=self.to_dict())
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)", dropout_rate=self.dropout_rate)
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.output_activation!r}")

    @property
    def dims(self) -> list[int]:
        return [self.input_dim, *self.layer_sizes, self.output_dim]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) + 1

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layer_sizes": list(self.layer_sizes),
            "output_dim": self.output_dim,
            "output_activation": self.output_activation,
            "leaky_slope": self.leaky_slope,
            "dropout_rate": self.dropout_rate,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MlpSpec":
        return cls(**{**payload, "layer_sizes": tuple(payload["layer_sizes"])})


@dataclass
class MlpParams:
    """Per-layer weights (out x in) and biases (out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "MlpParams":
        return cls(list(arrays[0::2]), list(arrays[1::2]))

    def zeros_like(self) -> "MlpParams":
        return MlpParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def __add__(self, other: "MlpParams") -> "MlpParams":
        return MlpParams.from_arrays([a + b for a, b in zip(self.arrays(), other.arrays())])


@dataclass
class ForwardTrace:
    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    masks: list[np.ndarray | None]
    output: np.ndarray
    mode: str


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_params(spec: MlpSpec, seed=0) -> MlpParams:
    rng = _rng(seed)
    weights, biases = [], []
    dims = spec.dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _check_shapes(params: MlpParams, spec: MlpSpec) -> None:
    dims = spec.dims
    expected = [(o, i) for i, o in zip(dims[:-1], dims[1:])]
    actual = [w.shape for w in params.weights]
    if actual != expected or [b.shape for b in params.biases] != [(o,) for o, _ in expected]:
        raise DataError("parameter shapes do not match the network spec", expected=expected, actual=actual)


def leaky_relu(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0, a, slope * a)


def forward(
    params: MlpParams,
    spec: MlpSpec,
    batch: np.ndarray,
    mode: str = "eval",
    seed=None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network; ``mode="train"`` applies inverted dropout drawn from ``seed``."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise DataError("batch width does not match input_dim", expected=spec.input_dim, shape=list(x.shape))
    if not np.isfinite(x).all():
        raise NumericError("non-finite network input")
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown mode {mode!r}")
    dropping = mode == "train" and spec.dropout_rate > 0
    rng = _rng(seed) if dropping else None
    keep = 1.0 - spec.dropout_rate

    inputs, pre, masks = [], [], []
    h = x
    last = spec.n_layers - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        a = h @ w.T + b
        pre.append(a)
        if layer == last:
            h = np.tanh(a) if spec.output_activation == "tanh" else a
            masks.append(None)
            break
        h = leaky_relu(a, spec.leaky_slope)
        if dropping:
            mask = (rng.random(a.shape) < keep) / keep
            h = h * mask
            masks.append(mask)
        else:
            masks.append(None)
    return h, ForwardTrace(inputs, pre, masks, h, mode)


def backward(
    params: MlpParams,
    spec: MlpSpec,
    trace: ForwardTrace,
    output_gradient: np.ndarray,
) -> tuple[MlpParams, np.ndarray]:
    """Reverse-mode gradients for all weights, biases and the input batch."""
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != trace.output.shape:
        raise DataError("output gradient shape mismatch", expected=list(trace.output.shape), got=list(g.shape))
    if spec.output_activation == "tanh":
        g = g * (1.0 - trace.output**2)
    grad_w = [None] * spec.n_layers
    grad_b = [None] * spec.n_layers
    for layer in range(spec.n_layers - 1, -1, -1):
        if layer < spec.n_layers - 1:
            a = trace.pre_activations[layer]
            g = g * np.where(a > 0, 1.0, spec.leaky_slope)
            if trace.masks[layer] is not None:
                g = g * trace.masks[layer]
        grad_w[layer] = g.T @ trace.inputs[layer]
        grad_b[layer] = g.sum(axis=0)
        g = g @ params.weights[layer]
    return MlpParams(grad_w, grad_b), g


def _input_gradient_pass(params: MlpParams, spec: MlpSpec, x: np.ndarray):
    """d(output)/d(input) per row for a scalar linear-output net, plus the
    intermediate deltas and activation slopes the second-order pass reuses."""
    if spec.output_dim != 1 or spec.output_activation != "linear":
        raise ConfigError("gradient penalty needs a scalar linear-output critic")
    _, trace = forward(params, spec, x, mode="eval")
    slopes = [np.where(a > 0, 1.0, spec.leaky_slope) for a in trace.pre_activations[:-1]]
    delta = np.ones((x.shape[0], 1))
    deltas = [None] * spec.n_layers
    for layer in range(spec.n_layers - 1, -1, -1):
        deltas[layer] = delta
        g = delta @ params.weights[layer]
        if layer > 0:
            delta = g * slopes[layer - 1]
    return g, deltas, slopes


def input_gradient(params: MlpParams, spec: MlpSpec, x: np.ndarray) -> np.ndarray:
    return _input_gradient_pass(params, spec, np.asarray(x, dtype=np.float64))[0]


def penalty_param_gradient(
    params: MlpParams,
    spec: MlpSpec,
    x_hat: np.ndarray,
    lam: float,
    n_penalized: int | None = None,
) -> tuple[float, MlpParams]:
    """Gradient penalty ``lam * mean((||dD/dx|| - 1)^2)`` and its parameter gradient.

    Only the first ``n_penalized`` input columns enter the norm (the conditioning
    one-hot columns are excluded by the GAN). Dropout is not applied. The
    leaky-ReLU second derivative is zero almost everywhere, so the input gradient
    is multilinear in the weights and bias gradients vanish.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    _check_shapes(params, spec)
    n_penalized = spec.input_dim if n_penalized is None else n_penalized
    u, deltas, slopes = _input_gradient_pass(params, spec, x_hat)
    u = u[:, :n_penalized]
    norms = np.sqrt((u**2).sum(axis=1))
    gap = norms - 1.0
    value = float(lam * np.mean(gap**2))

    rows = x_hat.shape[0]
    safe = np.where(norms > 0, norms, 1.0)
    coef = np.where(norms > 0, 2.0 * lam * gap / (rows * safe), 0.0)
    g_bar = np.zeros_like(x_hat)
    g_bar[:, :n_penalized] = coef[:, None] * u

    grad_w = []
    for layer in range(spec.n_layers):
        grad_w.append(deltas[layer].T @ g_bar)
        if layer < spec.n_layers - 1:
            g_bar = (g_bar @ params.weights[layer].T) * slopes[layer]
    grad_b = [np.zeros_like(b) for b in params.biases]
    return value, MlpParams(grad_w, grad_b)


# --------------------------------------------------------------------------- Adam


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: MlpParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        zeros = [np.zeros_like(a) for a in params.arrays()]
        return cls(lr, beta1, beta2, eps, 0, zeros, [z.copy() for z in zeros])


def adam_step(state: AdamState, params: MlpParams, gradients: MlpParams) -> tuple[AdamState, MlpParams]:
    grads = gradients.arrays()
    values = params.arrays()
    if len(grads) != len(values) or any(g.shape != p.shape for g, p in zip(grads, values)):
        raise DataError("gradient shapes do not match parameters")
    if not all(np.isfinite(g).all() for g in grads):
        raise NumericError("non-finite gradient passed to Adam")
    if not state.m:
        state = AdamState.for_params(params, state.lr, state.beta1, state.beta2, state.eps)
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = [b1 * m + (1 - b1) * g for m, g in zip(state.m, grads)]
    v = [b2 * v + (1 - b2) * g * g for v, g in zip(state.v, grads)]
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    new = [p - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps) for p, mi, vi in zip(values, m, v)]
    return AdamState(state.lr, b1, b2, state.eps, t, m, v), MlpParams.from_arrays(new)


# --------------------------------------------------------------------------- persistence


def encode_params(params: MlpParams, spec: MlpSpec | None = None, extra: dict | None = None) -> bytes:
    """Length-prefixed JSON header, then little-endian float64 arrays in layer order."""
    arrays = params.arrays()
    header = {
        "format_version": PARAMS_FORMAT_VERSION,
        "spec": spec.to_dict() if spec is not None else None,
        "shapes": [list(a.shape) for a in arrays],
        **(extra or {}),
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return struct.pack("<Q", len(head)) + head + body


def decode_params(blob: bytes) -> tuple[MlpParams, MlpSpec | None, dict]:
    (n_head,) = struct.unpack_from("<Q", blob, 0)
    header = json.loads(blob[8 : 8 + n_head].decode("utf-8"))
    if header.get("format_version") != PARAMS_FORMAT_VERSION:
        raise DataError("unsupported parameter format", version=header.get("format_version"))
    offset = 8 + n_head
    arrays = []
    for shape in header["shapes"]:
        count = int(np.prod(shape)) if shape else 1
        arrays.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64))
        offset += 8 * count
    spec = MlpSpec.from_dict(header["spec"]) if header.get("spec") else None
    return MlpParams.from_arrays(arrays), spec, header


def save_params(path, params: MlpParams, spec: MlpSpec | None = None, extra: dict | None = None) -> None:
    write_atomic(path, encode_params(params, spec, extra))


def load_params(path) -> tuple[MlpParams, MlpSpec | None, dict]:
    return decode_params(Path(path).read_bytes())
