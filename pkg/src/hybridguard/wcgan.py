"""Conditional Wasserstein GAN with gradient penalty for minority-class synthesis.

Labels condition both networks by one-hot concatenation: the generator sees
``[z, onehot(y)]`` and the critic sees ``[x, onehot(y)]``. Features are mapped to
[-1, 1] with a min-max scaler fitted on the training rows so the tanh output
covers the data range.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from hybridguard import SCHEMA_VERSION
from hybridguard._io import dump_json, load_json, write_atomic
from hybridguard.errors import ConfigError, DataError
from hybridguard.neural import (
    AdamState,
    MlpParams,
    MlpSpec,
    adam_step,
    backward,
    decode_params,
    encode_params,
    forward,
    init_params,
    load_params,
    penalty_param_gradient,
    save_params,
)
from hybridguard.tabular import Dataset, ScalerModel, concat, fit_scaler, scale_array, unscale_array

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GanConfig:
    latent_dim: int = 64
    batch_size: int = 128
    n_critic: int = 5
    gp_lambda: float = 10.0
    epochs: int = 1000
    generator_layers: tuple[int, ...] = (256, 512, 1024)
    critic_layers: tuple[int, ...] = (1024, 512, 256)
    generator_dropout: float = 0.3
    critic_dropout: float = 0.3
    leaky_slope: float = 0.2
    generator_lr: float = 1e-4
    generator_beta1: float = 0.5
    generator_beta2: float = 0.9
    critic_lr: float = 1e-4
    critic_beta1: float = 0.5
    critic_beta2: float = 0.9
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "generator_layers", tuple(self.generator_layers))
        object.__setattr__(self, "critic_layers", tuple(self.critic_layers))
        positive = ("latent_dim", "batch_size", "n_critic", "generator_lr", "critic_lr")
        bad = [name for name in positive if not getattr(self, name) > 0]
        if self.epochs < 0:
            bad.append("epochs")
        if self.gp_lambda < 0:
            bad.append("gp_lambda")
        if bad:
            raise ConfigError(f"invalid GAN settings: {bad}", fields=bad)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["generator_layers"] = list(self.generator_layers)
        out["critic_layers"] = list(self.critic_layers)
        return out

    @classmethod
    def from_dict(cls, payload: Mapping) -> "GanConfig":
        return cls(**payload)


@dataclass(frozen=True)
class ConditionedBatch:
    samples: np.ndarray
    labels_onehot: np.ndarray

    def __post_init__(self):
        if self.samples.shape[0] != self.labels_onehot.shape[0]:
            raise DataError("samples and labels have different row counts")

    @property
    def stacked(self) -> np.ndarray:
        return np.hstack([self.samples, self.labels_onehot])

    @property
    def rows(self) -> int:
        return self.samples.shape[0]


@dataclass
class Network:
    spec: MlpSpec
    params: MlpParams

    def __call__(self, x: np.ndarray, mode: str = "eval", seed=None) -> np.ndarray:
        return forward(self.params, self.spec, x, mode, seed)[0]


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


# --------------------------------------------------------------------------- losses


def wasserstein_critic_loss(real_scores, fake_scores, penalty: float = 0.0) -> float:
    return float(-np.mean(real_scores) + np.mean(fake_scores) + penalty)


def wasserstein_generator_loss(fake_scores) -> float:
    return float(-np.mean(fake_scores))


def interpolate(real_rows, fake_rows, seed=None, eps=None) -> np.ndarray:
    """Per-row convex combination ``eps * real + (1 - eps) * fake``, eps ~ U[0, 1]."""
    real_rows = np.asarray(real_rows, dtype=np.float64)
    fake_rows = np.asarray(fake_rows, dtype=np.float64)
    if real_rows.shape != fake_rows.shape:
        raise DataError("real and fake batches differ in shape")
    if eps is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        eps = rng.random(real_rows.shape[0])
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (real_rows.shape[0],))[:, None]
    return eps * real_rows + (1.0 - eps) * fake_rows


def gradient_penalty(critic: Network, x_hat: ConditionedBatch, lam: float) -> tuple[float, MlpParams]:
    return penalty_param_gradient(critic.params, critic.spec, x_hat.stacked, lam, x_hat.samples.shape[1])


def critic_loss(
    critic: Network,
    real: ConditionedBatch,
    fake: ConditionedBatch,
    lam: float,
    seed=None,
    eps=None,
    mode: str = "eval",
    penalty_hook=None,
) -> tuple[float, dict]:
    """Critic objective: ``-mean D(x|y) + mean D(x~|y) + lam * GP``.

    ``penalty_hook(critic, x_hat, lam)`` can replace :func:`gradient_penalty`.
    The penalty is evaluated on interpolates that carry the real rows' labels.
    """
    if real.samples.shape != fake.samples.shape:
        raise DataError("real and fake batches must have the same shape")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    real_scores = critic(real.stacked, mode, rng)
    fake_scores = critic(fake.stacked, mode, rng)
    penalty = 0.0
    if lam:
        x_hat = ConditionedBatch(interpolate(real.samples, fake.samples, rng, eps), real.labels_onehot)
        penalty = (penalty_hook or gradient_penalty)(critic, x_hat, lam)[0]
    terms = {
        "real_term": float(-np.mean(real_scores)),
        "fake_term": float(np.mean(fake_scores)),
        "penalty": float(penalty),
    }
    return wasserstein_critic_loss(real_scores, fake_scores, penalty), terms


def generator_loss(critic: Network, fake: ConditionedBatch, mode: str = "eval", seed=None) -> float:
    return wasserstein_generator_loss(critic(fake.stacked, mode, seed))


# --------------------------------------------------------------------------- models


@dataclass
class TrainedGan:
    generator: Network
    critic: Network
    n_classes: int
    scaler: ScalerModel
    config: GanConfig
    feature_names: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return self.generator.spec.output_dim

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_params(directory / "generator.params", self.generator.params, self.generator.spec)
        save_params(directory / "critic.params", self.critic.params, self.critic.spec)
        dump_json(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "trained_gan",
                "config": self.config.to_dict(),
                "n_classes": self.n_classes,
                "class_names": list(self.class_names),
                "feature_names": list(self.feature_names),
                "scaler": self.scaler.to_dict(),
                "generator": "generator.params",
                "critic": "critic.params",
                "noise": "standard_normal",
                "conditioning": "onehot_concat",
            },
            directory / "gan.json",
        )

    @classmethod
    def load(cls, directory) -> "TrainedGan":
        directory = Path(directory)
        env = load_json(directory / "gan.json")
        g_params, g_spec, _ = load_params(directory / env["generator"])
        c_params, c_spec, _ = load_params(directory / env["critic"])
        return cls(
            Network(g_spec, g_params),
            Network(c_spec, c_params),
            env["n_classes"],
            ScalerModel.from_dict(env["scaler"]),
            GanConfig.from_dict(env["config"]),
            tuple(env["feature_names"]),
            tuple(env["class_names"]),
        )


@dataclass
class TrainLog:
    steps: list[tuple[int, str, int, float]] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {"critic": 0, "generator": 0}
        for _, kind, _, _ in self.steps:
            out[kind] += 1
        return out

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["epoch", "step_kind", "step_index", "loss"])
        for epoch, kind, index, loss in self.steps:
            writer.writerow([epoch, kind, index, repr(loss)])
        return buffer.getvalue()

    def epochs_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["epoch", "critic_loss_mean", "generator_loss_mean"])
        for row in self.epochs:
            writer.writerow([row["epoch"], repr(row["critic_loss_mean"]), repr(row["generator_loss_mean"])])
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainLog":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        steps = [(int(e), k, int(i), float(l)) for e, k, i, l in rows]
        return cls(steps, _epoch_summary(steps))


def _epoch_summary(steps) -> list[dict]:
    grouped: dict[int, dict[str, list[float]]] = {}
    for epoch, kind, _, loss in steps:
        grouped.setdefault(epoch, {"critic": [], "generator": []})[kind].append(loss)
    return [
        {
            "epoch": epoch,
            "critic_loss_mean": float(np.mean(v["critic"])) if v["critic"] else 0.0,
            "generator_loss_mean": float(np.mean(v["generator"])) if v["generator"] else 0.0,
            "wall_time": 0.0,
        }
        for epoch, v in sorted(grouped.items())
    ]


def _networks(config: GanConfig, n_features: int, n_classes: int) -> tuple[MlpSpec, MlpSpec]:
    g_spec = MlpSpec(
        config.latent_dim + n_classes,
        config.generator_layers,
        n_features,
        "tanh",
        config.leaky_slope,
        config.generator_dropout,
    )
    c_spec = MlpSpec(
        n_features + n_classes,
        config.critic_layers,
        1,
        "linear",
        config.leaky_slope,
        config.critic_dropout,
    )
    return g_spec, c_spec


@dataclass
class _TrainState:
    generator: MlpParams
    critic: MlpParams
    g_opt: AdamState
    c_opt: AdamState
    epoch: int
    log: TrainLog


def _save_checkpoint(path: Path, state: _TrainState, g_spec: MlpSpec, c_spec: MlpSpec) -> None:
    path.mkdir(parents=True, exist_ok=True)
    save_params(path / "generator.params", state.generator, g_spec)
    save_params(path / "critic.params", state.critic, c_spec)
    for name, opt, like in (("g", state.g_opt, state.generator), ("c", state.c_opt, state.critic)):
        hyper = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps, "t": opt.t}
        m = MlpParams.from_arrays(opt.m) if opt.m else like.zeros_like()
        v = MlpParams.from_arrays(opt.v) if opt.v else like.zeros_like()
        write_atomic(path / f"adam_{name}_m.params", encode_params(m, extra={"adam": hyper}))
        write_atomic(path / f"adam_{name}_v.params", encode_params(v))
    write_atomic(path / "log.csv", state.log.to_csv())
    dump_json({"schema_version": SCHEMA_VERSION, "epoch": state.epoch}, path / "checkpoint.json")


def _load_checkpoint(path: Path) -> _TrainState:
    generator, _, _ = load_params(path / "generator.params")
    critic, _, _ = load_params(path / "critic.params")
    opts = []
    for name in ("g", "c"):
        m, _, header = decode_params((path / f"adam_{name}_m.params").read_bytes())
        v, _, _ = decode_params((path / f"adam_{name}_v.params").read_bytes())
        hyper = header["adam"]
        opts.append(
            AdamState(hyper["lr"], hyper["beta1"], hyper["beta2"], hyper["eps"], hyper["t"], m.arrays(), v.arrays())
        )
    log_ = TrainLog.from_csv((path / "log.csv").read_text(encoding="utf-8"))
    epoch = load_json(path / "checkpoint.json")["epoch"]
    return _TrainState(generator, critic, opts[0], opts[1], epoch, log_)


def train(
    config: GanConfig,
    train_dataset: Dataset,
    target_classes: Sequence[int] | None = None,
    checkpoint_dir=None,
    checkpoint_every: int = 50,
    resume: bool = False,
) -> tuple[TrainedGan, TrainLog]:
    """Alternate ``n_critic`` critic updates with one generator update per minibatch.

    Each epoch shuffles the rows and visits ``rows // batch_size`` minibatches. All
    randomness in epoch ``e`` comes from a generator seeded by ``(seed, e)``, so a
    run resumed from a checkpoint matches an uninterrupted one bit for bit.
    """
    if not train_dataset.is_encoded:
        raise DataError("GAN training needs encoded labels")
    n_classes = train_dataset.n_classes
    data = train_dataset
    if target_classes is not None:
        wanted = np.isin(data.labels, np.asarray(list(target_classes), dtype=np.int64))
        data = data.take(np.flatnonzero(wanted))
    if data.n_rows < config.batch_size:
        raise DataError(
            f"{data.n_rows} training rows is fewer than batch_size={config.batch_size}; use a smaller batch",
            rows=data.n_rows,
            batch_size=config.batch_size,
        )

    scaler = fit_scaler(data, "minmax_symmetric")
    x_all = scale_array(scaler, data.features)
    y_all = one_hot(data.labels, n_classes)
    d = data.n_features
    g_spec, c_spec = _networks(config, d, n_classes)

    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if resume and checkpoint_dir is not None and (checkpoint_dir / "checkpoint.json").exists():
        state = _load_checkpoint(checkpoint_dir)
        log.info("resuming GAN training at epoch %d", state.epoch)
    else:
        g_params = init_params(g_spec, np.random.default_rng([config.seed, 0]))
        c_params = init_params(c_spec, np.random.default_rng([config.seed, 1]))
        state = _TrainState(
            g_params,
            c_params,
            AdamState.for_params(g_params, config.generator_lr, config.generator_beta1, config.generator_beta2),
            AdamState.for_params(c_params, config.critic_lr, config.critic_beta1, config.critic_beta2),
            0,
            TrainLog(),
        )

    m = config.batch_size
    n_batches = data.n_rows // m
    while state.epoch < config.epochs:
        epoch = state.epoch
        started = time.perf_counter()
        rng = np.random.default_rng([config.seed, 2, epoch])
        order = rng.permutation(data.n_rows)
        c_losses, g_losses = [], []
        for b in range(n_batches):
            rows = order[b * m : (b + 1) * m]
            real = ConditionedBatch(x_all[rows], y_all[rows])
            for _ in range(config.n_critic):
                loss = _critic_update(state, g_spec, c_spec, real, config, rng)
                state.log.steps.append((epoch, "critic", len(c_losses), loss))
                c_losses.append(loss)
            loss = _generator_update(state, g_spec, c_spec, real.labels_onehot, config, rng)
            state.log.steps.append((epoch, "generator", len(g_losses), loss))
            g_losses.append(loss)
        state.epoch += 1
        state.log.epochs.append(
            {
                "epoch": epoch,
                "critic_loss_mean": float(np.mean(c_losses)) if c_losses else 0.0,
                "generator_loss_mean": float(np.mean(g_losses)) if g_losses else 0.0,
                "wall_time": time.perf_counter() - started,
            }
        )
        log.debug("epoch %d critic %.4f generator %.4f", epoch, *(state.log.epochs[-1][k] for k in ("critic_loss_mean", "generator_loss_mean")))
        if checkpoint_dir is not None and checkpoint_every and state.epoch % checkpoint_every == 0:
            _save_checkpoint(checkpoint_dir, state, g_spec, c_spec)

    gan = TrainedGan(
        Network(g_spec, state.generator),
        Network(c_spec, state.critic),
        n_classes,
        scaler,
        config,
        train_dataset.feature_names,
        train_dataset.class_names,
    )
    return gan, state.log


def _generate(g_params: MlpParams, g_spec: MlpSpec, onehot: np.ndarray, latent_dim: int, rng, mode: str):
    z = rng.standard_normal((onehot.shape[0], latent_dim))
    return forward(g_params, g_spec, np.hstack([z, onehot]), mode, rng)


def _critic_update(state: _TrainState, g_spec, c_spec, real: ConditionedBatch, config: GanConfig, rng) -> float:
    fake_x, _ = _generate(state.generator, g_spec, real.labels_onehot, config.latent_dim, rng, "train")
    fake = ConditionedBatch(fake_x, real.labels_onehot)
    rows = real.rows
    real_out, real_trace = forward(state.critic, c_spec, real.stacked, "train", rng)
    fake_out, fake_trace = forward(state.critic, c_spec, fake.stacked, "train", rng)
    grads_real, _ = backward(state.critic, c_spec, real_trace, np.full((rows, 1), -1.0 / rows))
    grads_fake, _ = backward(state.critic, c_spec, fake_trace, np.full((rows, 1), 1.0 / rows))
    grads = grads_real + grads_fake
    penalty = 0.0
    if config.gp_lambda:
        x_hat = np.hstack([interpolate(real.samples, fake.samples, rng), real.labels_onehot])
        penalty, grads_pen = penalty_param_gradient(
            state.critic, c_spec, x_hat, config.gp_lambda, real.samples.shape[1]
        )
        grads = grads + grads_pen
    state.c_opt, state.critic = adam_step(state.c_opt, state.critic, grads)
    return wasserstein_critic_loss(real_out, fake_out, penalty)


def _generator_update(state: _TrainState, g_spec, c_spec, onehot: np.ndarray, config: GanConfig, rng) -> float:
    fake_x, g_trace = _generate(state.generator, g_spec, onehot, config.latent_dim, rng, "train")
    scores, c_trace = forward(state.critic, c_spec, np.hstack([fake_x, onehot]), "train", rng)
    rows = onehot.shape[0]
    _, input_grad = backward(state.critic, c_spec, c_trace, np.full((rows, 1), -1.0 / rows))
    g_grads, _ = backward(state.generator, g_spec, g_trace, input_grad[:, : g_spec.output_dim])
    state.g_opt, state.generator = adam_step(state.g_opt, state.generator, g_grads)
    return wasserstein_generator_loss(scores)


# --------------------------------------------------------------------------- synthesis


def sample_synthetic(gan: TrainedGan, class_id: int, count: int, seed=0) -> Dataset:
    """Draw ``count`` rows of class ``class_id`` in the original feature units."""
    if not 0 <= class_id < gan.n_classes:
        raise DataError(f"class id {class_id} outside 0..{gan.n_classes - 1}", class_id=class_id)
    if count < 0:
        raise DataError("count must be non-negative", count=count)
    rng = np.random.default_rng(seed)
    onehot = one_hot(np.full(count, class_id), gan.n_classes)
    if count:
        scaled, _ = _generate(gan.generator.params, gan.generator.spec, onehot, gan.config.latent_dim, rng, "eval")
        features = unscale_array(gan.scaler, scaled)
    else:
        features = np.empty((0, gan.n_features))
    names = gan.feature_names or tuple(f"f{i}" for i in range(gan.n_features))
    classes = gan.class_names or tuple(str(i) for i in range(gan.n_classes))
    return Dataset(features, np.full(count, class_id, dtype=np.int64), names, classes)


@dataclass(frozen=True)
class AugmentationPlan:
    """Synthetic row count per class id."""

    counts: Mapping[int, int]

    def __post_init__(self):
        bad = {c: n for c, n in self.counts.items() if n < 0}
        if bad:
            raise ConfigError("synthetic counts must be non-negative", counts=bad)

    @classmethod
    def by_name(cls, counts: Mapping[str, int], class_names: Sequence[str]) -> "AugmentationPlan":
        unknown = sorted(set(counts) - set(class_names))
        if unknown:
            raise ConfigError(f"augmentation plan names unknown classes: {unknown}", classes=unknown)
        index = {name: i for i, name in enumerate(class_names)}
        return cls({index[name]: int(n) for name, n in counts.items()})


def build_augmented_dataset(train_dataset: Dataset, plan: AugmentationPlan, gan: TrainedGan, seed: int = 0) -> Dataset:
    """Original rows first, then the synthetic rows of each planned class in id order."""
    extra = []
    for class_id in sorted(plan.counts):
        if not 0 <= class_id < train_dataset.n_classes:
            raise ConfigError(f"augmentation plan references unknown class id {class_id}")
        count = plan.counts[class_id]
        if count:
            rows = sample_synthetic(gan, class_id, count, np.random.default_rng([seed, class_id]))
            extra.append(replace(rows, feature_names=train_dataset.feature_names, class_names=train_dataset.class_names))
    return concat(train_dataset, *extra) if extra else train_dataset
