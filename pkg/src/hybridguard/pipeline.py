"""File-staged pipeline behind the CLI.

Each stage reads the artifacts of the previous ones from the run directory,
writes its own, and then atomically rewrites ``manifest.json`` with the config
snapshot, resolved seeds, artifact hashes and its wall time. Reports never carry
timings, so two runs of the same manifest produce identical report bytes.
"""

from __future__ import annotations

import csv
import io
import logging
import shutil
import time
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from hybridguard import SCHEMA_VERSION, __version__, presets
from hybridguard._io import dump_json, load_json, sha256_file, to_json, write_atomic
from hybridguard.classifiers import ForestConfig
from hybridguard.dualnet import (
    ClassPartition,
    CombinationResult,
    DualNetModel,
    combination_spec,
    partition_classes,
    select_best,
    train_dualnet,
)
from hybridguard.errors import ConfigError, DataError
from hybridguard.featsel import BinningSpec
from hybridguard.metrics import evaluate as evaluate_predictions
from hybridguard.metrics import results_table_csv
from hybridguard.tabular import (
    Dataset,
    LabelEncoder,
    clean,
    concat,
    encode_dataset,
    fit_scaler,
    load_csv,
    save_csv,
    split_train_test,
    transform,
)
from hybridguard.wcgan import AugmentationPlan, GanConfig, TrainedGan, TrainLog, build_augmented_dataset
from hybridguard.wcgan import train as train_gan
from hybridguard.wcgan import sample_synthetic

log = logging.getLogger(__name__)

STAGES = ("preprocess", "gan-train", "gan-sample", "augment", "detect-train", "evaluate", "report")


# --------------------------------------------------------------------------- config


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CleanSettings(_Strict):
    policy: Literal["drop", "impute_mean"] = "drop"
    outlier_zscore: float | None = Field(default=None, gt=0)


class SplitSettings(_Strict):
    train_parts: int = Field(default=6, ge=1)
    test_parts: int = Field(default=1, ge=1)
    seed: int | None = None
    stratified: bool = False


class AugmentSettings(_Strict):
    counts: dict[str, int] | None = None  # None: preset plan, or nothing
    seed: int | None = None


class PartitionSettings(_Strict):
    normal: str
    major: list[str] | None = None
    minor: list[str] | None = None
    threshold: float | None = Field(default=None, gt=0, le=1)

    @model_validator(mode="after")
    def _one_mode(self):
        explicit = self.major is not None or self.minor is not None
        if explicit == (self.threshold is not None):
            raise ValueError("give either major/minor lists or a threshold")
        return self


class PipelineConfig(_Strict):
    preset: Literal["unsw_nb15", "cic_ids2017", "iotid20"] | None = None
    input_path: str | None = None
    train_path: str | None = None
    test_path: str | None = None
    label_column: str | None = None
    drop_columns: list[str] = []
    categorical_columns: list[str] = []
    clean: CleanSettings = CleanSettings()
    scaling: list[Literal["standardize", "l2_normalize", "minmax_symmetric"]] = ["standardize", "l2_normalize"]
    split: SplitSettings = SplitSettings()
    gan: dict[str, Any] = {}
    gan_classes: list[str] | None = None
    checkpoint_every: int = Field(default=50, ge=0)
    augmentation: AugmentSettings = AugmentSettings()
    train_on: Literal["augmented", "original"] = "augmented"
    k_features: int = Field(default=presets.K_FEATURES, ge=1)
    bins: int = Field(default=10, ge=2)
    partition: PartitionSettings | None = None
    combinations: list[str] = list(presets.BUILTIN_COMBINATIONS)
    phase1_hyperparameters: dict[str, dict[str, Any]] = {}
    forest: dict[str, Any] = {}
    rank_after_downsample: bool = False
    trust_phase1_minor: bool = False
    seed: int = 0
    out_dir: str = "run"

    @model_validator(mode="after")
    def _check(self):
        if (self.input_path is None) == (self.train_path is None and self.test_path is None):
            raise ValueError("set input_path, or both train_path and test_path")
        if self.input_path is None and (self.train_path is None or self.test_path is None):
            raise ValueError("train_path and test_path go together")
        if self.label_column is None and self.preset is None:
            raise ValueError("label_column is required without a preset")
        unknown = [c for c in self.combinations if c not in presets.COMBINATIONS]
        if unknown:
            raise ValueError(f"unknown combinations {unknown}")
        stray = sorted(set(self.phase1_hyperparameters) - set(self.combinations))
        if stray:
            raise ValueError(f"hyperparameters given for unlisted combinations {stray}")
        self.gan_config()
        self.forest_config()
        return self

    # derived settings

    @property
    def label(self) -> str:
        return self.label_column or presets.LABEL_COLUMNS[self.preset]

    def seeds(self) -> dict[str, int]:
        return {
            "global": self.seed,
            "split": self.seed if self.split.seed is None else self.split.seed,
            "gan": int(self.gan.get("seed", self.seed)),
            "augmentation": self.seed if self.augmentation.seed is None else self.augmentation.seed,
            "detection": self.seed,
        }

    def gan_config(self) -> GanConfig:
        overrides = {**self.gan, "seed": self.seeds()["gan"]}
        try:
            if self.preset is not None:
                return presets.gan_config(self.preset, **overrides)
            return GanConfig(**overrides)
        except TypeError as exc:
            raise ConfigError(f"bad GAN settings: {exc}") from None

    def plan_counts(self) -> dict[str, int]:
        if self.augmentation.counts is not None:
            return dict(self.augmentation.counts)
        return presets.augmentation_plan(self.preset) if self.preset else {}

    def partition_settings(self) -> dict:
        if self.partition is not None:
            return self.partition.model_dump()
        if self.preset is not None:
            return {**presets.partition(self.preset), "threshold": None}
        raise ConfigError("no class partition configured and no preset to take it from")

    def forest_config(self) -> ForestConfig:
        try:
            return ForestConfig(**{"seed": self.seed, **self.forest})
        except TypeError as exc:
            raise ConfigError(f"bad forest settings: {exc}") from None

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path=None, seed: int | None = None, out_dir: str | None = None, **fields) -> PipelineConfig:
    """Read and validate a JSON config; relative paths resolve against its folder."""
    payload: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", path=str(path))
        try:
            payload = load_json(path)
        except ValueError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", path=str(path)) from None
        if not isinstance(payload, dict):
            raise ConfigError("config must be a JSON object")
        base = path.resolve().parent
    payload.update(fields)
    if seed is not None:
        payload["seed"] = seed
    if out_dir is not None:
        payload["out_dir"] = str(Path(out_dir).resolve())
    for key in ("input_path", "train_path", "test_path", "out_dir"):
        if isinstance(payload.get(key), str) and not Path(payload[key]).is_absolute():
            payload[key] = str(base / payload[key])
    try:
        return PipelineConfig.model_validate(payload)
    except ValidationError as exc:
        problems = [
            {"field": ".".join(str(p) for p in err["loc"]) or "(root)", "problem": err["msg"]} for err in exc.errors()
        ]
        raise ConfigError("invalid pipeline config", problems=problems) from None


# --------------------------------------------------------------------------- manifest


class RunManifest:
    """Run-level record kept at ``<out_dir>/manifest.json``."""

    def __init__(self, out_dir, config: PipelineConfig):
        self.path = Path(out_dir) / "manifest.json"
        self.data = load_json(self.path) if self.path.exists() else {"stages": {}}
        self.data.update(
            schema_version=SCHEMA_VERSION,
            version=__version__,
            config=config.snapshot(),
            seeds=config.seeds(),
        )

    def stage(self, name: str) -> dict | None:
        return self.data["stages"].get(name)

    def record(self, name: str, seconds: float, artifacts: dict[str, str], **extra) -> None:
        self.data["stages"][name] = {"seconds": round(seconds, 3), "artifacts": artifacts, **extra}
        dump_json(self.data, self.path)


class Run:
    """Paths and shared helpers for one run directory."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.root = Path(config.out_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(self.root, config)

    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def require(self, *parts) -> Path:
        p = self.path(*parts)
        if not p.exists():
            raise DataError(f"missing upstream artifact {p.relative_to(self.root)}; run the earlier stage first", path=str(p))
        return p

    def hashes(self, *paths: Path) -> dict[str, str]:
        out = {}
        for p in paths:
            files = sorted(q for q in p.rglob("*") if q.is_file()) if p.is_dir() else [p]
            for f in files:
                if "checkpoint" in f.relative_to(self.root).parts:
                    continue
                out[f.relative_to(self.root).as_posix()] = sha256_file(f)
        return out

    def encoder(self) -> LabelEncoder:
        return LabelEncoder.from_dict(load_json(self.require("preprocess", "encoder.json")))

    def load_split(self, *parts) -> Dataset:
        dataset, _ = encode_dataset(load_csv(self.require(*parts), self.config.label), self.encoder())
        return dataset

    def partition(self, train: Dataset) -> ClassPartition:
        settings = self.config.partition_settings()
        if settings.get("threshold") is not None:
            return partition_classes(train, threshold=settings["threshold"], normal=settings["normal"])
        return partition_classes(
            train,
            {"normal": settings["normal"], "major": settings["major"] or [], "minor": settings["minor"] or []},
        )


# --------------------------------------------------------------------------- stages


def _read_input(config: PipelineConfig, path: str) -> Dataset:
    return load_csv(path, config.label, config.drop_columns, config.categorical_columns)


def cmd_preprocess(config: PipelineConfig) -> dict:
    run = Run(config)
    started = time.perf_counter()
    seeds = config.seeds()
    reports = {}
    if config.input_path is not None:
        cleaned, report = clean(_read_input(config, config.input_path), config.clean.policy, config.clean.outlier_zscore)
        reports["input"] = report.to_dict()
        if cleaned.n_rows == 0:
            raise DataError("no rows left after cleaning")
        encoded, encoder = encode_dataset(cleaned)
        train, test = split_train_test(
            encoded, config.split.train_parts, config.split.test_parts, seeds["split"], config.split.stratified
        )
    else:
        parts = {}
        for role, path in (("train", config.train_path), ("test", config.test_path)):
            parts[role], report = clean(_read_input(config, path), config.clean.policy, config.clean.outlier_zscore)
            reports[role] = report.to_dict()
        if parts["train"].feature_names != parts["test"].feature_names:
            raise DataError("train and test files have different feature columns")
        _, encoder = encode_dataset(concat(parts["train"], parts["test"]))
        train, _ = encode_dataset(parts["train"], encoder)
        test, _ = encode_dataset(parts["test"], encoder)
    if train.n_rows == 0 or test.n_rows == 0:
        raise DataError("empty train or test split", train=train.n_rows, test=test.n_rows)

    scalers = []
    for method in config.scaling:
        scaler = fit_scaler(train, method)
        train, test = transform(scaler, train), transform(scaler, test)
        scalers.append(scaler.to_dict())

    out = run.path("preprocess")
    save_csv(train, out / "train.csv", config.label)
    save_csv(test, out / "test.csv", config.label)
    dump_json({"schema_version": SCHEMA_VERSION, **reports}, out / "clean_report.json")
    dump_json(encoder.to_dict(), out / "encoder.json")
    dump_json({"schema_version": SCHEMA_VERSION, "scalers": scalers}, out / "scalers.json")
    summary = {
        "train_rows": train.n_rows,
        "test_rows": test.n_rows,
        "class_counts_train": dict(zip(train.class_names, train.class_counts().tolist())),
        "class_counts_test": dict(zip(test.class_names, test.class_counts().tolist())),
    }
    dump_json({"schema_version": SCHEMA_VERSION, **summary}, out / "summary.json")
    run.manifest.record(
        "preprocess",
        time.perf_counter() - started,
        run.hashes(out),
        test_sha256=sha256_file(out / "test.csv"),
    )
    return summary


def _gan_class_ids(config: PipelineConfig, class_names) -> list[int] | None:
    """Class ids the GAN conditions on; ``None`` (the default) means every class."""
    if config.gan_classes is None:
        return None
    index = {n: i for i, n in enumerate(class_names)}
    unknown = [n for n in config.gan_classes if n not in index]
    if unknown:
        raise ConfigError(f"GAN classes not in the data: {unknown}", classes=unknown)
    return sorted(index[n] for n in config.gan_classes)


def cmd_gan_train(config: PipelineConfig, resume: bool = False) -> dict:
    run = Run(config)
    started = time.perf_counter()
    train = run.load_split("preprocess", "train.csv")
    gan_config = config.gan_config()
    targets = _gan_class_ids(config, train.class_names)
    out = run.path("gan")
    if not resume and (out / "checkpoint").exists():
        shutil.rmtree(out / "checkpoint")
    gan, train_log = train_gan(
        gan_config,
        train,
        target_classes=targets,
        checkpoint_dir=out / "checkpoint",
        checkpoint_every=config.checkpoint_every,
        resume=resume,
    )
    gan.save(out / "model")
    write_atomic(out / "loss.csv", train_log.to_csv())
    write_atomic(out / "loss_epochs.csv", train_log.epochs_csv())
    run.manifest.record(
        "gan-train",
        time.perf_counter() - started,
        run.hashes(out / "model", out / "loss.csv", out / "loss_epochs.csv"),
        target_classes=[train.class_names[c] for c in targets] if targets is not None else "all",
    )
    return {"epochs": gan_config.epochs, **train_log.counts()}


def cmd_gan_sample(config: PipelineConfig, class_name: str, count: int, output=None) -> dict:
    run = Run(config)
    started = time.perf_counter()
    gan = TrainedGan.load(run.require("gan", "model"))
    if class_name not in gan.class_names:
        raise ConfigError(f"unknown class {class_name!r}", label=class_name, known=list(gan.class_names))
    class_id = gan.class_names.index(class_name)
    rng = np.random.default_rng([config.seeds()["augmentation"], class_id])
    rows = sample_synthetic(gan, class_id, count, rng)
    output = Path(output) if output is not None else run.path("gan", "samples", f"{class_name}.csv")
    save_csv(rows, output, config.label)
    run.manifest.record("gan-sample", time.perf_counter() - started, {output.name: sha256_file(output)})
    return {"class": class_name, "rows": count, "path": str(output)}


def cmd_augment(config: PipelineConfig) -> dict:
    run = Run(config)
    started = time.perf_counter()
    source = run.require("preprocess", "train.csv")
    train = run.load_split("preprocess", "train.csv")
    plan = AugmentationPlan.by_name(config.plan_counts(), train.class_names)
    out = run.path("augment", "train.csv")
    if not any(plan.counts.values()):
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(source, out)
        augmented = train
    else:
        gan = TrainedGan.load(run.require("gan", "model"))
        if gan.class_names != train.class_names or gan.n_features != train.n_features:
            raise DataError("the trained GAN does not match the preprocessed training data")
        augmented = build_augmented_dataset(train, plan, gan, config.seeds()["augmentation"])
        save_csv(augmented, out, config.label)
    counts = {
        name: {"original": int(a), "synthetic": int(b - a), "augmented": int(b)}
        for name, a, b in zip(train.class_names, train.class_counts(), augmented.class_counts())
    }
    dump_json({"schema_version": SCHEMA_VERSION, "classes": counts}, run.path("augment", "counts.json"))
    run.manifest.record("augment", time.perf_counter() - started, run.hashes(run.path("augment")))
    return counts


def _training_set(run: Run) -> Dataset:
    if run.config.train_on == "augmented":
        return run.load_split("augment", "train.csv")
    return run.load_split("preprocess", "train.csv")


def cmd_detect_train(config: PipelineConfig) -> dict:
    if not config.combinations:
        raise ConfigError("no combination configured")
    run = Run(config)
    started = time.perf_counter()
    train = _training_set(run)
    partition = run.partition(run.load_split("preprocess", "train.csv"))
    forest = config.forest_config()
    specs = {}
    for name in config.combinations:
        spec = combination_spec(name, config.seed, config.phase1_hyperparameters.get(name))
        spec.resolved()
        specs[name] = spec
    shared = None
    out = run.path("detect")
    for name, spec in specs.items():
        model = train_dualnet(
            train,
            partition,
            spec,
            forest,
            config.k_features,
            BinningSpec(config.bins),
            downsample_seed=config.seed,
            rank_after_downsample=config.rank_after_downsample,
            trust_phase1_minor=config.trust_phase1_minor,
            phase2=shared,
        )
        shared = model.phase2
        model.save(out / name)
    dump_json(
        {"schema_version": SCHEMA_VERSION, "combinations": list(specs), "partition": partition.to_dict(train.class_names)},
        out / "index.json",
    )
    run.manifest.record("detect-train", time.perf_counter() - started, run.hashes(out))
    return {"combinations": list(specs), "train_rows": train.n_rows}


def _per_class_csv(report) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["class", "precision", "recall", "f1", "support"])
    names = report.matrix.class_names
    for i, name in enumerate(names):
        row = [report.per_class[k][i] for k in ("precision", "recall", "f1")]
        writer.writerow([name, *(f"{v:.6f}" for v in row), int(report.per_class["support"][i])])
    return buffer.getvalue()


def cmd_evaluate(config: PipelineConfig) -> dict:
    run = Run(config)
    started = time.perf_counter()
    recorded = run.manifest.stage("preprocess")
    test_path = run.require("preprocess", "test.csv")
    if recorded is None or recorded.get("test_sha256") != sha256_file(test_path):
        raise DataError("test split changed since preprocessing (hash mismatch)", path=str(test_path))
    test = run.load_split("preprocess", "test.csv")
    index = load_json(run.require("detect", "index.json"))
    missing = [n for n in config.combinations if n not in index["combinations"]]
    if missing:
        raise DataError(f"no trained detector for {missing}; rerun detect-train", combinations=missing)
    if not config.combinations:
        raise ConfigError("no combination configured")

    out = run.path("evaluate")
    rows, results = [], []
    for name in config.combinations:
        model = DualNetModel.load(run.path("detect", name))
        pred = model.predict(test.features)
        report = evaluate_predictions(
            test.labels, pred, test.n_classes, model.partition.normal_class, test.class_names
        )
        write_atomic(out / name / "report.json", _report_json(name, report, model))
        write_atomic(out / name / "per_class.csv", _per_class_csv(report))
        write_atomic(out / name / "confusion.csv", report.matrix.to_csv())
        rows.append((name, report))
        results.append(CombinationResult.from_report(name, report))
    write_atomic(out / "sweep.csv", results_table_csv(rows))
    best = select_best(results)
    dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "best": best.name,
            "ranking": "accuracy desc, macro_f1 desc, far asc, name",
            "candidates": [{"name": r.name, "accuracy": r.accuracy, "macro_f1": r.macro_f1, "far": r.far} for r in results],
        },
        out / "best.json",
    )
    run.manifest.record("evaluate", time.perf_counter() - started, run.hashes(out), best=best.name)
    return {"best": best.name, "results": {r.name: {"accuracy": r.accuracy, "far": r.far} for r in results}}


def _report_json(name: str, report, model: DualNetModel) -> str:
    payload = report.to_dict()
    payload.update(
        combination=name,
        table_row=report.table_row(),
        partition=model.partition.to_dict(model.class_names),
        model_fingerprint=model.fingerprint,
        phase1_features=model.phase1.features,
        phase2_features=model.phase2.features,
    )
    return to_json(payload)


def cmd_report(config: PipelineConfig) -> dict:
    """Collect the stage outputs into ``report/summary.json`` and the best model's CSVs."""
    run = Run(config)
    started = time.perf_counter()
    best = load_json(run.require("evaluate", "best.json"))
    summary: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "seeds": config.seeds(),
        "best": best["best"],
        "candidates": best["candidates"],
        "preprocess": load_json(run.require("preprocess", "summary.json")),
        "clean_report": load_json(run.require("preprocess", "clean_report.json")),
    }
    counts = run.path("augment", "counts.json")
    if counts.exists():
        summary["augmentation"] = load_json(counts)["classes"]
    loss = run.path("gan", "loss_epochs.csv")
    if loss.exists():
        epochs = TrainLog.from_csv(run.path("gan", "loss.csv").read_text()).epochs
        summary["gan"] = {
            "epochs": len(epochs),
            "final": {k: epochs[-1][k] for k in ("critic_loss_mean", "generator_loss_mean")} if epochs else None,
        }
    best_dir = run.require("evaluate", best["best"])
    summary["best_report"] = load_json(best_dir / "report.json")
    out = run.path("report")
    dump_json(summary, out / "summary.json")
    shutil.copyfile(run.require("evaluate", "sweep.csv"), out / "sweep.csv")
    shutil.copyfile(best_dir / "per_class.csv", out / "best_per_class.csv")
    shutil.copyfile(best_dir / "confusion.csv", out / "best_confusion.csv")
    run.manifest.record("report", time.perf_counter() - started, run.hashes(out))
    return {"best": best["best"], "path": str(out / "summary.json")}


def run_all(config: PipelineConfig) -> dict:
    """preprocess → gan-train → augment → detect-train → evaluate → report.

    The GAN stage is skipped when the augmentation plan is empty.
    """
    cmd_preprocess(config)
    if any(config.plan_counts().values()):
        cmd_gan_train(config)
    cmd_augment(config)
    cmd_detect_train(config)
    cmd_evaluate(config)
    return cmd_report(config)
