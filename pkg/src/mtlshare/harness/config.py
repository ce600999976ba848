"""Experiment configuration: a strict JSON schema with per-kind defaults."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..exceptions import ArgumentError, ConfigError
from ..trainer import TrainConfig

SAMPLE_SWEEP = "sample_sweep"
COSINE_SWEEP = "cosine_sweep"
CAPACITY_SWEEP = "capacity_sweep"
ALIGNMENT_CORRECTION = "alignment_correction"
NOISE_REWEIGHTING = "noise_reweighting"
THEORY_VERIFY = "theory_verify"
KINDS = (SAMPLE_SWEEP, COSINE_SWEEP, CAPACITY_SWEEP, ALIGNMENT_CORRECTION,
         NOISE_REWEIGHTING, THEORY_VERIFY)

WEIGHTINGS = ("uniform", "svd", "uncertainty")
SOLVERS = ("exact", "sgd")

SOURCE_SIZES = [50, 100, 200, 500, 1000, 2000, 5000, 9000]


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs shared by the synthetic task families.

    Not every field is used by every experiment kind; unused fields are
    ignored.
    """

    d: int = 100
    kappa: float = 100.0
    boost_fraction: float = 0.1
    cosine: float = 0.96
    target_train: int = 9000
    target_val: int = 1000
    source_train: int = 1000
    source_val_fraction: float = 0.1
    sigma_target: float = 0.0
    sigma_source: float = 0.0
    n_tasks: int = 4
    flip_prob: float = 0.5
    activation: str = "linear"


#: Per-kind generator overrides applied before the user's fields.
GENERATOR_DEFAULTS = {
    SAMPLE_SWEEP: {},
    ALIGNMENT_CORRECTION: {},
    COSINE_SWEEP: {"d": 20, "kappa": 1.0, "target_train": 50, "target_val": 1000,
                   "source_train": 1000, "sigma_target": 1.0, "sigma_source": 1.0},
    CAPACITY_SWEEP: {"d": 20, "n_tasks": 4, "target_train": 100},
    NOISE_REWEIGHTING: {"target_train": 9000, "target_val": 1000},
    THEORY_VERIFY: {"d": 20, "target_train": 50, "source_train": 9000,
                    "sigma_target": 0.1, "sigma_source": 0.1, "kappa": 5.0},
}

DEFAULT_GRIDS = {
    SAMPLE_SWEEP: SOURCE_SIZES,
    ALIGNMENT_CORRECTION: SOURCE_SIZES,
    COSINE_SWEEP: [round(x, 10) for x in np.linspace(0.0, 1.0, 11).tolist()],
    CAPACITY_SWEEP: None,  # 1..2k, filled from n_tasks
    NOISE_REWEIGHTING: [0.2],
    THEORY_VERIFY: [0.0, 0.02, 0.05],
}

DEFAULT_TRAIN = {
    # stable step for kappa = 100 covariates (largest power of ten below
    # 0.5 / lambda_max of the sample covariance)
    ALIGNMENT_CORRECTION: {"learning_rate": 1e-5},
    NOISE_REWEIGHTING: {"batching": "joint"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: tuple
    grid: tuple
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    r: int = 1
    weighting: str = "uniform"
    solver: str = "exact"
    restarts: int = 3
    workers: int = 1
    name: str = ""

    def to_dict(self):
        doc = asdict(self)
        doc["seeds"] = list(self.seeds)
        doc["grid"] = list(self.grid)
        doc["train"]["weights"] = None if self.train.weights is None else list(self.train.weights)
        return doc

    @property
    def label(self):
        return self.name or self.kind


def _strict(cls, doc, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {', '.join(unknown)}")
    return doc


def _check_number(value, name, kind=(int, float)):
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return value


def config_from_dict(doc):
    """Build and validate an :class:`ExperimentConfig`; unknown fields are rejected."""
    _strict(ExperimentConfig, doc, "config")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")

    gen_doc = dict(GENERATOR_DEFAULTS[kind])
    gen_doc.update(_strict(GeneratorSpec, doc.get("generator", {}), "generator"))
    for f in fields(GeneratorSpec):
        if f.name != "activation":
            _check_number(gen_doc.get(f.name, f.default), f"generator.{f.name}")
    try:
        generator = GeneratorSpec(**gen_doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if generator.activation not in ("linear", "relu"):
        raise ConfigError("generator.activation must be 'linear' or 'relu'")

    train_doc = dict(DEFAULT_TRAIN.get(kind, {}))
    train_doc.update(_strict(TrainConfig, doc.get("train", {}), "train"))
    try:
        train = TrainConfig(**train_doc)
    except (TypeError, ArgumentError) as exc:
        raise ConfigError(f"train: {exc}") from exc

    seeds = doc.get("seeds", list(range(5)))
    if not isinstance(seeds, list) or not seeds or \
            not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be a nonempty list of integers")
    grid = doc.get("grid", DEFAULT_GRIDS[kind])
    if grid is None:
        grid = list(range(1, 2 * generator.n_tasks + 1))
    if not isinstance(grid, list) or not grid:
        raise ConfigError("grid must be a nonempty list")
    for g in grid:
        _check_number(g, "grid value")

    out = ExperimentConfig(
        kind=kind,
        seeds=tuple(seeds),
        grid=tuple(grid),
        generator=generator,
        train=train,
        r=doc.get("r", 1),
        weighting=doc.get("weighting", "uniform"),
        solver=doc.get("solver", "exact"),
        restarts=doc.get("restarts", 3),
        workers=doc.get("workers", 1),
        name=doc.get("name", ""),
    )
    _validate(out)
    return out


def _validate(cfg):
    for name in ("r", "restarts", "workers"):
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"{name} must be a positive integer")
    if cfg.weighting not in WEIGHTINGS:
        raise ConfigError(f"weighting must be one of {WEIGHTINGS}")
    if cfg.solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}")
    if any(s < 0 for s in cfg.seeds):
        raise ConfigError("seeds must be nonnegative")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError("seeds must be distinct")
    if len(set(cfg.grid)) != len(cfg.grid):
        raise ConfigError("grid values must be distinct")
    g = cfg.generator
    if cfg.weighting != "uniform" and cfg.kind != NOISE_REWEIGHTING:
        raise ConfigError("non-uniform weighting needs shared covariates (noise_reweighting only)")
    if g.activation == "relu" and cfg.solver == "exact":
        raise ConfigError("the exact solver covers the linear model only; use solver 'sgd'")
    if g.d < 2:
        raise ConfigError("generator.d must be >= 2")
    if cfg.kind in (SAMPLE_SWEEP, ALIGNMENT_CORRECTION, CAPACITY_SWEEP):
        if any(int(v) != v or v < 1 for v in cfg.grid):
            raise ConfigError(f"{cfg.kind} grid must hold positive integers")
    if cfg.kind in (COSINE_SWEEP, NOISE_REWEIGHTING):
        if any(not 0.0 <= v <= 1.0 for v in cfg.grid):
            raise ConfigError(f"{cfg.kind} grid must lie in [0, 1]")
    if cfg.kind == THEORY_VERIFY:
        if any(not 0.0 <= v < 1.0 for v in cfg.grid):
            raise ConfigError("theory_verify grid holds sines in [0, 1)")
        if cfg.r != 1:
            raise ConfigError("theory_verify requires r = 1")
    if cfg.kind in (ALIGNMENT_CORRECTION,) and g.activation != "linear":
        raise ConfigError("alignment_correction uses the linear model")
    if cfg.kind == NOISE_REWEIGHTING and cfg.train.batching != "joint":
        raise ConfigError("noise_reweighting shares covariates and trains with joint batching")


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(doc)
