"""Run configuration: an INI-style ``key = value`` file with sections.

All defaults follow the reference setup (lr 0.001, batch 64, init variance
0.02, lambda -3000, k grid 0..200). Every source of randomness has a named
seed here.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .evaluate import ProbeConfig
from .obfuscator import TrainHyper
from .tradeoff import DEFAULT_K_GRID, DEFAULT_LAMBDA, DEFAULT_VARIANCE_GRID

DEFAULT_WORKDIR = "work"


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"not a list of numbers: {text!r}") from None
    if not values:
        raise ConfigError("grid must not be empty")
    return values


@dataclass
class RunConfig:
    raw: list[Path] = field(default_factory=list)
    raw_header: bool = False
    workdir: Path = Path(DEFAULT_WORKDIR)
    train_fraction: float = 0.8
    split_seed: int = 0
    aux_fraction: float = 0.5
    partition_seed: int = 1
    train: TrainHyper = field(default_factory=TrainHyper)
    hidden: tuple[int, ...] = (128, 128)
    bottleneck: int = 64
    k_grid: tuple[float, ...] = tuple(float(k) for k in DEFAULT_K_GRID)
    lam_grid: tuple[float, ...] = (DEFAULT_LAMBDA,)
    variance_grid: tuple[float, ...] = tuple(float(v) for v in DEFAULT_VARIANCE_GRID)
    noise_seed: int = 0
    probe_seed: int = 0
    probe_max_epochs: int = 30
    probe_patience: int = 3
    probe_val_fraction: float = 0.1
    adversary: str = "weak"
    eval_mode: str = "original"
    decorrelation_seed: int = 0

    def probe_config(self, input_dim: int) -> ProbeConfig:
        return ProbeConfig.reference(input_dim, max_epochs=self.probe_max_epochs,
                                     patience=self.probe_patience,
                                     val_fraction=self.probe_val_fraction, seed=self.probe_seed)

    def path(self, name: str) -> Path:
        return self.workdir / name

    def validate(self, need_raw: bool = False):
        if need_raw:
            if not self.raw:
                raise ConfigError("no raw data paths configured")
            for p in self.raw:
                if not p.exists():
                    raise FileNotFoundError(f"raw data file not found: {p}")
        if not 0 < self.aux_fraction < 1:
            raise ConfigError("aux_fraction must lie strictly between 0 and 1")
        if self.adversary not in ("weak", "strong"):
            raise ConfigError(f"adversary must be weak or strong, got {self.adversary!r}")
        if self.eval_mode not in ("original", "obfuscated"):
            raise ConfigError(f"eval_mode must be original or obfuscated, got {self.eval_mode!r}")
        if any(k < 0 for k in self.k_grid) or any(v > 0 for v in self.lam_grid):
            raise ConfigError("k values must be >= 0 and lambda values <= 0")


def load_config(path: str | Path | None = None, workdir: str | Path | None = None) -> RunConfig:
    """Read ``path`` (if given) over the defaults.

    The work directory comes from ``workdir``, then the ``[paths] workdir`` key,
    then ``$OBF_WORKDIR``, then ``./work``.
    """
    cfg = RunConfig()
    env_dir = os.environ.get("OBF_WORKDIR")
    if env_dir:
        cfg.workdir = Path(env_dir)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        _apply(cfg, parser, path.parent)
    if workdir is not None:
        cfg.workdir = Path(workdir)
    cfg.validate()
    return cfg


def _apply(cfg: RunConfig, p: configparser.ConfigParser, base: Path):
    known = {
        "paths": {"raw", "raw_header", "workdir"},
        "data": {"train_fraction", "split_seed", "aux_fraction", "partition_seed"},
        "train": {"lr", "epochs", "batch_size", "patience", "val_fraction", "seed",
                  "init_variance", "hidden", "bottleneck"},
        "privacy": {"k_grid", "lambda_grid", "variance_grid", "noise_seed"},
        "probe": {"seed", "max_epochs", "patience", "val_fraction"},
        "protocol": {"adversary", "eval_mode", "decorrelation_seed"},
    }
    for section in p.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(p[section]) - known[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")
    try:
        if p.has_section("paths"):
            s = p["paths"]
            if "raw" in s:
                cfg.raw = [_resolve(base, v.strip()) for v in s["raw"].split(",") if v.strip()]
            cfg.raw_header = s.getboolean("raw_header", cfg.raw_header)
            if "workdir" in s:
                cfg.workdir = _resolve(base, s["workdir"].strip())
        if p.has_section("data"):
            s = p["data"]
            cfg.train_fraction = s.getfloat("train_fraction", cfg.train_fraction)
            cfg.split_seed = s.getint("split_seed", cfg.split_seed)
            cfg.aux_fraction = s.getfloat("aux_fraction", cfg.aux_fraction)
            cfg.partition_seed = s.getint("partition_seed", cfg.partition_seed)
        if p.has_section("train"):
            s, t = p["train"], cfg.train
            cfg.train = TrainHyper(
                lr=s.getfloat("lr", t.lr), epochs=s.getint("epochs", t.epochs),
                batch_size=s.getint("batch_size", t.batch_size),
                patience=s.getint("patience", t.patience),
                val_fraction=s.getfloat("val_fraction", t.val_fraction),
                seed=s.getint("seed", t.seed),
                init_variance=s.getfloat("init_variance", t.init_variance))
            if "hidden" in s:
                cfg.hidden = tuple(int(v) for v in _floats(s["hidden"]))
            cfg.bottleneck = s.getint("bottleneck", cfg.bottleneck)
        if p.has_section("privacy"):
            s = p["privacy"]
            if "k_grid" in s:
                cfg.k_grid = _floats(s["k_grid"])
            if "lambda_grid" in s:
                cfg.lam_grid = _floats(s["lambda_grid"])
            if "variance_grid" in s:
                cfg.variance_grid = _floats(s["variance_grid"])
            cfg.noise_seed = s.getint("noise_seed", cfg.noise_seed)
        if p.has_section("probe"):
            s = p["probe"]
            cfg.probe_seed = s.getint("seed", cfg.probe_seed)
            cfg.probe_max_epochs = s.getint("max_epochs", cfg.probe_max_epochs)
            cfg.probe_patience = s.getint("patience", cfg.probe_patience)
            cfg.probe_val_fraction = s.getfloat("val_fraction", cfg.probe_val_fraction)
        if p.has_section("protocol"):
            s = p["protocol"]
            cfg.adversary = s.get("adversary", cfg.adversary).strip()
            cfg.eval_mode = s.get("eval_mode", cfg.eval_mode).strip()
            cfg.decorrelation_seed = s.getint("decorrelation_seed", cfg.decorrelation_seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path
