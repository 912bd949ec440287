"""Experiment configuration: flat ``key = value`` files plus CLI overrides.

Lines starting with ``#`` are comments. List-valued keys take
comma-separated values. Keys::

    dataset            path to a .mll dataset
    selectors          ours,random,balance,active,recency,external
    batch_size         128
    epochs             100
    warmup             5
    window             5
    lambda1            0.5
    s0                 100
    bins               10
    hidden             128          (comma-separated hidden widths)
    learning_rate      0.001
    weight_decay       0.0001
    k_folds            5
    folds              (empty = every fold)
    seed               0
    out                runs/latest
    jobs               1
    refresh_full_epoch false
    force_lambda       (empty = off) ablation: overrides lambda1 everywhere
    identity_c         false        ablation: skip the correlation matrix
    grid_s0            (empty = s0 only)
    grid_window        (empty = window only)
    grid_lambda1       (empty = lambda1 only)
    dump               (subset of U,C,w,P)
    corr_diff          (two epochs a,b: also write C_b - C_a)
    score_path         CSV for the external selector
"""

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import List, Optional

from .exceptions import ConfigError
from .selectors import SELECTOR_NAMES

DUMP_KEYS = ("U", "C", "w", "P")


@dataclass
class ExperimentConfig:
    dataset: Optional[str] = None
    selectors: List[str] = field(default_factory=lambda: ["ours", "random"])
    batch_size: int = 128
    epochs: int = 100
    warmup: int = 5
    window: int = 5
    lambda1: float = 0.5
    s0: float = 100.0
    bins: int = 10
    hidden: List[int] = field(default_factory=lambda: [128])
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    k_folds: int = 5
    folds: List[int] = field(default_factory=list)
    seed: int = 0
    out: str = "runs/latest"
    jobs: int = 1
    refresh_full_epoch: bool = False
    force_lambda: Optional[float] = None
    identity_c: bool = False
    grid_s0: List[float] = field(default_factory=list)
    grid_window: List[int] = field(default_factory=list)
    grid_lambda1: List[float] = field(default_factory=list)
    dump: List[str] = field(default_factory=list)
    corr_diff: List[int] = field(default_factory=list)
    score_path: Optional[str] = None

    def fold_ids(self):
        return list(self.folds) if self.folds else list(range(self.k_folds))

    def grid(self):
        """Every (s0, window, lambda1) combination, in a fixed order."""
        s0s = self.grid_s0 or [self.s0]
        windows = self.grid_window or [self.window]
        lams = self.grid_lambda1 or [self.lambda1]
        if self.force_lambda is not None:
            lams = [self.force_lambda]
        return list(itertools.product(s0s, windows, lams))

    def with_overrides(self, pairs):
        """Copy with ``key=value`` string overrides applied."""
        cfg = dataclasses.replace(self)
        for key, raw in pairs:
            _assign(cfg, key, raw)
        return cfg


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_LIST_ITEM = {
    "selectors": str, "hidden": int, "folds": int, "grid_s0": float,
    "grid_window": int, "grid_lambda1": float, "dump": str, "corr_diff": int,
}
_SCALAR = {
    "dataset": str, "batch_size": int, "epochs": int, "warmup": int, "window": int,
    "lambda1": float, "s0": float, "bins": int, "learning_rate": float,
    "weight_decay": float, "k_folds": int, "seed": int, "out": str, "jobs": int,
    "refresh_full_epoch": bool, "force_lambda": float, "identity_c": bool,
    "score_path": str,
}
_OPTIONAL = {"dataset", "force_lambda", "score_path"}


def _to_bool(raw):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _assign(cfg, key, raw):
    key = key.strip()
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    raw = raw.strip()
    try:
        if key in _LIST_ITEM:
            kind = _LIST_ITEM[key]
            value = [kind(v.strip()) for v in raw.split(",") if v.strip()]
        elif key in _OPTIONAL and raw == "":
            value = None
        else:
            kind = _SCALAR[key]
            value = _to_bool(raw) if kind is bool else kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None
    setattr(cfg, key, value)


def parse_config_text(text, source="<config>"):
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        try:
            _assign(cfg, key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def validate_config(cfg):
    """Raise :class:`ConfigError` listing every problem found."""
    problems = []
    if not cfg.selectors:
        problems.append("no selector given")
    for s in cfg.selectors:
        if s not in SELECTOR_NAMES:
            problems.append(f"unknown selector {s!r}")
    if "external" in cfg.selectors and not cfg.score_path:
        problems.append("selector 'external' needs score_path")
    for name in ("batch_size", "epochs", "jobs"):
        if getattr(cfg, name) < 1:
            problems.append(f"{name} must be >= 1")
    if cfg.warmup < 0:
        problems.append("warmup must be >= 0")
    if cfg.bins < 2:
        problems.append("bins must be >= 2")
    if cfg.k_folds < 3:
        problems.append("k_folds must be >= 3 (one test, one validation, >= 1 training fold)")
    for f in cfg.folds:
        if not 0 <= f < cfg.k_folds:
            problems.append(f"fold {f} outside [0, {cfg.k_folds})")
    if not cfg.hidden or any(h < 1 for h in cfg.hidden):
        problems.append("hidden widths must be positive")
    if cfg.learning_rate <= 0 or cfg.weight_decay < 0:
        problems.append("learning_rate must be > 0 and weight_decay >= 0")
    for k in cfg.dump:
        if k not in DUMP_KEYS:
            problems.append(f"unknown dump key {k!r}; choose from {','.join(DUMP_KEYS)}")
    if cfg.corr_diff and len(cfg.corr_diff) != 2:
        problems.append("corr_diff takes exactly two epochs")
    # Each warm-up epoch forwards every instance once (twice with refresh).
    per_epoch = 2 if cfg.refresh_full_epoch else 1
    for s0, window, lam in cfg.grid():
        if s0 < 1:
            problems.append(f"s0 must be >= 1, got {s0}")
        if not 0.0 <= lam <= 1.0:
            problems.append(f"lambda1 must lie in [0, 1], got {lam}")
        if window < 2 and "ours" in cfg.selectors:
            problems.append(f"window must be >= 2 for 'ours', got {window}")
        if window < 1:
            problems.append(f"window must be >= 1, got {window}")
        needs = {"ours": window, "recency": window, "active": 2}
        for s in cfg.selectors:
            if s in needs and cfg.epochs > cfg.warmup and cfg.warmup * per_epoch < needs[s]:
                problems.append(
                    f"selector {s!r}: warmup={cfg.warmup} fills only {cfg.warmup * per_epoch} "
                    f"prediction(s) per instance, {needs[s]} needed"
                )
    if problems:
        raise ConfigError("; ".join(dict.fromkeys(problems)))
    return cfg


def config_to_text(cfg):
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, list):
            v = ",".join(str(x) for x in v)
        elif v is None:
            v = ""
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
