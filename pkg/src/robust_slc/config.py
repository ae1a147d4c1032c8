"""Experiment configuration: flat ``key = value`` text with a typed schema.

Lines starting with ``#`` and blank lines are ignored; a ``#`` after a value
starts a comment. Per-group overrides use the suffix form ``theta_<group>``
and ``nf_<group>`` with the group ids of the chosen model (for example
``theta_z`` for the single charge qubit). Unknown keys are rejected.

Environment variables ``SLC_SEED_TRAIN``, ``SLC_SEED_TEST``, ``SLC_OUT``,
``SLC_THREADS`` and ``SLC_DUMP_SAMPLES`` override the file; command-line flags
override both.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

from .evaluation import DEFAULT_BOUNDS
from .models import MODEL_IDS, build_model
from .optimizer import OptimizationConfig
from .sampling import DISTRIBUTIONS

ENV_PREFIX = "SLC_"
ENV_KEYS = ("seed_train", "seed_test", "out", "threads", "dump_samples")
TEST_DISTRIBUTIONS = ("model",) + DISTRIBUTIONS
DEFAULT_NF_VALUES = (1, 3, 5, 7, 9, 11)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


_PARSERS: dict[str, Callable[[str], Any]] = {
    "model": str.strip,
    "theta": float,
    "nf": int,
    "allow_even_nf": _bool,
    "test_distribution": str.strip,
    "n_test": int,
    "seed_train": int,
    "seed_test": int,
    "eta0": _optional_float,
    "initial_change": float,
    "shrink": float,
    "grow": float,
    "epsilon": float,
    "window": int,
    "max_iterations": int,
    "threads": int,
    "out": str.strip,
    "dump_samples": _bool,
    "bounds": _float_list,
    "nf_values": _int_list,
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "single_charge_excited"
    theta: float = 0.0
    theta_groups: dict[str, float] = field(default_factory=dict)
    nf: int = 5
    nf_groups: dict[str, int] = field(default_factory=dict)
    allow_even_nf: bool = False
    test_distribution: str = "model"
    n_test: int = 5000
    seed_train: int = 0
    seed_test: int = 1
    eta0: float | None = None
    initial_change: float = 0.01
    shrink: float = 0.5
    grow: float = 1.1
    epsilon: float = 1e-4
    window: int = 100
    max_iterations: int = 20000
    threads: int = 1
    out: str = "out"
    dump_samples: bool = False
    bounds: tuple[float, ...] = DEFAULT_BOUNDS
    nf_values: tuple[int, ...] = DEFAULT_NF_VALUES

    def groups(self) -> list[str]:
        return list(build_model(self.model).groups())

    def group_bounds(self) -> dict[str, float]:
        return {g: self.theta_groups.get(g, self.theta) for g in self.groups()}

    def group_nf(self) -> dict[str, int]:
        return {g: self.nf_groups.get(g, self.nf) for g in self.groups()}

    def distribution(self) -> str | None:
        return None if self.test_distribution == "model" else self.test_distribution

    def optimization(self) -> OptimizationConfig:
        return OptimizationConfig(eta0=self.eta0, initial_change=self.initial_change, shrink=self.shrink,
                                  grow=self.grow, epsilon=self.epsilon, window=self.window,
                                  max_iterations=self.max_iterations, threads=self.threads)

    def build(self):
        """The model with this configuration's fluctuation bounds applied."""
        return build_model(self.model).with_bound(self.group_bounds())

    def validate(self) -> "ExperimentConfig":
        if self.model not in MODEL_IDS:
            raise ConfigError("model", f"unknown model {self.model!r}; expected one of {', '.join(MODEL_IDS)}")
        groups = self.groups()
        for key, value in [("theta", self.theta), *((f"theta_{g}", v) for g, v in self.theta_groups.items())]:
            if not 0.0 <= value < 1.0:
                raise ConfigError(key, f"bound must lie in [0, 1), got {value!r}")
        for key, value in [("nf", self.nf), *((f"nf_{g}", v) for g, v in self.nf_groups.items())]:
            self._check_nf(key, value)
        for name, mapping in (("theta", self.theta_groups), ("nf", self.nf_groups)):
            for g in mapping:
                if g not in groups:
                    raise ConfigError(f"{name}_{g}", f"model {self.model} has no fluctuation group {g!r}")
        for i, nf in enumerate(self.nf_values):
            self._check_nf("nf_values", nf)
        if not self.bounds or any(not 0 <= b < 1 for b in self.bounds):
            raise ConfigError("bounds", "need a non-empty list of bounds in [0, 1)")
        if list(self.bounds) != sorted(set(self.bounds)):
            raise ConfigError("bounds", "bounds must be strictly increasing")
        if list(self.nf_values) != sorted(set(self.nf_values)) or not self.nf_values:
            raise ConfigError("nf_values", "grid sizes must be strictly increasing")
        if self.test_distribution not in TEST_DISTRIBUTIONS:
            raise ConfigError("test_distribution", f"expected one of {', '.join(TEST_DISTRIBUTIONS)}")
        if self.n_test < 1:
            raise ConfigError("n_test", "must be >= 1")
        for key in ("seed_train", "seed_test"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "seeds must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        if not self.out:
            raise ConfigError("out", "output directory must be set")
        try:
            self.optimization()
        except ValueError as exc:
            raise ConfigError("optimizer", str(exc)) from None
        if self.initial_change <= 0:
            raise ConfigError("initial_change", "must be positive")
        return self

    def _check_nf(self, key: str, value: int) -> None:
        if value < 1:
            raise ConfigError(key, f"grid size must be >= 1, got {value}")
        if value % 2 == 0 and not self.allow_even_nf:
            raise ConfigError(key, f"grid size {value} is even; grid sizes are normally odd "
                                   "(set allow_even_nf = true to override)")

    def to_text(self) -> str:
        """Resolved configuration, every key explicit, in a fixed order."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "theta_groups":
                lines.extend(f"theta_{g} = {_show(v)}" for g, v in self.group_bounds().items())
            elif f.name == "nf_groups":
                lines.extend(f"nf_{g} = {v}" for g, v in self.group_nf().items())
            else:
                lines.append(f"{f.name} = {_show(value)}")
        return "\n".join(lines) + "\n"


def _show(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_show(v) for v in value)
    return str(value)


def parse_pairs(text: str, origin: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"{origin}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            raise ConfigError(key, f"{origin}:{lineno}: duplicate key")
        pairs[key] = value
    return pairs


def from_pairs(pairs: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply string overrides to ``base`` (defaults if omitted) and validate."""
    updates: dict[str, Any] = {}
    theta_groups = dict(base.theta_groups) if base else {}
    nf_groups = dict(base.nf_groups) if base else {}
    for key, text in pairs.items():
        try:
            if key in _PARSERS:
                updates[key] = _PARSERS[key](text)
            elif key.startswith("theta_"):
                theta_groups[key[len("theta_"):]] = float(text)
            elif key.startswith("nf_") and key != "nf_values":
                nf_groups[key[len("nf_"):]] = int(text)
            else:
                raise ConfigError(key, "unknown key")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(key, f"cannot parse {text!r}: {exc}") from None
    cfg = replace(base or ExperimentConfig(), theta_groups=theta_groups, nf_groups=nf_groups, **updates)
    return cfg.validate()


def load_config(path, overrides: dict[str, str] | None = None, env=None) -> ExperimentConfig:
    """File, then ``SLC_*`` environment, then explicit overrides (flags)."""
    pairs: dict[str, str] = {}
    if path is not None:
        with open(path) as fh:
            pairs.update(parse_pairs(fh.read(), str(path)))
    env = os.environ if env is None else env
    for key in ENV_KEYS:
        name = ENV_PREFIX + key.upper()
        if name in env:
            pairs[key] = env[name]
    pairs.update(overrides or {})
    return from_pairs(pairs)
