"""JSON run configuration: versioned, strict about keys, errors anchored to lines.

A config is one JSON object with ``schema_version`` and a fixed set of
sections. Every section maps onto a dataclass; unknown keys, wrong types and
out-of-range values raise :class:`ConfigError` naming the file and line.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path, self.line, self.bare = path, line, message
        where = path or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "two_state"  # two_state | linear_gaussian | fixture | chain
    gamma: float = 0.8
    reward_scale: float = 1.0
    n_states: int = 40
    n_actions: int = 16
    bias_coordinate: bool = True
    path: str | None = None
    kernel: list | None = None

    def validate(self):
        if self.kind not in ("two_state", "linear_gaussian", "fixture", "chain"):
            return f"unknown problem kind {self.kind!r}"
        if not 0.0 < self.gamma < 1.0:
            return "gamma must lie in (0, 1)"
        if not 0.0 < self.reward_scale <= 1.0:
            return "reward_scale must lie in (0, 1]"
        if self.n_states < 1 or self.n_actions < 2:
            return "need n_states >= 1 and n_actions >= 2"
        if self.kind == "fixture" and not self.path:
            return "fixture problems need a path"
        if self.kind == "chain" and not self.kernel:
            return "chain problems need a kernel"
        return None


@dataclass(frozen=True)
class CriticSpec:
    J: int = 5
    L: int = 512
    depth: int = 2
    width: int = 64
    activation: str = "relu"
    linear_output: bool = True
    beta_scale: float = 1.0
    beta_prime: float | None = None
    radius: float | None = None
    project_output_layer: bool = True
    warm_start_stages: bool = False
    trace: bool = False

    def validate(self):
        if self.J < 1 or self.L < 1 or self.depth < 2 or self.width < 1:
            return "need J >= 1, L >= 1, depth >= 2 and width >= 1"
        if self.activation not in ("relu", "tanh", "sigmoid"):
            return f"unknown activation {self.activation!r}"
        if self.beta_scale <= 0 or (self.beta_prime is not None and self.beta_prime <= 0):
            return "step sizes must be positive"
        if self.radius is not None and self.radius <= 0:
            return "radius must be positive"
        return None


@dataclass(frozen=True)
class ActorSpec:
    depth: int = 2
    width: int = 8
    activation: str = "tanh"
    sigma2_min: float = 1e-3

    def validate(self):
        if self.activation not in ("tanh", "sigmoid"):
            return "actor activation must be tanh or sigmoid"
        if self.depth < 2 or self.width < 1 or self.sigma2_min <= 0:
            return "need depth >= 2, width >= 1 and sigma2_min > 0"
        return None


@dataclass(frozen=True)
class TrainSpec:
    K: int = 200
    n: int = 512
    alpha: float | None = 1.0
    eval_every: int = 1
    seeds: list = field(default_factory=lambda: [0])

    def validate(self):
        if self.K < 1 or self.n < 1 or self.eval_every < 1:
            return "K, n and eval_every must be >= 1"
        if self.alpha is not None and self.alpha <= 0:
            return "alpha must be positive"
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            return "seeds must be a nonempty list of nonnegative integers"
        return None


@dataclass(frozen=True)
class ClassSpec:
    kind: str = "relu_features"  # constant | one_hot | relu_features | gridnet
    width: int = 16
    seed: int = 1

    def validate(self):
        if self.kind not in ("constant", "one_hot", "relu_features", "gridnet"):
            return f"unknown class kind {self.kind!r}"
        if self.width < 1:
            return "width must be >= 1"
        return None


@dataclass(frozen=True)
class SweepSpec:
    target: str = "eps3"  # eps3 | eps4 | stages | synthetic
    values: list = field(default_factory=lambda: [64, 256, 1024, 4096])
    seeds: list = field(default_factory=lambda: list(range(20)))
    n: int = 256
    policy_seed: int = 0
    exponent: float = -0.5
    constant: float = 1.0

    def validate(self):
        if self.target not in ("eps3", "eps4", "stages", "synthetic"):
            return f"unknown sweep target {self.target!r}"
        if not self.values or not all(isinstance(v, (int, float)) and v > 0 for v in self.values):
            return "sweep values must be positive numbers"
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            return "seeds must be a nonempty list of nonnegative integers"
        if self.n < 1:
            return "n must be >= 1"
        return None


@dataclass(frozen=True)
class MixingSpec:
    max_lag: int = 30
    policy: str = "uniform"  # uniform | random
    policy_seed: int = 0

    def validate(self):
        if self.max_lag < 2:
            return "max_lag must be >= 2"
        if self.policy not in ("uniform", "random"):
            return f"unknown policy {self.policy!r}"
        return None


SECTIONS = {
    "problem": ProblemSpec,
    "critic": CriticSpec,
    "actor": ActorSpec,
    "train": TrainSpec,
    "class": ClassSpec,
    "sweep": SweepSpec,
    "mixing": MixingSpec,
}


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    critic: CriticSpec = field(default_factory=CriticSpec)
    actor: ActorSpec = field(default_factory=ActorSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    cls: ClassSpec = field(default_factory=ClassSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    mixing: MixingSpec = field(default_factory=MixingSpec)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        out = {"schema_version": self.schema_version}
        for name in SECTIONS:
            out[name] = dataclasses.asdict(getattr(self, "cls" if name == "class" else name))
        return out


# ---------------------------------------------------------------------------
# parsing


def _key_line(text: str, key: str, after: int = 1) -> int | None:
    pat = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for i, line in enumerate(text.splitlines(), start=1):
        if i >= after and pat.search(line):
            return i
    return None


def _type_ok(value, hint) -> bool:
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        return any(_type_ok(value, h) for h in typing.get_args(hint))
    if hint is type(None):
        return value is None
    if hint is bool:
        return isinstance(value, bool)
    if hint is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if hint is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if hint is str:
        return isinstance(value, str)
    if hint is list or origin is list:
        return isinstance(value, list)
    return True


def _coerce(value, hint):
    # ints are accepted where floats are expected
    if hint is float or (typing.get_origin(hint) in (typing.Union, types.UnionType) and float in typing.get_args(hint)):
        if isinstance(value, int) and not isinstance(value, bool):
            return float(value)
    return value


def _build_section(cls, raw, name: str, text: str, path: str | None):
    line = _key_line(text, name)
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object", path, line)
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        kline = _key_line(text, key, after=line or 1)
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section {name!r}", path, kline)
        if not _type_ok(value, hints[key]):
            raise ConfigError(f"{name}.{key} has the wrong type ({type(value).__name__})", path, kline)
        kwargs[key] = _coerce(value, hints[key])
    spec = cls(**kwargs)
    problem = spec.validate()
    if problem:
        raise ConfigError(f"{name}: {problem}", path, line)
    return spec


def parse_config(text: str, path: str | None = None, required=()) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", path, 1)
    if "schema_version" not in raw:
        raise ConfigError("missing schema_version", path, 1)
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {raw['schema_version']!r} (expected {SCHEMA_VERSION})",
                          path, _key_line(text, "schema_version"))
    for key in raw:
        if key != "schema_version" and key not in SECTIONS:
            raise ConfigError(f"unknown top-level key {key!r}", path, _key_line(text, key))
    for name in required:
        if name not in raw:
            raise ConfigError(f"missing section {name!r}", path, 1)
    kwargs = {}
    for name, cls in SECTIONS.items():
        if name in raw:
            kwargs["cls" if name == "class" else name] = _build_section(cls, raw[name], name, text, path)
    return RunConfig(**kwargs)


def load_config(path, required=()) -> tuple[RunConfig, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}", str(p))
    text = p.read_text()
    return parse_config(text, str(p), required), text


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
