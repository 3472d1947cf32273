"""Run configuration and its flat ``key = value`` text format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .csada import check_exponents
from .errors import ConfigError

VARIANTS = ("full", "no_dynamic_tau", "no_hca", "no_csada")


@dataclass(frozen=True)
class RunConfig:
    k: int = 2
    epochs: int = 400
    lr: float = 1e-3
    beta: float = 0.9
    gamma: float = 2.0
    sigma_n: float = 0.001
    mask_ratio: float = 0.005
    t_n: int = 2
    t_m: int = 2
    embed_dim: int = 500
    tau_start: float = 0.8
    tau_end: float = 0.2
    seed: int = 0
    variant: str = "full"
    kmeans_restarts: int = 10
    snapshot_embeddings: bool = False

    def __post_init__(self):
        check_exponents(self.beta, self.gamma)
        if self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.sigma_n < 0:
            raise ConfigError(f"sigma_n must be non-negative, got {self.sigma_n}")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ConfigError(f"mask_ratio must lie in [0, 1], got {self.mask_ratio}")
        if self.t_n < 0 or self.t_m < 0:
            raise ConfigError("filter orders must be non-negative")
        if self.embed_dim < 1:
            raise ConfigError(f"embed_dim must be positive, got {self.embed_dim}")
        if not 1.0 > self.tau_start >= self.tau_end >= 0.0:
            raise ConfigError(f"need 1 > tau_start >= tau_end >= 0, got {self.tau_start}, {self.tau_end}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.kmeans_restarts < 1:
            raise ConfigError("kmeans_restarts must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = [f"{f.name} = {_format(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name: str, raw: str, kind, lineno: int | None):
    where = f"line {lineno}: " if lineno is not None else ""
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}cannot read {name} = {raw!r} as {kind.__name__}") from None


_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def field_types() -> dict[str, type]:
    return {f.name: _TYPES[f.type] if isinstance(f.type, str) else f.type for f in fields(RunConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed overrides.

    ``#`` starts a comment; blank lines are ignored.  Unknown keys and
    malformed values raise ConfigError naming the line.
    """
    types = field_types()
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', found {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw, types[key], lineno)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from defaults, then the file, then ``overrides``."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            p = _bundled(str(path))
        values.update(parse_config_text(p.read_text(encoding="utf-8"), str(p)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _bundled(name: str) -> Path:
    stem = Path(name).stem.lower()
    candidate = resources.files("ragc") / "configs" / f"{stem}.cfg"
    if not candidate.is_file():
        raise ConfigError(f"config file {name!r} not found (bundled: {', '.join(bundled_configs())})")
    return Path(str(candidate))


def bundled_configs() -> list[str]:
    root = resources.files("ragc") / "configs"
    return sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg"))
