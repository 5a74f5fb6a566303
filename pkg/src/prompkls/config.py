"""Run configuration and its ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    num_basis: int = 20
    ridge_lambda: float = 1e-6
    phase_points: int = 101
    strokes_per_set: int = 20
    window_fraction: float = 0.1
    filter_cutoff_hz: float | None = None
    outlier_sigma: float = 3.0
    variance_floor: float = 1e-8
    rng_seed: int = 0
    workers: int = 1
    threshold_sigma: float = 6.0
    refractory_ms: float = 150.0

    def validate(self) -> "RunConfig":
        positive = ("num_basis", "phase_points", "strokes_per_set", "window_fraction",
                    "outlier_sigma", "variance_floor", "workers", "threshold_sigma")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.ridge_lambda < 0:
            raise ConfigError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.refractory_ms < 0:
            raise ConfigError(f"refractory_ms must be >= 0, got {self.refractory_ms}")
        if self.phase_points < 2:
            raise ConfigError(f"phase_points must be >= 2, got {self.phase_points}")
        if self.num_basis > self.phase_points:
            raise ConfigError(
                f"num_basis ({self.num_basis}) must not exceed phase_points ({self.phase_points})")
        if self.window_fraction > 1:
            raise ConfigError(f"window_fraction must be <= 1, got {self.window_fraction}")
        if self.filter_cutoff_hz is not None and not self.filter_cutoff_hz > 0:
            raise ConfigError(f"filter_cutoff_hz must be positive, got {self.filter_cutoff_hz}")
        return self

    def with_overrides(self, **overrides) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - fields
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {"num_basis": int, "phase_points": int, "strokes_per_set": int,
                "rng_seed": int, "workers": int}


def _coerce(name: str, raw: str):
    if name == "filter_cutoff_hz" and raw.lower() in ("", "off", "none"):
        return None
    kind = _FIELD_TYPES.get(name, float)
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return RunConfig(**values).validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
