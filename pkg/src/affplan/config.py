"""Configuration: defaults, an optional key=value file, then CLI flags.

The file format is one `key = value` per line; blank lines and lines
starting with '#' or ';' are ignored. The AFFPLAN_CONFIG environment
variable names the default file; an explicit --config flag wins over it,
and individual flags win over the file.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = ["ConfigError", "Config", "load_config", "ENV_VAR"]

ENV_VAR = "AFFPLAN_CONFIG"


class ConfigError(ValueError):
    """Bad configuration file or value."""


@dataclass
class Config:
    iou_min: float = 0.5
    pixel_threshold: int = 25
    planner: str = "fast"
    beta: float = 1.0
    sigma: float = 5.0
    alpha: float = math.log(0.5) / 5.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.iou_min <= 1.0):
            raise ConfigError(f"iou_min must be in (0, 1], got {self.iou_min}")
        if self.pixel_threshold < 1:
            raise ConfigError(
                f"pixel_threshold must be >= 1, got {self.pixel_threshold}"
            )
        if self.planner not in ("fast", "optimal"):
            raise ConfigError(
                f"planner must be 'fast' or 'optimal', got {self.planner!r}"
            )
        if self.beta <= 0 or self.sigma <= 0 or self.alpha >= 0:
            raise ConfigError(
                "need beta > 0, sigma > 0 and alpha < 0 for the metric"
            )


def _parse_file(path: Path) -> dict[str, str]:
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None) -> Config:
    """Build a Config from defaults plus an optional file.

    With path=None the AFFPLAN_CONFIG environment variable is consulted;
    when that is unset too, defaults are returned.
    """
    if path is None:
        env = os.environ.get(ENV_VAR)
        if not env:
            return Config()
        path = env
    raw = _parse_file(Path(path))

    kwargs: dict = {}
    typemap = {f.name: f.type for f in fields(Config)}
    for key, value in raw.items():
        if key not in typemap:
            raise ConfigError(f"unknown config key {key!r}")
        t = typemap[key]
        try:
            if t == "int":
                kwargs[key] = int(value)
            elif t == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError as e:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from e
    return Config(**kwargs)
