"""Hyperparameters for boundary alignment, the training objectives and evaluation.

Values resolve in this order, later sources winning:
dataclass defaults, a named preset, a JSON config file, ``ATBA_*`` environment
variables (a ``.env`` file is honored through python-dotenv), explicit overrides.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from atba.errors import ConfigError

logger = logging.getLogger(__name__)

ENV_PREFIX = "ATBA_"
SCORE_FUSIONS = ("combined", "transition-only")
BOUNDARY_NORMALIZATIONS = ("area", "support")

# Published per-corpus settings; anything not listed keeps the dataclass default.
PRESETS: dict[str, dict[str, Any]] = {
    "default": {},
    "breakfast": {"w_a": 31, "mu": 0.3, "background_weight": 1.0, "downsample": 10},
    "hollywood": {"w_a": 23, "mu": 0.3, "background_weight": 0.8, "downsample": 5},
    "crosstask": {"w_a": 31, "mu": 0.1, "background_weight": 0.8},
}


@dataclass(frozen=True)
class Config:
    w_b: int = 7
    w_a: int = 31
    lam: int = 4
    mu: float = 0.3
    tau: float = 0.2
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.1
    background: int | None = None
    background_weight: float = 1.0
    downsample: int = 1
    score_fusion: str = "combined"
    unbounded_candidates: bool = False
    center_frame_refinement: bool = True
    boundary_normalization: str = "area"

    def __post_init__(self) -> None:
        errors = []
        for name in ("w_b", "w_a"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 3 or value % 2 == 0:
                errors.append(f"{name} must be an odd integer >= 3, got {value!r}")
        if not isinstance(self.lam, int) or self.lam < 1:
            errors.append(f"lam must be a positive integer, got {self.lam!r}")
        if not 0.0 <= self.mu <= 1.0:
            errors.append(f"mu must lie in [0, 1], got {self.mu!r}")
        if not self.tau > 0.0:
            errors.append(f"tau must be positive, got {self.tau!r}")
        if self.background is not None and (not isinstance(self.background, int) or self.background < 1):
            errors.append(f"background must be a class index >= 1, got {self.background!r}")
        if self.background_weight < 0.0:
            errors.append(f"background_weight must be non-negative, got {self.background_weight!r}")
        if not isinstance(self.downsample, int) or self.downsample < 1:
            errors.append(f"downsample must be a positive integer, got {self.downsample!r}")
        if self.score_fusion not in SCORE_FUSIONS:
            errors.append(f"score_fusion must be one of {SCORE_FUSIONS}, got {self.score_fusion!r}")
        if self.boundary_normalization not in BOUNDARY_NORMALIZATIONS:
            errors.append(
                f"boundary_normalization must be one of {BOUNDARY_NORMALIZATIONS}, got {self.boundary_normalization!r}"
            )
        if errors:
            raise ConfigError("\n".join(errors))

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "Config":
        try:
            values = dict(PRESETS[name])
        except KeyError:
            raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
        values.update(overrides)
        return cls(**values)

    def with_overrides(self, **overrides: Any) -> "Config":
        unknown = set(overrides) - field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **overrides)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def field_names() -> set[str]:
    return {item.name for item in fields(Config)}


def _coerce(name: str, raw: str) -> Any:
    kind = {item.name: item.type for item in fields(Config)}[name]
    try:
        if kind == "bool":
            return raw.strip().lower() in {"1", "true", "yes", "on"}
        if kind == "int":
            return int(raw)
        if kind == "int | None":
            return None if raw.strip().lower() in {"", "none"} else int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{name.upper()}: cannot parse {raw!r} as {kind}") from None
    return raw.strip()


def env_overrides(environ: dict[str, str] | None = None) -> dict[str, Any]:
    """Collect ``ATBA_<FIELD>`` variables, e.g. ``ATBA_W_B=9`` or ``ATBA_MU=0.1``."""
    environ = os.environ if environ is None else environ
    values: dict[str, Any] = {}
    for name in field_names():
        raw = environ.get(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None:
            values[name] = _coerce(name, raw)
    return values


def read_config_file(path: Path) -> dict[str, Any]:
    try:
        with path.open(encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    document = dict(document)
    document.pop("format_version", None)
    unknown = set(document) - field_names() - {"preset"}
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {sorted(unknown)}")
    return document


def load_config(
    path: Path | str | None = None,
    *,
    preset: str | None = None,
    use_env: bool = True,
    **overrides: Any,
) -> Config:
    file_values = read_config_file(Path(path)) if path is not None else {}
    preset_name = preset or file_values.pop("preset", None) or "default"
    file_values.pop("preset", None)

    values: dict[str, Any] = {}
    values.update(file_values)
    if use_env:
        load_dotenv()
        values.update(env_overrides())
    values.update(overrides)
    config = Config.preset(preset_name, **values)
    logger.debug("Resolved config (preset=%s): %s", preset_name, config.to_dict())
    return config
