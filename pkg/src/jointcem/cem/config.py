from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

HEADS_BY_VARIANT: dict[str, frozenset[str]] = {
    "W": frozenset({"word"}),
    "U": frozenset({"utt"}),
    "WD": frozenset({"word", "deletion"}),
    "WU": frozenset({"word", "utt"}),
    "WUD": frozenset({"word", "deletion", "utt"}),
}


class ConfigError(ValueError):
    pass


@dataclass
class CemConfig:
    """Model, loss and optimizer settings.

    ``variant`` selects which heads (and therefore which losses) exist.
    """

    variant: str = "WUD"
    lambda_deletion: float = 0.5
    lambda_utt: float = 1.0
    d_model: int = 32
    n_heads: int = 2
    n_blocks: int = 1
    d_ff: int = 64
    d_acoustic: int = 16
    word_hidden: int = 32
    deletion_hidden: tuple[int, int] = (32, 16)
    utt_hidden: int = 16
    positional: bool = True
    wp_prototypes: bool = True
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    patience: int = 3
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.variant not in HEADS_BY_VARIANT:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {sorted(HEADS_BY_VARIANT)}")
        if self.lambda_deletion < 0 or self.lambda_utt < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.d_model % self.n_heads:
            raise ConfigError("d_model must be divisible by n_heads")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size >= 1 and epochs >= 0 required")
        self.deletion_hidden = tuple(int(x) for x in self.deletion_hidden)

    @property
    def heads(self) -> frozenset[str]:
        return HEADS_BY_VARIANT[self.variant]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["deletion_hidden"] = list(self.deletion_hidden)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "CemConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> dict:
    """Read a YAML (or JSON) mapping with optional ``model`` and ``channel`` sections."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(data) - {"model", "channel"}
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}")
    return data
