"""Run configuration: a flat key=value text format with strict keys."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError

TMEM_MODES = ("on", "cim-stub", "off")
LR_SCHEDULES = ("constant", "poly")


@dataclass
class RunConfig:
    # data
    train_data: str = ""
    val_data: str = ""
    # model dims
    channels: tuple[int, ...] = (32, 64, 128, 256)
    text_dim: int = 64
    tmem_width: int = 64
    tmem_blocks: int = 2
    reduction: int = 4
    decoder_width: int = 64
    num_heads: int = 1
    max_text_len: int = 16
    image_size: int = 96
    # ablation toggles
    fiam: bool = True
    tmem: str = "on"
    channel_modulation: bool = True
    object_branch: bool = True
    spatial_branch: bool = True
    tmem_pos_embed: bool = True
    # optimization (AdamW; paper-scale weight decay kept as default)
    lr: float = 1e-3
    lr_schedule: str = "constant"
    weight_decay: float = 0.1
    epochs: int = 30
    batch_size: int = 8
    dice_weight: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.channels, str):
            self.channels = tuple(int(c) for c in self.channels.split(","))
        else:
            self.channels = tuple(self.channels)
        if len(self.channels) != 4 or any(c <= 0 for c in self.channels):
            raise ConfigError(f"bad channel schedule {self.channels}")
        if self.tmem not in TMEM_MODES:
            raise ConfigError(f"tmem must be one of {TMEM_MODES}, got {self.tmem!r}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.spatial_branch and not self.object_branch:
            raise ConfigError("spatial_branch requires object_branch")
        for name in ("text_dim", "tmem_width", "tmem_blocks", "reduction",
                     "decoder_width", "num_heads", "max_text_len", "image_size",
                     "epochs", "batch_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.image_size % 32:
            raise ConfigError("image_size must be divisible by 32")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = ",".join(str(c) for c in self.channels)
        return d

    def to_file(self, path: str | Path) -> None:
        lines = [f"{k} = {v}" for k, v in self.to_dict().items()]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in raw:
                continue
            value = raw[f.name]
            if isinstance(value, str):
                value = _coerce(f.name, value, getattr(cls(), f.name))
            kwargs[f.name] = value
        return cls(**kwargs)


def _coerce(name: str, text: str, default):
    if name == "channels":
        return text
    if isinstance(default, bool):
        if text.lower() in ("true", "1", "yes", "on"):
            return True
        if text.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text
