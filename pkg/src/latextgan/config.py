"""Training configuration and the flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import enum
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ConfigError


class ModelKind(str, enum.Enum):
    IWGAN = "iwgan"
    AAE = "aae"
    ARAE = "arae"
    SOFT_GAN = "soft_gan"
    LATEXT_I = "latext_i"
    LATEXT_II = "latext_ii"
    LATEXT_III = "latext_iii"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        valid = ", ".join(k.value for k in cls)
        raise ConfigError(f"unknown model kind {value!r}; valid kinds: {valid}")


@dataclass
class TrainingConfig:
    kind: ModelKind = ModelKind.SOFT_GAN
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    vocab_path: Optional[str] = None
    vocab_size: int = 10000
    max_len: int = 15
    lowercase: bool = True

    iterations: int = 200000
    batch_size: int = 64
    k: int = 5
    gp_lambda: float = 10.0
    ae_lr: float = 1e-3
    ae_beta1: float = 0.9
    ae_beta2: float = 0.999
    gan_lr: float = 1e-4
    gan_beta1: float = 0.5
    gan_beta2: float = 0.9

    hidden: int = 512
    emb_dim: int = 512
    critic_dim: int = 512
    critic_blocks: int = 5
    kernel: int = 5
    code_critic_hidden: int = 512
    gen_hidden: int = 512
    gen_blocks: int = 5
    noise_dim: int = 100

    noise_initial: float = 0.2
    noise_decay: float = 0.995
    noise_every: int = 100
    # None picks the per-kind default (see ``normalize_prior``)
    normalize_z: Optional[bool] = None
    decoder_in_text_critic: bool = True

    eval_every: int = 2000
    eval_samples: int = 640
    checkpoint_every: int = 0
    log_every: int = 100
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.kind = ModelKind.parse(self.kind)
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.gp_lambda < 0:
            raise ConfigError("gp_lambda must be >= 0")
        if self.vocab_size < 5:
            raise ConfigError("vocab_size must be >= 5")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def normalize_prior(self) -> bool:
        if self.normalize_z is not None:
            return self.normalize_z
        # the decoder only ever sees unit-norm codes, so noise fed to it as a code is normalized too
        return self.kind in (ModelKind.AAE, ModelKind.LATEXT_I, ModelKind.SOFT_GAN)

    def replace(self, **changes) -> "TrainingConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def desk_config(**overrides) -> TrainingConfig:
    """Small networks for the toy grammar; runs on one CPU core in minutes."""
    base = dict(
        vocab_size=20, max_len=8, iterations=5000, batch_size=64,
        hidden=128, emb_dim=64, critic_dim=64, critic_blocks=1, kernel=3,
        code_critic_hidden=128, gen_hidden=128, gen_blocks=2, noise_dim=32,
        noise_initial=0.02, eval_every=1000, eval_samples=256, log_every=100,
    )
    base.update(overrides)
    return TrainingConfig(**base)


def _coerce(name: str, raw: str, hint):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if raw.lower() in ("none", "null", ""):
            return None
        hint = args[0]
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_overrides(pairs: dict) -> dict:
    hints = typing.get_type_hints(TrainingConfig)
    out = {}
    for key, raw in pairs.items():
        if key not in hints:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(key, str(raw), hints[key]) if isinstance(raw, str) else raw
    return out


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    return parse_overrides(pairs)


def write_config_file(config: TrainingConfig, path) -> None:
    lines = []
    for key, value in config.to_dict().items():
        lines.append(f"{key} = {'none' if value is None else value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
