"""Training configuration and its flat key=value file format.

Every field of TrainConfig is one line of the file (`name = value`); blank
lines and `#` comments are ignored; unknown keys are rejected. `lambda`
is the file key for the `lam` attribute (the bare word is reserved in
Python). Tuple-valued encoder fields use compact strings: channel widths
as comma-separated ints, pool shapes as comma-separated HxW pairs.
"""

import dataclasses
from dataclasses import dataclass

from .augment import AugmentationConfig, no_augmentation
from .dsp import SpectrogramConfig
from .encoder import EncoderConfig
from .errors import ConfigError
from .transformer import TransformerConfig

# file key -> attribute name, where they differ
_KEY_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_KEY = {v: k for k, v in _KEY_TO_ATTR.items()}

MASK_MODES = ("none", "pos", "posneg")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    epochs: int = 20
    learning_rate: float = 3e-4
    weight_decay: float = 1e-6
    mask_ratio: float = 0.1
    lam: float = 0.005
    seg_len: int = 65536
    seed: int = 0
    sample_rate: int = 16000
    n_fft: int = 256
    hop: int = 128
    n_mels: int = 128
    n_layers: int = 3
    n_heads: int = 3
    ffn_hidden: int = 0
    enc_channels: str = "64,128,128,64"
    enc_pools: str = "2x4,2x4,2x4,2x2"
    repr_dim: int = 512
    proj_hidden: int = 512
    proj_dim: int = 256
    mask_mode: str = "posneg"
    checkpoint_every: int = 0
    aug_enabled: bool = True
    aug_polarity_prob: float = 0.5
    aug_noise_prob: float = 0.3
    aug_gain_prob: float = 0.5
    aug_filter_prob: float = 0.3
    aug_delay_prob: float = 0.3
    aug_pitch_prob: float = 0.3

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.mask_ratio < 1.0:
            raise ConfigError(f"mask_ratio must be in (0, 1), got {self.mask_ratio}")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.mask_mode not in MASK_MODES:
            raise ConfigError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("seg_len", "sample_rate", "n_fft", "hop", "n_mels",
                     "n_layers", "n_heads", "repr_dim", "proj_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        self.encoder_config()  # validates channel/pool strings eagerly

    # -- derived sub-configs ------------------------------------------

    def spectrogram_config(self):
        return SpectrogramConfig(sample_rate=self.sample_rate, n_fft=self.n_fft,
                                 hop=self.hop, n_mels=self.n_mels)

    def transformer_config(self):
        return TransformerConfig(model_dim=self.n_mels, n_layers=self.n_layers,
                                 n_heads=self.n_heads, ffn_hidden=self.ffn_hidden)

    def encoder_config(self):
        try:
            channels = tuple(int(c) for c in self.enc_channels.split(","))
            pools = tuple(
                tuple(int(v) for v in p.strip().split("x")) for p in self.enc_pools.split(",")
            )
        except ValueError as exc:
            raise ConfigError(
                f"bad encoder geometry: channels={self.enc_channels!r}, "
                f"pools={self.enc_pools!r} ({exc})"
            ) from None
        try:
            return EncoderConfig(channels=channels, pools=pools, repr_dim=self.repr_dim,
                                 proj_hidden=self.proj_hidden, proj_dim=self.proj_dim)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def augmentation_config(self):
        if not self.aug_enabled:
            return no_augmentation()
        return AugmentationConfig(
            polarity_prob=self.aug_polarity_prob, noise_prob=self.aug_noise_prob,
            gain_prob=self.aug_gain_prob, filter_prob=self.aug_filter_prob,
            delay_prob=self.aug_delay_prob, pitch_prob=self.aug_pitch_prob)


def _parse_value(field_type, raw, key):
    if field_type is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")
    try:
        return field_type(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {field_type.__name__}") from None


def parse_config(text):
    """Parse key=value lines into a TrainConfig; unknown keys are errors."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.split("#", 1)[0].strip()
        attr = _KEY_TO_ATTR.get(key, key)
        if attr not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if attr in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[attr] = _parse_value(_FIELD_TYPES[attr], raw, key)
    return TrainConfig(**values)


_FIELD_TYPES = {f.name: f.type if isinstance(f.type, type) else
                {"bool": bool, "float": float, "int": int, "str": str}[f.type]
                for f in dataclasses.fields(TrainConfig)}


def format_config(config):
    """Render a TrainConfig as the key=value file format (round-trips)."""
    lines = []
    for f in dataclasses.fields(TrainConfig):
        key = _ATTR_TO_KEY.get(f.name, f.name)
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(path, config) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_config(config))
