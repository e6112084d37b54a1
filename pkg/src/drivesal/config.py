"""Run configuration as flat ``key = value`` text.

Lines starting with ``#`` are comments. Lists are comma separated. Unknown
keys are rejected. Command-line flags override values read from a file.
"""

import dataclasses
from dataclasses import dataclass, field, fields

from .backbone import BackboneConfig
from .errors import ConfigError
from .losses import LossConfig
from .priors import parse_variant

LOSS_ORDER = ("CC", "KL", "NSS")


@dataclass
class RunConfig:
    variant: str = "G16"
    losses: list = field(default_factory=lambda: ["CC", "KL"])
    input_h: int = 48
    input_w: int = 64
    block_channels: list = field(default_factory=lambda: [8, 16, 32, 32, 32])
    feature_channels: int = 32
    dilation_last: int = 2
    seq_len: int = 4
    static: bool = False
    attn_channels: int = 16
    upsample_factor: int = 8
    kl_epsilon: float = 1e-7
    optimizer: str = "sgd"
    lr: float = 1e-2
    epochs: int = 10
    max_steps: int = 0
    grad_clip: float = 0.0
    train_backbone: bool = True
    seed: int = 0
    decision_downsample: int = 4
    decision_hidden: list = field(default_factory=lambda: [128, 64])
    decision_threshold: float = 0.5
    decision_lr: float = 0.05
    decision_epochs: int = 300
    manifest: str = ""
    val_manifest: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        parse_variant(self.variant)
        bad = [t for t in self.losses if t.upper() not in LOSS_ORDER]
        if bad or not self.losses:
            raise ConfigError(f"losses must be a non-empty subset of {','.join(LOSS_ORDER)}, got {self.losses}")
        self.losses = [t for t in LOSS_ORDER if t in {x.upper() for x in self.losses}]
        self.backbone_config().validate()
        if self.seq_len < 1:
            raise ConfigError("seq_len must be >= 1")
        if self.upsample_factor < 1 or self.attn_channels < 1:
            raise ConfigError("upsample_factor and attn_channels must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be sgd or adam, got {self.optimizer!r}")
        if self.lr <= 0 or self.decision_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.epochs < 0 or self.max_steps < 0 or self.decision_epochs < 0:
            raise ConfigError("epochs and max_steps must be non-negative")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ConfigError("decision_threshold must lie in (0, 1)")
        if len(self.decision_hidden) != 2 or min(self.decision_hidden) < 1:
            raise ConfigError("decision_hidden needs two positive sizes")
        return self

    @property
    def model_id(self):
        return "-".join(self.losses + [self.variant])

    @property
    def nss_enabled(self):
        return "NSS" in self.losses

    def backbone_config(self):
        return BackboneConfig(self.input_h, self.input_w, list(self.block_channels), self.feature_channels, self.dilation_last)

    def loss_config(self):
        return LossConfig.from_terms(self.losses, self.kl_epsilon)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**d)

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return RunConfig.from_dict(d)


def _field_types():
    return {f.name: type(f.default) if f.default is not dataclasses.MISSING else list for f in fields(RunConfig)}


_LIST_ITEM = {"losses": str, "block_channels": int, "decision_hidden": int}


def parse_value(key, text):
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key: {key}")
    text = text.strip()
    kind = types[key]
    try:
        if kind is list:
            item = _LIST_ITEM[key]
            return [item(v.strip()) for v in text.split(",") if v.strip()]
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text, base=None):
    d = (base or RunConfig()).to_dict()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        d[key] = parse_value(key, value)
    return RunConfig.from_dict(d)


def format_config(cfg):
    return "".join(f"{f.name} = {format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)
