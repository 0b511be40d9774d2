from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError

MODELS = ("textcnn", "cdssm", "mvlstm", "knrm", "bilstm_sa")

DEFAULT_LR = {
    "textcnn": 0.1,
    "cdssm": 0.01,
    "mvlstm": 0.01,
    "knrm": 0.001,
    "bilstm_sa": 0.01,
}


@dataclass
class RankerConfig:
    model: str = "textcnn"
    embedding_level: str = "phrase"
    filters: int = 32
    hidden: int = 32
    max_len: int = 512
    alpha: float = 0.85
    mlp_out: int = 128
    topk: int = 512
    mlp_dims: tuple[int, ...] = (64, 1)
    kernels: int = 32
    sigma: float = 0.05
    d_a: int = 100
    r: int = 15
    lr: float | None = None
    margin: float = 1.0
    epochs: int = 10
    seed: int = 0
    batch_size: int = 32
    optimizer: str = "adam"
    fine_tune: bool = False
    penalty: float = 0.0
    textcnn_widths: tuple[int, ...] = (1, 2, 3)
    cdssm_width: int = 3
    knrm_feature_scale: float = 0.1
    track_attention: int = 3
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if self.embedding_level not in ("word", "phrase"):
            raise ConfigError(f"unknown embedding level {self.embedding_level!r}")
        if self.lr is None:
            self.lr = DEFAULT_LR[self.model]
        self.mlp_dims = tuple(int(x) for x in self.mlp_dims)
        self.textcnn_widths = tuple(int(x) for x in self.textcnn_widths)
        sizes = [self.filters, self.hidden, self.max_len, self.mlp_out, self.topk, self.kernels,
                 self.d_a, self.r, self.batch_size, self.cdssm_width, *self.mlp_dims, *self.textcnn_widths]
        if min(sizes) < 1:
            raise ConfigError("all layer sizes must be >= 1")
        if self.mlp_dims[-1] != 1:
            raise ConfigError("the last MLP layer must produce a single score")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mlp_dims"] = list(self.mlp_dims)
        d["textcnn_widths"] = list(self.textcnn_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RankerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ranker config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def replace(self, **kw) -> "RankerConfig":
        d = self.to_dict()
        if "model" in kw and "lr" not in kw:
            d["lr"] = None
        d.update(kw)
        return RankerConfig.from_dict(d)


def load_config_file(path: str | Path) -> dict:
    """Read a flat key/value file: JSON, or YAML when PyYAML is importable."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            import yaml
        except ImportError as exc:  # pragma: no cover
            raise ConfigError(f"{path}: not JSON and PyYAML is unavailable") from exc
        data = yaml.safe_load(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data
