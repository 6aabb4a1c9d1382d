"""Model/training and run configuration (JSON-serializable dataclasses)."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

NR_MODES = ("prefilter", "hybrid", "fine")
COMMANDS = ("train", "predict", "evaluate")
SINGLETON_MODES = ("included", "excluded", "both")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    # encoder
    bilstm_layers: int = 3
    bilstm_size: int = 200
    bilstm_dropout: float = 0.4
    use_char_cnn: bool = True
    cnn_widths: tuple = (3, 4, 5)
    cnn_filters: int = 50
    char_emb_size: int = 8
    num_char_buckets: int = 256
    embedding_dropout: float = 0.5
    word_emb_kind: str = "hashed"
    word_emb_path: Optional[str] = None
    word_emb_dim: int = 300
    contextual_emb_path: Optional[str] = None
    contextual_reducer: str = "concat"
    contextual_layers: int = 4
    # scorers and features
    ffnn_layers: int = 2
    ffnn_size: int = 150
    ffnn_dropout: float = 0.2
    feature_size: int = 20
    max_span_width: int = 30
    mention_ratio: float = 0.4
    max_clusters: int = 250
    genres: list = field(default_factory=list)
    # decoder / model variants
    nr_mode: str = "hybrid"
    threshold: float = 0.5
    use_history: bool = True
    use_position_emb: bool = True
    use_width_emb: bool = True
    head_feature: bool = False
    oracle_clusters: bool = True
    train_with_singletons_nr: bool = True
    # weight of an auxiliary sigmoid loss on s_m over all candidate spans; 0 disables it
    mention_loss_weight: float = 0.0
    # optimization
    learning_rate: float = 1e-3
    decay_rate: float = 0.999
    decay_frequency: int = 100
    train_steps: int = 200_000
    max_train_tokens: int = 2000
    log_frequency: int = 100
    eval_frequency: int = 1000
    seed: int = 0

    def __post_init__(self):
        self.cnn_widths = tuple(int(w) for w in self.cnn_widths)
        self.genres = list(self.genres)
        self.validate()

    def validate(self) -> None:
        for name in ("bilstm_dropout", "embedding_dropout", "ffnn_dropout", "mention_ratio", "decay_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("bilstm_layers", "bilstm_size", "cnn_filters", "char_emb_size", "ffnn_layers",
                     "ffnn_size", "feature_size", "max_span_width", "max_clusters", "decay_frequency",
                     "word_emb_dim", "num_char_buckets", "contextual_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.cnn_widths or min(self.cnn_widths) < 1:
            raise ConfigError("cnn_widths must be non-empty positive integers")
        if self.nr_mode not in NR_MODES:
            raise ConfigError(f"nr_mode must be one of {NR_MODES}, got {self.nr_mode!r}")
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0")
        if self.mention_loss_weight < 0:
            raise ConfigError("mention_loss_weight must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.train_steps < 0:
            raise ConfigError("train_steps must be >= 0")
        if self.word_emb_kind not in ("static", "hashed"):
            raise ConfigError("word_emb_kind must be 'static' or 'hashed'")
        if self.contextual_reducer not in ("concat", "mean"):
            raise ConfigError("contextual_reducer must be 'concat' or 'mean'")

    @property
    def fine_nr(self) -> bool:
        return self.nr_mode == "fine"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cnn_widths"] = list(self.cnn_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class RunConfig:
    command: str = "train"
    train_path: Optional[str] = None
    dev_path: Optional[str] = None
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    output_dir: Optional[str] = None
    checkpoint_path: Optional[str] = None
    key_path: Optional[str] = None
    response_path: Optional[str] = None
    singletons: str = "both"
    seed: int = 0
    model: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = TrainConfig.from_dict(self.model)
        self.validate()

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.singletons not in SINGLETON_MODES:
            raise ConfigError(f"singletons must be one of {SINGLETON_MODES}")
        self.model.validate()

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "model"}
        d["model"] = self.model.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run config keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        d["model"] = TrainConfig.from_dict(d.get("model", {}))
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))
