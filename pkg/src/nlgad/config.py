"""Run configuration: flat key-value file format with content hashing.

Every CLI output directory gets the exact serialized config that produced
it; the sha256 content hash ties checkpoints and metrics to that config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError

MODES = ("full", "aas", "ols", "osp", "snp")

# pool-admission behavior per ablation mode; None skips the pool entirely
_MODE_POOL = {"full": "dynamic", "aas": "all", "ols": "last", "osp": "none",
              "snp": "none"}


@dataclass
class RunConfig:
    """All pipeline hyperparameters, with the published defaults."""

    subgraph_size: int = 4
    hidden_dim: int = 64
    gcn_layers: int = 1
    learning_rate: float = 0.001
    alpha: float = 0.6
    k_normal: float = 0.8
    t_select: int = 0          # 0 = auto: 200 for n < 5000, else 300
    t_refine: int = 0          # 0 = auto: 500 for n < 5000, else 600
    batch_size: int = 300
    rounds: int = 256
    restart_prob: float = 0.5
    seed: int = 0
    mode: str = "full"
    total_anomalies: int = 30
    candidate_pool_size: int = 50
    clique_size: int = 15

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.k_normal <= 1.0:
            raise ConfigError(f"k_normal must be in (0, 1], got {self.k_normal}")
        if self.subgraph_size < 2:
            raise ConfigError("subgraph_size must be >= 2")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.hidden_dim < 1 or self.gcn_layers < 1:
            raise ConfigError("hidden_dim and gcn_layers must be >= 1")
        if not 0.0 < self.restart_prob < 1.0:
            raise ConfigError("restart_prob must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.t_select < 0 or self.t_refine < 0:
            raise ConfigError("t_select and t_refine must be >= 0")

    def resolved_t_select(self, n: int) -> int:
        if self.t_select > 0:
            return self.t_select
        return 200 if n < 5000 else 300

    def resolved_t_refine(self, n: int) -> int:
        if self.t_refine > 0:
            return self.t_refine
        return 500 if n < 5000 else 600

    @property
    def pool_mode(self) -> str:
        return _MODE_POOL[self.mode]

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.canonical_text())

    @classmethod
    def load(cls, path) -> "RunConfig":
        values = {}
        try:
            f = open(path, "r", encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}")
        with f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
        return cls.from_strings(values, source=str(path))

    @classmethod
    def from_strings(cls, values: dict, source: str = "config") -> "RunConfig":
        """Build from string values, e.g. a parsed file or CLI overrides."""
        kwargs = {}
        by_name = {f.name: f for f in fields(cls)}
        for key, val in values.items():
            if key not in by_name:
                raise ConfigError(f"{source}: unknown config key {key!r}")
            typ = by_name[key].type
            try:
                if typ == "int":
                    kwargs[key] = int(val)
                elif typ == "float":
                    kwargs[key] = float(val)
                else:
                    kwargs[key] = str(val)
            except ValueError:
                raise ConfigError(f"{source}: bad value for {key!r}: {val!r}")
        return cls(**kwargs)
