"""Experiment configuration: schema, validation, JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

REFERENCE_MODES = ("ground-truth", "static-recon")
I1_SOURCES = ("last-pair", "mean-of-pairs")


@dataclass
class ExperimentConfig:
    """Everything one run needs; round-trips losslessly through JSON."""

    name: str
    field_size: int
    object_spec: dict
    trajectory: dict
    n: int = 2
    num_pairs: int = 64
    noise: dict = field(default_factory=lambda: {"kind": "none", "sigma": 0.0, "seed": 0})
    snapshot_taus: list = field(default_factory=list)
    reference_mode: str = "ground-truth"
    i1_source: str = "last-pair"
    ordering: str = "cake-cut"
    output_dir: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.field_size < 2 or self.field_size & (self.field_size - 1):
            raise ConfigError(f"field_size must be a power of two, got {self.field_size}")
        if self.n < 2 or self.n % 2:
            raise ConfigError(f"n must be an even integer >= 2, got {self.n}")
        if self.num_pairs < 1:
            raise ConfigError(f"num_pairs must be positive, got {self.num_pairs}")
        if self.reference_mode not in REFERENCE_MODES:
            raise ConfigError(
                f"reference_mode must be one of {REFERENCE_MODES}, got {self.reference_mode!r}"
            )
        if self.i1_source not in I1_SOURCES:
            raise ConfigError(f"i1_source must be one of {I1_SOURCES}")
        if self.ordering not in ("cake-cut", "natural"):
            raise ConfigError(f"ordering must be cake-cut or natural, got {self.ordering!r}")
        kind = self.object_spec.get("kind")
        if kind == "builtin":
            if "name" not in self.object_spec:
                raise ConfigError("builtin object needs a name")
        elif kind == "file":
            if "path" not in self.object_spec:
                raise ConfigError("file object needs a path")
        else:
            raise ConfigError(f"object kind must be builtin or file, got {kind!r}")
        if "model" not in self.trajectory:
            raise ConfigError("trajectory needs a model")
        nk = self.noise.get("kind", "none")
        if nk not in ("none", "gaussian"):
            raise ConfigError(f"noise kind must be none or gaussian, got {nk!r}")
        if float(self.noise.get("sigma", 0.0)) < 0:
            raise ConfigError("noise sigma must be >= 0")
        bad = [t for t in self.snapshot_taus if int(t) < 1]
        if bad:
            raise ConfigError(f"snapshot taus must be positive, got {bad}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["object"] = d.pop("object_spec")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "object" in d:
            d["object_spec"] = d.pop("object")
        try:
            cfg = cls(**d)
        except TypeError as e:
            raise ConfigError(f"bad config fields: {e}") from e
        return cfg.validate()

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(doc)


def apply_overrides(config: ExperimentConfig, overrides: dict[str, str]) -> ExperimentConfig:
    """Apply ``key=value`` overrides with dotted paths into nested fields.

    Values parse as JSON when possible ("2", "true", "[1,2]"), otherwise
    as plain strings, so ``--set trajectory.params.max_step=10`` works.
    """
    doc = config.to_dict()
    for key, raw in overrides.items():
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(doc)
