"""Run configuration: a flat ``key = value`` text format with ``#``
comments, fixed defaults for every key, strict unknown-key rejection, and
CLI-flag overrides layered on top.

Schema (defaults in parentheses):

    data.csv              path to the input CSV                        ("")
    data.label_column     label column name                      ("family")
    data.drop_columns     comma list of identifier columns to drop     ("")
    data.missing_markers  comma list of missing markers; the empty
                          cell is always treated as missing        ("NA,?")
    data.benign_label     label value marking benign rows         ("benign")
    data.family           family for binary mode                       ("")
    data.families         comma list for multiclass mode               ("")
    data.mode             binary | multiclass | raw               ("binary")
    pipeline.eta          validation fraction                         (0.2)
    pipeline.seed         master seed                                   (7)
    pipeline.drop_threshold  missing-ratio drop threshold             (0.5)
    rfe.enabled           run feature elimination                    (true)
    rfe.target_features   surviving feature count                     (100)
    rfe.step_fraction     share of survivors removed per round        (0.1)
    rfe.surrogate         linear_softmax | dicnn           (linear_softmax)
    model.channels        conv channels                                (32)
    model.kernel_size     conv kernel size                              (3)
    model.dilations       comma list of per-block dilations         (1,2,4)
    train.learning_rate   Adam step size                            (0.001)
    train.batch_size      mini-batch size                             (128)
    train.max_epochs      epoch budget                                 (50)
    train.patience        early-stop patience                           (5)
    fgsm.enabled          adversarial training on/off                (true)
    fgsm.epsilon          training perturbation size                 (0.05)
    fgsm.mix_ratio        perturbed share of each batch               (0.5)
    attack.epsilons       sweep sizes                     (0,0.01,0.05,0.1)
    out.dir               artifact directory                    ("runs/out")
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError

ENV_CONFIG_VAR = "DICNN_CONFIG"
TOOL_VERSION = "0.1.0"

_SCHEMA: dict[str, tuple[str, object]] = {
    "data.csv": ("str", ""),
    "data.label_column": ("str", "family"),
    "data.drop_columns": ("list_str", []),
    "data.missing_markers": ("list_str", ["NA", "?"]),
    "data.benign_label": ("str", "benign"),
    "data.family": ("str", ""),
    "data.families": ("list_str", []),
    "data.mode": ("str", "binary"),
    "pipeline.eta": ("float", 0.2),
    "pipeline.seed": ("int", 7),
    "pipeline.drop_threshold": ("float", 0.5),
    "rfe.enabled": ("bool", True),
    "rfe.target_features": ("int", 100),
    "rfe.step_fraction": ("float", 0.1),
    "rfe.surrogate": ("str", "linear_softmax"),
    "model.channels": ("int", 32),
    "model.kernel_size": ("int", 3),
    "model.dilations": ("list_int", [1, 2, 4]),
    "train.learning_rate": ("float", 1e-3),
    "train.batch_size": ("int", 128),
    "train.max_epochs": ("int", 50),
    "train.patience": ("int", 5),
    "fgsm.enabled": ("bool", True),
    "fgsm.epsilon": ("float", 0.05),
    "fgsm.mix_ratio": ("float", 0.5),
    "attack.epsilons": ("list_float", [0.0, 0.01, 0.05, 0.1]),
    "out.dir": ("str", "runs/out"),
}


def _coerce(key: str, kind: str, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind == "str":
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        parts = [p.strip() for p in text.split(",") if p.strip() != ""]
        if kind == "list_str":
            return parts
        if kind == "list_int":
            return [int(p) for p in parts]
        if kind == "list_float":
            return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from None
    raise ConfigError(f"internal: unknown schema kind {kind!r}")


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {key: default for key, (_, default) in _SCHEMA.items()}
        unknown = set(self.values) - set(_SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, raw in self.values.items():
            merged[key] = _coerce(key, _SCHEMA[key][0], raw)
        self.values = merged
        if self.values["data.mode"] not in ("binary", "multiclass", "raw"):
            raise ConfigError(
                f"data.mode must be binary, multiclass, or raw, "
                f"got {self.values['data.mode']!r}"
            )

    def __getitem__(self, key: str):
        return self.values[key]

    def override(self, key: str, raw) -> None:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = _coerce(key, _SCHEMA[key][0], raw)

    def snapshot(self) -> dict:
        return dict(self.values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(parse_config_text(fh.read(), origin=str(path)))


@dataclass
class RunManifest:
    config: dict
    artifact_hashes: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    achieved: dict[str, float] = field(default_factory=dict)
    tool_version: str = TOOL_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "tool_version": self.tool_version,
                "config": self.config,
                "artifact_hashes": self.artifact_hashes,
                "timings": self.timings,
                "achieved": self.achieved,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        raw = json.loads(text)
        return cls(
            config=raw["config"],
            artifact_hashes=raw.get("artifact_hashes", {}),
            timings=raw.get("timings", {}),
            achieved=raw.get("achieved", {}),
            tool_version=raw.get("tool_version", TOOL_VERSION),
        )
