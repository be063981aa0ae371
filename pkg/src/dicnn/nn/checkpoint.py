"""JSON checkpoints: architecture, parameters, init seed, and the
preprocessing state (column statistics + feature mask) needed to run the
saved model on raw rows without the training pipeline."""

from __future__ import annotations

import json

import numpy as np

from ..errors import CompatibilityError, SchemaError
from .network import DicnnNetwork, LayerSpec, arch_id

SCHEMA_VERSION = 1


def checkpoint_to_dict(network: DicnnNetwork, preprocess: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "arch_id": network.arch_id,
        "input_width": network.input_width,
        "init_seed": network.init_seed,
        "layers": [spec.to_dict() for spec in network.specs],
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in network.parameters()
        },
        "preprocess": preprocess or {},
    }


def checkpoint_from_dict(raw: dict) -> tuple[DicnnNetwork, dict]:
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported checkpoint schema_version {raw.get('schema_version')!r}"
        )
    for key in ("arch_id", "input_width", "init_seed", "layers", "params"):
        if key not in raw:
            raise SchemaError(f"checkpoint missing key {key!r}")
    specs = [LayerSpec.from_dict(d) for d in raw["layers"]]
    recomputed = arch_id(specs, raw["input_width"])
    if recomputed != raw["arch_id"]:
        raise CompatibilityError(
            f"checkpoint arch_id {raw['arch_id']} does not match its own "
            f"architecture ({recomputed}); refusing to load"
        )
    network = DicnnNetwork(specs, raw["input_width"], raw["init_seed"])
    named = {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in raw["params"].items()
    }
    expected = {name for name, _ in network.parameters()}
    if expected != set(named):
        raise SchemaError(
            f"checkpoint parameters {sorted(named)} do not match "
            f"architecture parameters {sorted(expected)}"
        )
    network.set_parameters(named)
    return network, raw.get("preprocess", {})


def save_checkpoint(path, network: DicnnNetwork, preprocess: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_to_dict(network, preprocess), fh, sort_keys=True)


def load_checkpoint(path) -> tuple[DicnnNetwork, dict]:
    with open(path, encoding="utf-8") as fh:
        return checkpoint_from_dict(json.load(fh))
