"""Model checkpoints as ``.npz`` archives.

Layout (format version 1):

``meta``
    UTF-8 JSON stored as a ``uint8`` array with keys ``format``
    (``"hmcm-checkpoint"``), ``version``, ``config`` (the network config),
    ``fingerprint`` (SHA-256 of the hierarchy's label list), ``labels``,
    ``seed`` and ``layers`` (per-layer ``activation`` and ``frozen``).
``layer{k}_weight`` / ``layer{k}_bias``
    float64 parameters in forward order, weight shaped ``(fan_in, fan_out)``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FingerprintMismatch, HMCError
from .hierarchy import LabelHierarchy
from .network import Layer, ModelParams, NetworkConfig

FORMAT = "hmcm-checkpoint"
VERSION = 1


def save_checkpoint(path: str | Path, model: ModelParams, hier: LabelHierarchy) -> None:
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "fingerprint": hier.fingerprint(),
        "labels": list(hier.labels),
        "seed": model.config.seed,
        "layers": [{"activation": l.activation, "frozen": l.frozen} for l in model.layers],
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)}
    for k, layer in enumerate(model.layers):
        arrays[f"layer{k}_weight"] = layer.weight
        arrays[f"layer{k}_bias"] = layer.bias
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path, hier: LabelHierarchy | None = None) -> tuple[ModelParams, dict]:
    """Load a checkpoint; when ``hier`` is given its fingerprint must match."""
    with np.load(path, allow_pickle=False) as z:
        try:
            meta = json.loads(bytes(z["meta"]).decode("utf-8"))
        except KeyError:
            raise HMCError(f"{path}: not a checkpoint (no meta entry)") from None
        if meta.get("format") != FORMAT or meta.get("version") != VERSION:
            raise HMCError(f"{path}: unsupported checkpoint format {meta.get('format')!r} v{meta.get('version')}")
        layers = [
            Layer(z[f"layer{k}_weight"].copy(), z[f"layer{k}_bias"].copy(), spec["frozen"], spec["activation"])
            for k, spec in enumerate(meta["layers"])
        ]
    cfg = meta["config"]
    cfg["backbone_dims"] = tuple(cfg["backbone_dims"])
    model = ModelParams(NetworkConfig(**cfg), layers)
    if hier is not None and hier.fingerprint() != meta["fingerprint"]:
        raise FingerprintMismatch(
            f"{path}: checkpoint was trained on a different hierarchy "
            f"({meta['fingerprint'][:12]} vs {hier.fingerprint()[:12]})"
        )
    return model, meta
