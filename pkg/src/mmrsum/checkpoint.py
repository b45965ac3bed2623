"""Checkpoint archive: vocab, parameter arrays, and run metadata.

A checkpoint is a ZIP holding little-endian float64 ``.npy`` entries, one
per parameter, under ``encoder/<name>``, ``extractor/<name>``, and
``critic/<name>``, plus ``vocab.json`` (token -> id) and ``meta.json``
(dims, seed, variant, beta, K). Entries are written in sorted order with
fixed timestamps, so identical models produce byte-identical files.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .encoder import Dims, HierarchicalEncoder, Vocab

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _module_arrays(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {
        f"{prefix}/{name}": p.detach().numpy().astype("<f8")
        for name, p in module.named_parameters()
    }


def save_checkpoint(
    path: str | Path,
    vocab: Vocab,
    meta: dict[str, Any],
    encoder: torch.nn.Module,
    extractor: torch.nn.Module,
    critic: torch.nn.Module | None = None,
) -> None:
    arrays = _module_arrays("encoder", encoder)
    arrays.update(_module_arrays("extractor", extractor))
    if critic is not None:
        arrays.update(_module_arrays("critic", critic))
    entries: dict[str, bytes] = {}
    for name, arr in arrays.items():
        buf = io.BytesIO()
        np.save(buf, arr, allow_pickle=False)
        entries[f"{name}.npy"] = buf.getvalue()
    entries["vocab.json"] = json.dumps(
        vocab.token_to_id, sort_keys=True, ensure_ascii=False
    ).encode("utf-8")
    entries["meta.json"] = json.dumps(meta, sort_keys=True).encode("utf-8")

    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(entries):
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            zf.writestr(info, entries[name])


def load_checkpoint(path: str | Path) -> dict[str, Any]:
    """Raw checkpoint contents: meta dict, vocab, and name -> array map."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    arrays: dict[str, np.ndarray] = {}
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        vocab = Vocab(json.loads(zf.read("vocab.json")))
        for name in zf.namelist():
            if name.endswith(".npy"):
                arrays[name[: -len(".npy")]] = np.load(io.BytesIO(zf.read(name)))
    return {"meta": meta, "vocab": vocab, "arrays": arrays}


def _load_module(prefix: str, module: torch.nn.Module, arrays: dict[str, np.ndarray]) -> None:
    with torch.no_grad():
        for name, p in module.named_parameters():
            key = f"{prefix}/{name}"
            if key not in arrays:
                raise KeyError(f"checkpoint missing parameter {key!r}")
            arr = arrays[key]
            if tuple(arr.shape) != tuple(p.shape):
                raise ValueError(
                    f"shape mismatch for {key}: file {arr.shape}, model {tuple(p.shape)}"
                )
            p.copy_(torch.from_numpy(arr.astype(np.float64)))


def restore_models(raw: dict[str, Any]):
    """Rebuild encoder/extractor(/critic) modules from a loaded checkpoint."""
    from .extractor import PointerExtractor
    from .training import Critic

    meta = raw["meta"]
    dims = Dims(**meta["dims"])
    vocab = raw["vocab"]
    encoder = HierarchicalEncoder(vocab, dims)
    extractor = PointerExtractor(
        dims, meta.get("variant", "vanilla"), meta.get("beta", 0.5), meta.get("k")
    )
    _load_module("encoder", encoder, raw["arrays"])
    _load_module("extractor", extractor, raw["arrays"])
    critic = None
    if any(name.startswith("critic/") for name in raw["arrays"]):
        critic = Critic(dims)
        _load_module("critic", critic, raw["arrays"])
    return encoder, extractor, critic, meta
