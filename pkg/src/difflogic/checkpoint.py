"""Deterministic binary checkpoints: one JSON header line, then raw
little-endian f64 array payloads in manifest order."""

import json

import numpy as np

from .machine import MachineConfig, MachineParams, Model, AffineHead
from .nn import MLPParams
from . import machine

MAGIC = b"DLCK0001\n"
FORMAT_VERSION = 1


def save_checkpoint(path, model: Model, task: str, rng_seed: int,
                    metadata: dict | None = None, extra_arrays: dict | None = None):
    arrays = dict(machine.named_arrays(model))
    if extra_arrays:
        arrays.update(extra_arrays)
    names = sorted(arrays)
    manifest = [{"name": n, "shape": list(np.shape(arrays[n]))} for n in names]
    header = {
        "format_version": FORMAT_VERSION,
        "task": task,
        "config": model.config.to_dict(),
        "heads": sorted(model.heads),
        "rng_seed": int(rng_seed),
        "metadata": metadata or {},
        "arrays": manifest,
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
        fh.write(b"\n")
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (model, header dict, extra arrays such as optimizer moments)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    rest = blob[len(MAGIC):]
    newline = rest.index(b"\n")
    header = json.loads(rest[:newline].decode())
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['format_version']}")
    payload = rest[newline + 1:]
    arrays = {}
    offset = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += count * 8

    config = MachineConfig.from_dict(header["config"])
    n_affines = config.hidden_layers + 1
    mlps = []
    for i in range(config.depth):
        row = []
        for r in range(config.breadth + 1):
            ws = [arrays.pop(f"layer{i + 1}.arity{r}.w{k}") for k in range(n_affines)]
            bs = [arrays.pop(f"layer{i + 1}.arity{r}.b{k}") for k in range(n_affines)]
            row.append(MLPParams(ws, bs))
        mlps.append(row)
    heads = {
        name: AffineHead(arrays.pop(f"head.{name}.w"), arrays.pop(f"head.{name}.b"))
        for name in header["heads"]
    }
    model = Model(config, MachineParams(mlps), heads)
    return model, header, arrays
