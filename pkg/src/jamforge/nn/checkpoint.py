"""Versioned binary model checkpoints (magic "ACS1").

Layout: 4-byte magic, u32 format version, u32 manifest length, JSON
manifest (layer specs plus named state-array entries and optional Adam
metadata), then the raw little-endian array blobs in manifest order:
model state first, then Adam first moments, then Adam second moments.
Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .layers import Model, layer_from_spec
from .optim import Adam

MAGIC = b"ACS1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """A checkpoint file does not parse; message names field and offset."""


def _entry(name: str, arr: np.ndarray) -> dict:
    return {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.newbyteorder("<").str}


def save_checkpoint(path, model: Model, adam: Adam | None = None) -> None:
    state = model.named_state()
    manifest = {
        "layers": model.specs(),
        "entries": [_entry(n, a) for n, a in state],
    }
    blobs = [np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
             for _, a in state]
    if adam is not None:
        names = [n for n, _ in model.named_params()]
        for n in names:
            if n not in adam.m:
                raise ValueError(f"adam state missing moments for parameter {n}")
        manifest["adam"] = {
            "t": adam.t, "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
            "eps": adam.eps,
            "entries": [_entry(n, adam.m[n]) for n in names],
        }
        blobs += [np.ascontiguousarray(adam.m[n]).tobytes() for n in names]
        blobs += [np.ascontiguousarray(adam.v[n]).tobytes() for n in names]
    else:
        manifest["adam"] = None

    mbytes = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(mbytes)))
        f.write(mbytes)
        for b in blobs:
            f.write(b)


def _read_blob(buf: bytes, offset: int, entry: dict):
    dtype = np.dtype(entry["dtype"])
    count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
    nbytes = count * dtype.itemsize
    if offset + nbytes > len(buf):
        raise CheckpointError(
            f"truncated checkpoint: entry {entry['name']!r} needs {nbytes} bytes at "
            f"offset {offset}, file has {len(buf)}")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=offset).reshape(entry["shape"])
    return arr.copy(), offset + nbytes


def load_checkpoint(path) -> tuple[Model, Adam | None]:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"bad magic at offset 0: {buf[:4]!r}, expected {MAGIC!r}")
    if len(buf) < 12:
        raise CheckpointError(f"truncated header: {len(buf)} bytes, need at least 12")
    version, mlen = struct.unpack_from("<II", buf, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {version} at offset 4, "
                              f"expected {FORMAT_VERSION}")
    if 12 + mlen > len(buf):
        raise CheckpointError(f"truncated manifest: needs {mlen} bytes at offset 12")
    try:
        manifest = json.loads(buf[12:12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"manifest at offset 12 is not valid JSON: {e}") from e

    first_dtype = np.dtype(manifest["entries"][0]["dtype"]) if manifest["entries"] else np.float32
    model = Model([layer_from_spec(d, dtype=first_dtype) for d in manifest["layers"]])
    state = dict(model.named_state())
    if [n for n, _ in model.named_state()] != [e["name"] for e in manifest["entries"]]:
        raise CheckpointError("manifest entries do not match the layer stack's state names")

    offset = 12 + mlen
    for entry in manifest["entries"]:
        arr, offset = _read_blob(buf, offset, entry)
        target = state[entry["name"]]
        if tuple(arr.shape) != tuple(target.shape):
            raise CheckpointError(f"entry {entry['name']!r} has shape {arr.shape}, "
                                  f"layer expects {target.shape}")
        target[...] = arr.astype(target.dtype, copy=False)

    adam = None
    if manifest.get("adam"):
        meta = manifest["adam"]
        adam = Adam(lr=meta["lr"], beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"])
        adam.t = int(meta["t"])
        for entry in meta["entries"]:
            arr, offset = _read_blob(buf, offset, entry)
            adam.m[entry["name"]] = arr
        for entry in meta["entries"]:
            arr, offset = _read_blob(buf, offset, entry)
            adam.v[entry["name"]] = arr
    if offset != len(buf):
        raise CheckpointError(f"{len(buf) - offset} unexpected trailing bytes at offset {offset}")
    return model, adam
