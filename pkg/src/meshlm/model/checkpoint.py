"""Single-file binary checkpoint container.

Layout: 8-byte magic, u64 little-endian manifest length, UTF-8 JSON
manifest {config, params: [{name, shape, dtype}...]}, then the raw
little-endian parameter bytes concatenated in manifest order.
"""

import json
import struct

import numpy as np

from ..errors import DataError
from ..numerics.autodiff import Var
from .config import config_from_dict, config_to_dict
from .network import Model

MAGIC = b"MESHCKPT"
_WIRE = {"f32": "<f4", "f64": "<f8"}
_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


def save_checkpoint(path, model):
    entries = []
    blobs = []
    for name, var in model.params.items():
        dtype = _NAMES[var.data.dtype]
        entries.append({"name": name, "shape": list(var.data.shape),
                        "dtype": dtype})
        blobs.append(np.ascontiguousarray(var.data).astype(
            _WIRE[dtype], copy=False).tobytes())
    manifest = json.dumps({"config": config_to_dict(model.cfg),
                           "params": entries}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise DataError(f"{path} is not a meshlm checkpoint")
    (mlen,) = struct.unpack("<Q", raw[8:16])
    manifest = json.loads(raw[16:16 + mlen].decode())
    cfg = config_from_dict(manifest["config"])
    params = {}
    offset = 16 + mlen
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        wire = np.dtype(_WIRE[entry["dtype"]])
        nbytes = wire.itemsize * int(np.prod(shape)) if shape else wire.itemsize
        arr = np.frombuffer(raw, dtype=wire, count=int(np.prod(shape)),
                            offset=offset).reshape(shape)
        offset += nbytes
        params[entry["name"]] = Var(
            arr.astype(wire.newbyteorder("=")).copy(), requires_grad=True)
    if offset != len(raw):
        raise DataError("checkpoint has trailing bytes beyond the manifest")
    return Model(cfg, params)
