"""Binary checkpoint format.

Layout::

    b"KGCXCKPT1\\n"
    <uint64 little-endian header length>
    <UTF-8 JSON header: {"manifest": [{name, shape, dtype, offset, nbytes}, ...], ...extra}>
    <raw little-endian parameter block>

Extra header keys (model config, vocabulary hash, ...) are free-form JSON.
"""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from ..errors import CompatibilityError

MAGIC = b"KGCXCKPT1\n"


def save_checkpoint(path, arrays, header: dict | None = None) -> None:
    manifest, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": le.dtype.str,
                         "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    head = dict(header or {})
    head["manifest"] = manifest
    head_bytes = json.dumps(head, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(head_bytes)))
        fh.write(head_bytes)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CompatibilityError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    (hlen,) = struct.unpack("<Q", data[pos:pos + 8])
    pos += 8
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    base = pos + hlen
    arrays = OrderedDict()
    for entry in header["manifest"]:
        start = base + entry["offset"]
        buf = data[start:start + entry["nbytes"]]
        arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        arrays[entry["name"]] = arr.astype(arr.dtype.newbyteorder("="))
    return arrays, header
