"""Binary model bundles.

Layout (little endian):

    magic "TOPN" | u32 version | u32 n_descriptors
    per descriptor: u32 byte length | utf-8 layer descriptor string
    u32 rank | u32 input_shape[rank]          (shape without the batch axis)
    u64 weight byte count | float32 weight data
    u32 json length | utf-8 json metadata

Weights are concatenated in layer order; within a layer, parameter arrays
are written in sorted key order (matching Model.get_weights). The metadata
object always carries "bottleneck" (encoder layer count, -1 when not an
autoencoder) plus whatever the caller supplies.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from ..errors import FormatError
from .model import from_descriptors

MAGIC = b"TOPN"
BUNDLE_VERSION = 1


def save_bundle(path, model, metadata=None):
    meta = dict(metadata or {})
    meta.setdefault("bottleneck", int(getattr(model, "bottleneck", -1)))
    descs = model.descriptors()
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", BUNDLE_VERSION, len(descs))
    for d in descs:
        raw = d.encode("utf-8")
        blob += struct.pack("<I", len(raw)) + raw
    shape = model.input_shape
    blob += struct.pack("<I", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)
    weights = [np.ascontiguousarray(w, dtype="<f4") for w in model.get_weights()]
    payload = b"".join(w.tobytes() for w in weights)
    blob += struct.pack("<Q", len(payload)) + payload
    raw_meta = json.dumps(meta, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(raw_meta)) + raw_meta
    with open(path, "wb") as fh:
        fh.write(blob)
    return hashlib.sha256(bytes(blob)).hexdigest()


class _Cursor:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated bundle while reading {what}", offset=self.pos
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what):
        return struct.unpack("<Q", self.take(8, what))[0]


def load_bundle(path):
    """Read a bundle; returns (model, metadata dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    if cur.take(4, "magic") != MAGIC:
        raise FormatError("not a model bundle (bad magic)", offset=0)
    version = cur.u32("version")
    if version != BUNDLE_VERSION:
        raise FormatError(f"unsupported bundle version {version}", offset=4)
    n_desc = cur.u32("descriptor count")
    descs = []
    for i in range(n_desc):
        ln = cur.u32(f"descriptor {i} length")
        try:
            descs.append(cur.take(ln, f"descriptor {i}").decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"descriptor {i} is not valid utf-8", offset=cur.pos) from exc
    rank = cur.u32("input rank")
    if rank == 0 or rank > 8:
        raise FormatError(f"implausible input rank {rank}", offset=cur.pos - 4)
    shape = struct.unpack(f"<{rank}I", cur.take(4 * rank, "input shape"))

    model = from_descriptors(descs, shape)
    payload_len = cur.u64("weight byte count")
    expected = 4 * model.n_parameters()
    if payload_len != expected:
        raise FormatError(
            f"weight payload holds {payload_len} bytes, architecture needs {expected}",
            offset=cur.pos - 8,
        )
    payload = cur.take(payload_len, "weights")
    flat = np.frombuffer(payload, dtype="<f4")
    weights = []
    offset = 0
    for _, _, p in model.parameters():
        weights.append(flat[offset : offset + p.size].reshape(p.shape))
        offset += p.size
    model.set_weights(weights)

    meta_len = cur.u32("metadata length")
    raw_meta = cur.take(meta_len, "metadata")
    try:
        meta = json.loads(raw_meta.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError("metadata is not valid json", offset=cur.pos - meta_len) from exc
    if cur.pos != len(data):
        raise FormatError(
            f"{len(data) - cur.pos} trailing bytes after metadata", offset=cur.pos
        )
    bn = int(meta.get("bottleneck", -1))
    if bn >= 0:
        model.bottleneck = bn
    return model, meta


def bundle_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
