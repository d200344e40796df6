"""Binary checkpoints.

Layout (all integers little-endian)::

    b"CFWG"  u32 version  u8 model kind  u32 network count
    per network: u32 layer count L, (L + 1) x u32 layer sizes, u8 output activation
    per network, per layer: weights (row-major float64), then bias (float64)
    u32 metadata length, UTF-8 JSON metadata
    32-byte SHA-256 of everything above
"""

from __future__ import annotations

import enum
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import ParamSet
from .errors import DataError
from .models import OUTPUT_ACTIVATIONS, MlpSpec, Network, check_params, layer_names

MAGIC = b"CFWG"
VERSION = 1


class ModelKind(enum.IntEnum):
    CFWGAN_GP = 1
    CFGAN_VANILLA = 2
    MLC = 3
    ITEMPOP = 4


class CheckpointError(DataError):
    code = "checkpoint-error"


class NotACheckpointError(CheckpointError):
    code = "not-a-checkpoint"


class VersionMismatchError(CheckpointError):
    code = "version-mismatch"


class DigestMismatchError(CheckpointError):
    code = "digest-mismatch"


class TruncatedCheckpointError(CheckpointError):
    code = "truncated"


def to_bytes(kind: ModelKind, networks: list[Network], meta: dict | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<IBI", VERSION, int(ModelKind(kind)), len(networks))]
    for net in networks:
        spec = net.spec
        parts.append(struct.pack(f"<I{len(spec.sizes)}I", spec.n_layers, *spec.sizes))
        parts.append(struct.pack("<B", OUTPUT_ACTIVATIONS.index(spec.output)))
    for net in networks:
        check_params(net.spec, net.params)
        for i in range(net.spec.n_layers):
            for name in layer_names(i):
                parts.append(np.ascontiguousarray(net.params[name], dtype="<f8").tobytes())
    blob = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError("checkpoint is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def from_bytes(data: bytes) -> tuple[ModelKind, list[Network], dict]:
    if data[:4] != MAGIC:
        raise NotACheckpointError("not a checkpoint (bad magic bytes)")
    r = _Reader(data)
    r.take(4)
    version, kind, count = r.unpack("<IBI")
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, expected {VERSION}")
    try:
        kind = ModelKind(kind)
    except ValueError:
        raise CheckpointError(f"unknown model kind {kind}") from None
    specs = []
    for _ in range(count):
        (n_layers,) = r.unpack("<I")
        sizes = r.unpack(f"<{n_layers + 1}I")
        (act,) = r.unpack("<B")
        if act >= len(OUTPUT_ACTIVATIONS):
            raise CheckpointError(f"unknown output activation code {act}")
        specs.append(MlpSpec(sizes, OUTPUT_ACTIVATIONS[act]))
    networks = []
    for spec in specs:
        params = ParamSet()
        for i, (fan_in, fan_out) in enumerate(zip(spec.sizes[:-1], spec.sizes[1:])):
            w, b = layer_names(i)
            params[w] = np.frombuffer(r.take(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out).astype(np.float64)
            params[b] = np.frombuffer(r.take(8 * fan_out), dtype="<f8").astype(np.float64)
        networks.append(Network(spec, params))
    (meta_len,) = r.unpack("<I")
    meta = r.take(meta_len)
    body_end = r.pos
    digest = r.take(32)
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint digest")
    if hashlib.sha256(data[:body_end]).digest() != digest:
        raise DigestMismatchError("checkpoint digest mismatch (corrupted file)")
    return kind, networks, json.loads(meta.decode("utf-8"))


def checkpoint_save(path, kind: ModelKind, networks: list[Network], meta: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(kind, networks, meta))


def checkpoint_load(path) -> tuple[ModelKind, list[Network], dict]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return from_bytes(path.read_bytes())
