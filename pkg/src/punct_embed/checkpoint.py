"""Binary checkpoint files.

Layout (little-endian)::

    magic      8 bytes  b"PEMBCKPT"
    version    u32
    config     u32 length + UTF-8 JSON
    vocab      u32 length + UTF-8 JSON list of tokens
    n_params   u32
    n_params x ( u16 name length, name, u8 ndim, ndim x u32 dims, float32 data )
    crc32      u32 over everything above
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .model import Model, ModelConfig, ModelParams
from .tensor import Parameter
from .text import EmbeddingTable, Vocabulary

MAGIC = b"PEMBCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


class ConfigMismatchError(CheckpointError):
    pass


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def checkpoint_bytes(model: Model) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    for blob in (_json_bytes(model.config.to_dict()), _json_bytes(model.vocab.itos)):
        parts += [struct.pack("<I", len(blob)), blob]
    params = model.params.parameters()
    parts.append(struct.pack("<I", len(params)))
    for p in params:
        name = p.name.encode("utf-8")
        parts += [struct.pack("<H", len(name)), name, struct.pack("<B", p.data.ndim)]
        parts += [struct.pack("<I", d) for d in p.data.shape]
        parts.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(model: Model, path):
    Path(path).write_bytes(checkpoint_bytes(model))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def load_checkpoint(path, expected: ModelConfig | None = None) -> Model:
    """Rebuild a :class:`Model`; ``expected`` must agree on the variant and dimensions if given."""
    buf = Path(path).read_bytes()
    if len(buf) < len(MAGIC) + 8:
        raise CheckpointError("checkpoint is truncated")
    if buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    r = _Reader(buf)
    r.take(len(MAGIC))
    version = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    body, crc = buf[:-4], struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: checksum mismatch (corrupted or truncated file)")
    try:
        config = ModelConfig.from_dict(json.loads(r.take(r.unpack("<I")).decode("utf-8")))
        vocab = Vocabulary(json.loads(r.take(r.unpack("<I")).decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from None

    if expected is not None:
        mine, theirs = config.to_dict(), expected.to_dict()
        diff = sorted(k for k in mine if k != "seed" and mine[k] != theirs[k])
        if diff:
            detail = ", ".join(f"{k}: checkpoint={mine[k]!r} expected={theirs[k]!r}" for k in diff)
            raise ConfigMismatchError(f"checkpoint config does not match ({detail})")

    blobs = {}
    for _ in range(r.unpack("<I")):
        name = r.take(r.unpack("<H")).decode("utf-8")
        shape = tuple(r.unpack("<I") for _ in range(r.unpack("<B")))
        count = int(np.prod(shape)) if shape else 1
        blobs[name] = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape).astype(np.float64)
    if r.pos != len(buf) - 4:
        raise CheckpointError("trailing bytes after parameter blobs")

    placeholder = Parameter(np.zeros((len(vocab), config.embedding_dim)), name="embedding")
    table = EmbeddingTable(placeholder, np.zeros(len(vocab), dtype=bool))
    params = ModelParams.init(config, table)
    named = params.named_parameters()
    if set(named) != set(blobs):
        raise ConfigMismatchError(
            f"parameter names differ from config: missing {sorted(set(named) - set(blobs))}, "
            f"unexpected {sorted(set(blobs) - set(named))}"
        )
    for name, p in named.items():
        if blobs[name].shape != p.data.shape:
            raise ConfigMismatchError(f"parameter {name}: shape {blobs[name].shape} != expected {p.data.shape}")
        p.data[...] = blobs[name]
    return Model(config, params, vocab)

