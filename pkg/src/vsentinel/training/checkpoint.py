"""Binary checkpoint format.

Layout (little-endian)::

    b"VSNT" | u32 version | u32 n | n bytes of UTF-8 JSON header
    then per parameter, until EOF:
    u32 name_len | name | u32 rank | u32 extents[rank] | f32 payload

The JSON header holds ``config`` (ModelConfig fields), ``seed``, ``epoch`` and
``classes``.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..nn.model import AnomalyNet, ModelConfig

MAGIC = b"VSNT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: AnomalyNet
    seed: int = 0
    epoch: int = 0
    classes: list[str] = field(default_factory=list)

    @property
    def config(self) -> ModelConfig:
        return self.model.cfg


def encode_checkpoint(model: AnomalyNet, seed: int = 0, epoch: int = 0, classes=None) -> bytes:
    header = json.dumps(
        {"config": model.cfg.to_dict(), "seed": int(seed), "epoch": int(epoch), "classes": list(classes or [])},
        sort_keys=True,
    ).encode()
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", VERSION, len(header)))
    out.write(header)
    for name, p in model.named_parameters():
        raw = name.encode()
        out.write(struct.pack("<I", len(raw)) + raw)
        out.write(struct.pack(f"<I{p.ndim}I", p.ndim, *p.shape))
        out.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    return out.getvalue()


def save_checkpoint(model: AnomalyNet, path, seed: int = 0, epoch: int = 0, classes=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model, seed, epoch, classes))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated file while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.pos >= len(self.data)


def decode_checkpoint(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError("bad magic: not a VSNT checkpoint")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    try:
        header = json.loads(r.take(r.u32("header length"), "header").decode())
        cfg = ModelConfig.from_dict(header["config"])
    except CheckpointError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt config header: {exc}") from None

    model = AnomalyNet(cfg, seed=int(header.get("seed", 0)))
    params = dict(model.named_parameters())
    loaded = set()
    while not r.done:
        name = r.take(r.u32("parameter name length"), "parameter name").decode(errors="replace")
        rank = r.u32(f"rank of {name}")
        shape = tuple(struct.unpack(f"<{rank}I", r.take(4 * rank, f"shape of {name}")))
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(r.take(4 * count, f"values of {name}"), dtype="<f4").reshape(shape)
        if name not in params:
            raise CheckpointError(f"unexpected parameter {name!r} for this config")
        if params[name].shape != shape:
            raise CheckpointError(f"shape mismatch for {name}: file {shape} vs config {params[name].shape}")
        if name in loaded:
            raise CheckpointError(f"duplicate parameter {name!r}")
        params[name].data[...] = values
        loaded.add(name)
    missing = sorted(set(params) - loaded)
    if missing:
        raise CheckpointError(f"truncated file: missing parameters {missing[:3]}{'...' if len(missing) > 3 else ''}")
    return Checkpoint(model, int(header.get("seed", 0)), int(header.get("epoch", 0)), list(header.get("classes", [])))


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from None
    return decode_checkpoint(data)


def describe_checkpoint(ckpt: Checkpoint) -> str:
    cfg = ckpt.config
    lines = [
        f"format: VSNT v{VERSION}",
        f"seed: {ckpt.seed}  epoch: {ckpt.epoch}  classes: {', '.join(ckpt.classes) or '-'}",
        "config: " + json.dumps(cfg.to_dict(), sort_keys=True),
    ]
    total = trainable = 0
    for name, p in ckpt.model.named_parameters():
        total += p.size
        trainable += p.size if p.trainable else 0
        lines.append(f"  {name:40s} {'x'.join(map(str, p.shape)):>16s} {'train' if p.trainable else 'frozen'}")
    lines.append(f"parameters: {total} ({trainable} trainable)")
    return "\n".join(lines)
