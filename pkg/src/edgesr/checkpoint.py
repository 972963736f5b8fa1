"""Binary checkpoint format.

Layout (all integers little-endian):

    magic   4 bytes  "SREW"
    version u32      = 1
    count   u32      number of entries
    entry*  count times, sorted by name:
              u16 name length, UTF-8 name,
              u8 dtype tag (0 = float32, 1 = raw bytes),
              u8 rank, u32 dims[rank],
              payload (f32 little-endian, or the raw bytes)
    crc     u32      CRC32 of everything between the count and the crc

Sorted names and a fixed encoding make save -> load -> save byte-identical,
which the training resume contract relies on.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .optim import AdamState
from .tensor import Tensor

MAGIC = b"SREW"
VERSION = 1

_TAG_F32 = 0
_TAG_BYTES = 1


def _encode_entry(name, value):
    nb = name.encode("utf-8")
    head = struct.pack("<H", len(nb)) + nb
    if isinstance(value, (bytes, bytearray)):
        payload = bytes(value)
        dims = (len(payload),)
        head += struct.pack("<BB", _TAG_BYTES, 1)
    else:
        # np.ascontiguousarray alone would promote rank-0 entries to rank 1
        arr = np.asarray(value, dtype="<f4")
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        payload = arr.tobytes()
        dims = arr.shape
        head += struct.pack("<BB", _TAG_F32, arr.ndim)
    head += struct.pack(f"<{len(dims)}I", *dims)
    return head + payload


def save_entries(entries, path):
    """Write a name -> (float32 ndarray | bytes) dict."""
    body = b"".join(_encode_entry(k, entries[k]) for k in sorted(entries))
    blob = MAGIC + struct.pack("<II", VERSION, len(entries)) + body
    blob += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(blob)


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated checkpoint (needed {n} bytes at offset {self.pos})")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u(self, fmt):
        (v,) = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return v


def load_entries(path):
    with open(path, "rb") as f:
        blob = f.read()
    r = _Reader(blob, path)
    magic = r.take(4)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u("<I")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}, expected {VERSION}")
    count = r.u("<I")
    body_start = r.pos
    entries = {}
    for _ in range(count):
        name = r.take(r.u("<H")).decode("utf-8")
        tag = r.u("<B")
        rank = r.u("<B")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        if tag == _TAG_BYTES:
            entries[name] = bytes(r.take(int(np.prod(dims, dtype=np.int64))))
        elif tag == _TAG_F32:
            n = int(np.prod(dims, dtype=np.int64))
            arr = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims)
            entries[name] = arr.astype(np.float32)
        else:
            raise FormatError(f"{path}: unknown dtype tag {tag} for entry {name!r}")
    body_end = r.pos
    crc = r.u("<I")
    got = zlib.crc32(blob[body_start:body_end]) & 0xFFFFFFFF
    if crc != got:
        raise FormatError(f"{path}: CRC mismatch (stored {crc:#10x}, computed {got:#10x})")
    return entries


@dataclass
class Checkpoint:
    """Named parameters plus optimizer state, epoch and a config echo."""

    params: dict
    adam: AdamState = None
    epoch: int = 0
    config_text: str = ""
    losses: list = field(default_factory=list)  # not serialized

    def to_entries(self):
        e = {}
        for name, p in self.params.items():
            data = p.data if isinstance(p, Tensor) else p
            e["param." + name] = data
        if self.adam is not None:
            for name, m in self.adam.m.items():
                e["adam.m." + name] = m
            for name, v in self.adam.v.items():
                e["adam.v." + name] = v
            e["adam.t"] = np.array([self.adam.t], dtype=np.float32)
        e["meta.epoch"] = np.array([self.epoch], dtype=np.float32)
        e["meta.config"] = self.config_text.encode("utf-8")
        return e

    @classmethod
    def from_entries(cls, entries):
        params, m, v = {}, {}, {}
        t = 0
        epoch = 0
        config_text = ""
        for name, val in entries.items():
            if name.startswith("param."):
                params[name[len("param."):]] = val
            elif name.startswith("adam.m."):
                m[name[len("adam.m."):]] = val.copy()
            elif name.startswith("adam.v."):
                v[name[len("adam.v."):]] = val.copy()
            elif name == "adam.t":
                t = int(val[0])
            elif name == "meta.epoch":
                epoch = int(val[0])
            elif name == "meta.config":
                config_text = val.decode("utf-8")
        adam = AdamState(m=m, v=v, t=t) if m else None
        return cls(params=params, adam=adam, epoch=epoch, config_text=config_text)


def save_checkpoint(ckpt: Checkpoint, path):
    save_entries(ckpt.to_entries(), path)


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.from_entries(load_entries(path))


def params_as_tensors(params):
    """Checkpoint arrays -> trainable Tensors (copies)."""
    return {k: Tensor(v.copy(), requires_grad=True) for k, v in params.items()}
