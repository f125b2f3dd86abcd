"""Named-parameter persistence and selective weight transplant.

A ParamStore is an ordered list of (name, float32 tensor) entries. The file
format is fixed so the bytes round trip identically on any platform:

    magic "TVCK", version byte 0x01, all integers little-endian,
    u32 entry count, then per entry:
    u16 name length, UTF-8 name, u8 ndim, ndim x u32 dims,
    prod(dims) x f32 values.

Transplant copies values from a source store into every target entry whose
name starts with a prefix and whose shape matches the same-named source
entry; everything else is left untouched. That is the whole mechanism for
re-using a trained sub-network inside a fresh one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"TVCK"
VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint file and transplant errors."""


class BadMagicError(CheckpointError):
    """File does not start with the TVCK magic."""


class UnsupportedVersionError(CheckpointError):
    """Magic matches but the version byte is unknown."""


class TruncatedFileError(CheckpointError):
    """File ends before a declared header field or data block."""


class EntryShapeError(CheckpointError):
    """Entry structure is inconsistent (shape/data mismatch, duplicate or
    trailing content; in strict transplant, a shape conflict)."""


class ParamStore:
    """Ordered, uniquely named float32 tensors."""

    def __init__(self):
        self._names: list[str] = []
        self._data: dict[str, np.ndarray] = {}

    @classmethod
    def from_items(cls, items) -> "ParamStore":
        store = cls()
        for name, value in items:
            store.add(name, value)
        return store

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._data:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._names.append(name)
        self._data[name] = np.ascontiguousarray(value, dtype=np.float32)

    def names(self) -> list[str]:
        return list(self._names)

    def get(self, name: str) -> np.ndarray:
        return self._data[name]

    def __contains__(self, name: str) -> bool:
        return name in self._data

    def __len__(self) -> int:
        return len(self._names)

    def items(self):
        return [(name, self._data[name]) for name in self._names]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamStore):
            return NotImplemented
        if self._names != other._names:
            return False
        return all(
            self._data[n].shape == other._data[n].shape
            and np.array_equal(self._data[n], other._data[n])
            for n in self._names
        )


def save(store: ParamStore, path) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<B", VERSION)
    blob += struct.pack("<I", len(store))
    for name, value in store.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"parameter name too long: {name!r}")
        if value.ndim > 0xFF:
            raise ValueError(f"too many dimensions for {name!r}")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", value.ndim)
        for dim in value.shape:
            blob += struct.pack("<I", dim)
        blob += value.astype("<f4", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(
                f"file ends inside {what} (need {n} bytes at offset {self.pos})"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load(path) -> ParamStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    reader = _Reader(blob)
    magic = reader.take(4, "magic") if len(blob) >= 4 else blob
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = reader.u8("version")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    count = reader.u32("entry count")
    store = ParamStore()
    for i in range(count):
        name_len = reader.u16(f"entry {i} name length")
        try:
            name = reader.take(name_len, f"entry {i} name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EntryShapeError(f"entry {i} name is not valid UTF-8") from exc
        ndim = reader.u8(f"entry {i} ndim")
        shape = tuple(reader.u32(f"entry {i} dim {d}") for d in range(ndim))
        n_values = 1
        for dim in shape:
            n_values *= dim
        raw = reader.take(4 * n_values, f"entry {i} ({name}) data")
        value = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if name in store:
            raise EntryShapeError(f"duplicate entry name {name!r}")
        store.add(name, value)
    if reader.pos != len(blob):
        raise EntryShapeError(
            f"{len(blob) - reader.pos} trailing bytes after last declared entry"
        )
    return store


@dataclass
class TransplantReport:
    transplanted: list[str] = field(default_factory=list)
    skipped_missing: list[str] = field(default_factory=list)
    skipped_shape: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [
            f"transplanted: {len(self.transplanted)}",
            f"skipped (missing in source): {len(self.skipped_missing)}",
            f"skipped (shape mismatch): {len(self.skipped_shape)}",
        ]
        for name in self.transplanted:
            out.append(f"  + {name}")
        for name in self.skipped_missing:
            out.append(f"  - {name} (missing)")
        for name in self.skipped_shape:
            out.append(f"  - {name} (shape mismatch)")
        return out


def transplant(
    target: ParamStore,
    source: ParamStore,
    prefix: str,
    strict: bool = False,
) -> tuple[ParamStore, TransplantReport]:
    """Copy same-named, same-shaped, prefix-matched values from source.

    Returns a new store (same names, same order, same shapes as target) and
    a report. In strict mode a prefixed name whose source shape differs is
    an error instead of a skip.
    """
    report = TransplantReport()
    out = ParamStore()
    for name, value in target.items():
        if not name.startswith(prefix):
            out.add(name, value)
            continue
        if name not in source:
            report.skipped_missing.append(name)
            out.add(name, value)
            continue
        candidate = source.get(name)
        if candidate.shape != value.shape:
            if strict:
                raise EntryShapeError(
                    f"transplant shape mismatch for {name!r}: "
                    f"target {value.shape} vs source {candidate.shape}"
                )
            report.skipped_shape.append(name)
            out.add(name, value)
            continue
        report.transplanted.append(name)
        out.add(name, candidate)
    return out, report
