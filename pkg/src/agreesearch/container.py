"""Versioned binary container for trained model artifacts.

Layout: magic bytes ``MSTR``, a little-endian u16 format version, a u16
section count, then that many sections. Each section is a length-prefixed
tag (u8 length + UTF-8 bytes) followed by a u64 payload length and the raw
payload. Identical bytes imply identical model behavior, so every writer in
this package must emit payloads deterministically.
"""

from __future__ import annotations

import struct
from io import BytesIO
from typing import BinaryIO

MAGIC = b"MSTR"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    """Raised for bad magic, version mismatch, or truncated streams."""


def write_container(sections: list[tuple[str, bytes]]) -> bytes:
    """Serialize (tag, payload) sections into one container blob."""
    out = BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<HH", FORMAT_VERSION, len(sections)))
    for tag, payload in sections:
        tag_bytes = tag.encode("utf-8")
        if not 0 < len(tag_bytes) < 256:
            raise ContainerError(f"section tag {tag!r} out of range")
        out.write(struct.pack("<B", len(tag_bytes)))
        out.write(tag_bytes)
        out.write(struct.pack("<Q", len(payload)))
        out.write(payload)
    return out.getvalue()


def read_container(blob: bytes) -> list[tuple[str, bytes]]:
    """Parse a container blob back into (tag, payload) sections."""
    stream = BytesIO(blob)
    magic = stream.read(4)
    if magic != MAGIC:
        raise ContainerError(f"bad magic bytes {magic!r}")
    header = stream.read(4)
    if len(header) < 4:
        raise ContainerError("truncated container header")
    version, count = struct.unpack("<HH", header)
    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported container version {version}")
    sections = []
    for _ in range(count):
        tag_len_raw = stream.read(1)
        if not tag_len_raw:
            raise ContainerError("truncated section tag length")
        (tag_len,) = struct.unpack("<B", tag_len_raw)
        tag_bytes = stream.read(tag_len)
        if len(tag_bytes) < tag_len:
            raise ContainerError("truncated section tag")
        size_raw = stream.read(8)
        if len(size_raw) < 8:
            raise ContainerError("truncated section size")
        (size,) = struct.unpack("<Q", size_raw)
        payload = stream.read(size)
        if len(payload) < size:
            raise ContainerError(
                f"truncated payload for section {tag_bytes.decode('utf-8', 'replace')!r}"
            )
        sections.append((tag_bytes.decode("utf-8"), payload))
    if stream.read(1):
        raise ContainerError("trailing bytes after final section")
    return sections


def find_section(sections: list[tuple[str, bytes]], tag: str) -> bytes:
    for name, payload in sections:
        if name == tag:
            return payload
    raise ContainerError(f"container has no section tagged {tag!r}")


class BinaryWriter:
    """Deterministic little-endian encoder for section payloads."""

    def __init__(self) -> None:
        self._out = BytesIO()

    def u32(self, value: int) -> None:
        self._out.write(struct.pack("<I", value))

    def u64(self, value: int) -> None:
        self._out.write(struct.pack("<Q", value))

    def i32(self, value: int) -> None:
        self._out.write(struct.pack("<i", value))

    def f64(self, value: float) -> None:
        self._out.write(struct.pack("<d", value))

    def text(self, value: str) -> None:
        raw = value.encode("utf-8")
        self.u32(len(raw))
        self._out.write(raw)

    def f64_array(self, values) -> None:
        import numpy as np

        arr = np.ascontiguousarray(values, dtype="<f8")
        self.u64(arr.size)
        self._out.write(arr.tobytes())

    def i32_array(self, values) -> None:
        import numpy as np

        arr = np.ascontiguousarray(values, dtype="<i4")
        self.u64(arr.size)
        self._out.write(arr.tobytes())

    def getvalue(self) -> bytes:
        return self._out.getvalue()


class BinaryReader:
    """Counterpart of :class:`BinaryWriter`; raises on short reads."""

    def __init__(self, payload: bytes) -> None:
        self._stream: BinaryIO = BytesIO(payload)

    def _take(self, n: int) -> bytes:
        raw = self._stream.read(n)
        if len(raw) < n:
            raise ContainerError("truncated payload")
        return raw

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self._take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def text(self) -> str:
        return self._take(self.u32()).decode("utf-8")

    def f64_array(self):
        import numpy as np

        size = self.u64()
        return np.frombuffer(self._take(8 * size), dtype="<f8").copy()

    def i32_array(self):
        import numpy as np

        size = self.u64()
        return np.frombuffer(self._take(4 * size), dtype="<i4").copy()

    def expect_end(self) -> None:
        if self._stream.read(1):
            raise ContainerError("trailing bytes in payload")
