"""
Binary ``.vcmr`` residual stream format (little-endian, no padding).

    magic "VCMR" | version u8 | tolerance f32 | orientation_tolerance f32
    | n_frames varint
    per frame:   frame_id varint | n_missed varint | n_corrections varint
                 | n_deletions varint
                 | missed keypoints: 5 x f32 (x, y, size, orientation, response)
                 | corrections: dec_index varint, mask u8, one f32 per set bit
                 | deletions: dec_index varint

Varints are unsigned LEB128. Parsing is strict: overlong varints, trailing
bytes, non-finite values and broken frame invariants are all rejected, so a
stream that parses re-serializes to the identical bytes.
"""

from __future__ import annotations

import math
import struct

from .errors import BadMagic, InvalidParams, InvariantViolation, TruncatedStream, UnsupportedVersion
from .residual import Correction, ResidualFrame, ResidualStream, StreamHeader, popcount
from .sift import Keypoint

MAGIC = b"VCMR"
VERSION = 1

_F32 = struct.Struct("<f")
_KP = struct.Struct("<5f")
_HEADER = struct.Struct("<4sBff")


def encode_varint(n: int) -> bytes:
    if n < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    start = pos
    while True:
        if pos >= len(data):
            raise TruncatedStream(f"varint at offset {start} runs past end of stream")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            if byte == 0 and pos - start > 1:
                raise InvariantViolation(f"overlong varint at offset {start}")
            return value, pos


def serialize_frame(frame: ResidualFrame) -> bytes:
    out = bytearray()
    for n in (frame.frame_id, len(frame.missed), len(frame.corrections), len(frame.deletions)):
        out += encode_varint(n)
    for kp in frame.missed:
        out += _KP.pack(*kp.as_tuple())
    for c in frame.corrections:
        out += encode_varint(c.dec_index)
        out.append(c.mask)
        out += struct.pack(f"<{len(c.values)}f", *c.values)
    for i in frame.deletions:
        out += encode_varint(i)
    return bytes(out)


def serialize(stream: ResidualStream) -> bytes:
    h = stream.header
    out = bytearray(_HEADER.pack(MAGIC, h.version, h.tolerance, h.orientation_tolerance))
    out += encode_varint(len(stream.frames))
    for frame in stream.frames:
        out += serialize_frame(frame)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedStream(f"{what} at offset {self.pos} needs {n} bytes")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def varint(self) -> int:
        value, self.pos = decode_varint(self.data, self.pos)
        return value

    def floats(self, n: int, what: str) -> tuple[float, ...]:
        vals = struct.unpack(f"<{n}f", self.take(4 * n, what))
        if not all(math.isfinite(v) for v in vals):
            raise InvariantViolation(f"non-finite {what} value")
        return vals


def _read_frame(rd: _Reader) -> ResidualFrame:
    frame_id = rd.varint()
    n_missed, n_corr, n_del = rd.varint(), rd.varint(), rd.varint()
    try:
        missed = tuple(Keypoint(*rd.floats(5, "keypoint")) for _ in range(n_missed))
    except InvalidParams as exc:
        raise InvariantViolation(str(exc)) from exc
    corrections = []
    for _ in range(n_corr):
        idx = rd.varint()
        mask = rd.take(1, "mask")[0]
        if mask == 0 or mask & 0xE0:
            raise InvariantViolation(f"bad correction mask {mask:#04x}")
        corrections.append(Correction(idx, mask, rd.floats(popcount(mask), "correction")))
    deletions = tuple(rd.varint() for _ in range(n_del))
    return ResidualFrame(frame_id, missed, tuple(corrections), deletions)


def deserialize(data: bytes) -> ResidualStream:
    data = bytes(data)
    if data[:4] != MAGIC[: len(data)]:
        raise BadMagic(f"expected {MAGIC!r}, got {data[:4]!r}")
    rd = _Reader(data)
    _, version, tol, otol = _HEADER.unpack(rd.take(_HEADER.size, "header"))
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}, only {VERSION} is supported")
    if not (math.isfinite(tol) and math.isfinite(otol)):
        raise InvariantViolation("non-finite header tolerance")
    n_frames = rd.varint()
    frames = [_read_frame(rd) for _ in range(n_frames)]
    if rd.pos != len(data):
        raise InvariantViolation(f"{len(data) - rd.pos} trailing bytes after last frame")
    return ResidualStream(StreamHeader(tol, otol, version), tuple(frames))
