"""Binary time-tag files.

Layout, all little-endian::

    header  <8sHIBQQ   magic b"PAIRLAB1", version u16, resolution_ps u32,
                        channel_count u8, duration_ps u64, seed u64
    records <BQ        channel u8, time_ps u64, repeated to end of file

Channel roles are not stored; readers pass the channel map for the
experiment (pairs or heralded g2) or get generic ``ch<N>`` names.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim import G2_CHANNELS, PAIR_CHANNELS, TagStream

MAGIC = b"PAIRLAB1"
VERSION = 1
HEADER = struct.Struct("<8sHIBQQ")
RECORD_DTYPE = np.dtype([("channel", "<u1"), ("time", "<u8")])
assert RECORD_DTYPE.itemsize == 9


class TagFileError(ValueError):
    pass


@dataclass(frozen=True)
class TagFileHeader:
    version: int
    resolution_ps: int
    channel_count: int
    duration_ps: int
    seed: int
    magic: bytes = MAGIC

    def __post_init__(self):
        if self.magic != MAGIC:
            raise TagFileError(f"bad magic {self.magic!r}")
        if self.resolution_ps <= 0:
            raise TagFileError("resolution must be positive")

    def pack(self) -> bytes:
        return HEADER.pack(self.magic, self.version, self.resolution_ps, self.channel_count, self.duration_ps, self.seed)


def default_channel_map(channel_count: int) -> dict[int, str]:
    if channel_count == 2:
        return dict(PAIR_CHANNELS)
    if channel_count == 3:
        return dict(G2_CHANNELS)
    return {i: f"ch{i}" for i in range(channel_count)}


def write_tags(path: str | os.PathLike, stream: TagStream, seed: int = 0, resolution_ps: int = 1) -> None:
    head = TagFileHeader(VERSION, resolution_ps, len(stream.channel_map), stream.duration_ps, seed)
    rec = np.empty(len(stream), RECORD_DTYPE)
    rec["channel"] = stream.channels
    rec["time"] = stream.times
    with open(path, "wb") as f:
        f.write(head.pack())
        f.write(rec.tobytes())


def read_header(path: str | os.PathLike) -> TagFileHeader:
    with open(path, "rb") as f:
        raw = f.read(HEADER.size)
    return _parse_header(raw, path)


def _parse_header(raw: bytes, path) -> TagFileHeader:
    if len(raw) < HEADER.size:
        raise TagFileError(f"{path}: truncated header ({len(raw)} of {HEADER.size} bytes)")
    magic, version, res, nch, dur, seed = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TagFileError(f"{path}: not a tag file (magic {magic!r})")
    if version != VERSION:
        raise TagFileError(f"{path}: unsupported version {version}")
    return TagFileHeader(version, res, nch, dur, seed, magic)


def read_tags(path: str | os.PathLike, channel_map: dict[int, str] | None = None) -> tuple[TagStream, TagFileHeader]:
    raw = Path(path).read_bytes()
    head = _parse_header(raw, path)
    body = len(raw) - HEADER.size
    if body % RECORD_DTYPE.itemsize:
        raise TagFileError(f"{path}: truncated record stream ({body} bytes is not a multiple of 9)")
    rec = np.frombuffer(raw, RECORD_DTYPE, offset=HEADER.size)
    cmap = channel_map or default_channel_map(head.channel_count)
    times = rec["time"].astype(np.int64)
    if times.size and (rec["time"].max() > np.iinfo(np.int64).max):
        raise TagFileError(f"{path}: time stamp out of range")
    try:
        stream = TagStream(rec["channel"].copy(), times, head.duration_ps, cmap)
    except ValueError as exc:
        raise TagFileError(f"{path}: {exc}") from None
    return stream, head
