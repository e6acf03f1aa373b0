"""Time-tag streams and their binary file format.

File layout, all little endian::

    magic       4 bytes  b"TTAG"
    version     u16      1
    resolution  u32      tick length in picoseconds
    channels    u8       number of channel ids in use
    reserved    5 bytes  zero
    records     9 bytes each: channel u8, timestamp u64 (ticks)

Records are sorted by timestamp, ties by channel id.
"""

from __future__ import annotations

import os
import struct

import numpy as np

HERALD, FLUORESCENCE, EMISSION_393, MARKER = 0, 1, 2, 3
CHANNEL_NAMES = {HERALD: "herald", FLUORESCENCE: "fluorescence", EMISSION_393: "393nm", MARKER: "marker"}

MAGIC = b"TTAG"
VERSION = 1
HEADER = struct.Struct("<4sHIB5s")
RECORD = np.dtype([("channel", "u1"), ("timestamp", "<u8")])
assert HEADER.size == 16 and RECORD.itemsize == 9


class StreamFormatError(ValueError):
    pass


class BadMagicError(StreamFormatError):
    pass


class UnsupportedVersionError(StreamFormatError):
    pass


class BadHeaderError(StreamFormatError):
    pass


class TruncatedRecordError(StreamFormatError):
    pass


class NonMonotonicError(StreamFormatError):
    pass


class TimeTagStream:
    """Sorted (channel, tick) records with a fixed tick length."""

    def __init__(self, channel, timestamp, resolution_ps: int = 1000, *, check: bool = True):
        self.channel = np.ascontiguousarray(channel, dtype=np.uint8)
        self.timestamp = np.ascontiguousarray(timestamp, dtype=np.uint64)
        self.resolution_ps = int(resolution_ps)
        if self.resolution_ps <= 0:
            raise ValueError("tick resolution must be positive")
        if self.channel.shape != self.timestamp.shape:
            raise ValueError("channel and timestamp arrays differ in length")
        if check and not self.is_sorted():
            raise NonMonotonicError("records are not ordered by (timestamp, channel)")

    @classmethod
    def from_times(cls, parts: dict[int, np.ndarray], resolution_ps: int = 1000) -> "TimeTagStream":
        """Merge per-channel detection times (seconds) into one sorted stream."""
        tick = resolution_ps * 1e-12
        chans, ticks = [], []
        for ch, t in parts.items():
            t = np.asarray(t, dtype=float)
            if t.size and t.min() < 0:
                raise ValueError("negative detection time")
            ticks.append(np.floor(t / tick).astype(np.uint64))
            chans.append(np.full(t.size, ch, dtype=np.uint8))
        if not ticks:
            return cls(np.empty(0, np.uint8), np.empty(0, np.uint64), resolution_ps)
        ticks = np.concatenate(ticks)
        chans = np.concatenate(chans)
        order = np.lexsort((chans, ticks))
        return cls(chans[order], ticks[order], resolution_ps, check=False)

    @property
    def tick(self) -> float:
        return self.resolution_ps * 1e-12

    def __len__(self):
        return len(self.timestamp)

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (self.resolution_ps == other.resolution_ps
                and np.array_equal(self.channel, other.channel)
                and np.array_equal(self.timestamp, other.timestamp))

    def __repr__(self):
        return f"TimeTagStream({len(self)} records, {self.resolution_ps} ps ticks)"

    def first_unsorted(self) -> int:
        """Index of the first record out of (timestamp, channel) order, or -1."""
        ts, ch = self.timestamp, self.channel
        if len(ts) < 2:
            return -1
        ok = (ts[1:] > ts[:-1]) | ((ts[1:] == ts[:-1]) & (ch[1:] >= ch[:-1]))
        return -1 if ok.all() else int(np.argmin(ok)) + 1

    def is_sorted(self) -> bool:
        return self.first_unsorted() < 0

    def ticks(self, channel: int) -> np.ndarray:
        return self.timestamp[self.channel == channel]

    def times(self, channel: int) -> np.ndarray:
        """Detection times of one channel in seconds."""
        return self.ticks(channel).astype(float) * self.tick

    @property
    def channels(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.channel))

    @property
    def duration(self) -> float:
        return float(self.timestamp[-1]) * self.tick if len(self) else 0.0


def write_stream(stream: TimeTagStream, path) -> None:
    if not stream.is_sorted():
        raise NonMonotonicError("refusing to write an unsorted stream")
    rec = np.empty(len(stream), dtype=RECORD)
    rec["channel"] = stream.channel
    rec["timestamp"] = stream.timestamp
    n_ch = max(stream.channels, default=-1) + 1
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, stream.resolution_ps, max(n_ch, 4), b"\0" * 5))
        fh.write(rec.tobytes())


def read_stream(path) -> TimeTagStream:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < HEADER.size:
            raise BadHeaderError(f"{path}: file shorter than the 16-byte header")
        magic, version, res, _n_ch, reserved = HEADER.unpack(head)
        if magic != MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise UnsupportedVersionError(f"{path}: unsupported version {version}")
        if res == 0:
            raise BadHeaderError(f"{path}: zero tick resolution")
        if reserved != b"\0" * 5:
            raise BadHeaderError(f"{path}: reserved header bytes are not zero")
        body = size - HEADER.size
        if body % RECORD.itemsize:
            raise TruncatedRecordError(f"{path}: {body % RECORD.itemsize} trailing bytes after "
                                       f"{body // RECORD.itemsize} records")
        rec = np.fromfile(fh, dtype=RECORD, count=body // RECORD.itemsize)
    stream = TimeTagStream(rec["channel"], rec["timestamp"], res, check=False)
    bad = stream.first_unsorted()
    if bad >= 0:
        raise NonMonotonicError(f"{path}: record {bad} is out of order")
    return stream
