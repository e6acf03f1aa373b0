import numpy as np
import pytest
from hypothesis import given, strategies as st

from ionabsorb.timetags import (HEADER, RECORD, BadHeaderError, BadMagicError, NonMonotonicError,
                                TimeTagStream, TruncatedRecordError, UnsupportedVersionError,
                                read_stream, write_stream)


def _random_stream(rng, n, res=1000):
    ticks = np.sort(rng.integers(0, 2 ** 50, n, dtype=np.uint64))
    ch = rng.integers(0, 4, n).astype(np.uint8)
    order = np.lexsort((ch, ticks))
    return TimeTagStream(ch[order], ticks[order], res)


def test_empty_stream_is_header_only(tmp_path):
    p = tmp_path / "e.ttag"
    write_stream(TimeTagStream([], []), p)
    assert p.stat().st_size == 16
    assert read_stream(p) == TimeTagStream([], [])


def test_record_layout(tmp_path):
    p = tmp_path / "one.ttag"
    write_stream(TimeTagStream([2], [0x0102030405060708], 250), p)
    raw = p.read_bytes()
    magic, ver, res, nch, reserved = HEADER.unpack(raw[:16])
    assert (magic, ver, res, reserved) == (b"TTAG", 1, 250, b"\0" * 5)
    assert raw[16:] == bytes([2, 8, 7, 6, 5, 4, 3, 2, 1])
    assert RECORD.itemsize == 9


def test_round_trip_million(tmp_path):
    s = _random_stream(np.random.default_rng(0), 1_000_000)
    p = tmp_path / "big.ttag"
    write_stream(s, p)
    assert p.stat().st_size == 16 + 9 * 1_000_000
    assert read_stream(p) == s


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2 ** 63)), max_size=200),
       st.integers(1, 10 ** 6))
def test_round_trip_property(tmp_path_factory, recs, res):
    recs = sorted(recs, key=lambda r: (r[1], r[0]))
    s = TimeTagStream([r[0] for r in recs], [r[1] for r in recs], res)
    p = tmp_path_factory.mktemp("rt") / "s.ttag"
    write_stream(s, p)
    assert read_stream(p) == s


@pytest.fixture
def good_file(tmp_path):
    p = tmp_path / "g.ttag"
    write_stream(_random_stream(np.random.default_rng(1), 100), p)
    return p


def _corrupt(p, pos, value):
    b = bytearray(p.read_bytes())
    b[pos] = value
    p.write_bytes(bytes(b))


def test_bad_magic(good_file):
    _corrupt(good_file, 0, ord("X"))
    with pytest.raises(BadMagicError):
        read_stream(good_file)


def test_bad_version(good_file):
    _corrupt(good_file, 4, 2)
    with pytest.raises(UnsupportedVersionError):
        read_stream(good_file)


def test_zero_resolution(tmp_path):
    p = tmp_path / "z.ttag"
    p.write_bytes(HEADER.pack(b"TTAG", 1, 0, 4, b"\0" * 5))
    with pytest.raises(BadHeaderError):
        read_stream(p)


def test_short_header(tmp_path):
    p = tmp_path / "s.ttag"
    p.write_bytes(b"TTAG")
    with pytest.raises(BadHeaderError):
        read_stream(p)


def test_truncated_record(good_file):
    good_file.write_bytes(good_file.read_bytes()[:-1])
    with pytest.raises(TruncatedRecordError):
        read_stream(good_file)


def test_non_monotone_on_read(tmp_path):
    p = tmp_path / "n.ttag"
    rec = np.zeros(3, RECORD)
    rec["timestamp"] = [1, 5, 3]
    p.write_bytes(HEADER.pack(b"TTAG", 1, 1000, 4, b"\0" * 5) + rec.tobytes())
    with pytest.raises(NonMonotonicError, match="record 2"):
        read_stream(p)


def test_errors_are_distinct():
    kinds = {BadMagicError, UnsupportedVersionError, BadHeaderError, TruncatedRecordError, NonMonotonicError}
    assert len(kinds) == 5
    for a in kinds:
        for b in kinds - {a}:
            assert not issubclass(a, b)


def test_unsorted_construction_rejected():
    with pytest.raises(NonMonotonicError):
        TimeTagStream([0, 0], [5, 3])
    with pytest.raises(NonMonotonicError):
        TimeTagStream([1, 0], [5, 5])


def test_from_times_floors_and_sorts():
    s = TimeTagStream.from_times({1: [2.5e-9, 1e-9], 0: [2.9e-9]}, 1000)
    assert s.timestamp.tolist() == [1, 2, 2]
    assert s.channel.tolist() == [1, 0, 1]
    assert s.times(1) == pytest.approx([1e-9, 2e-9])
    assert s.channels == [0, 1]
    with pytest.raises(ValueError):
        TimeTagStream.from_times({0: [-1.0]})
