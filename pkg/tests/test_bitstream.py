import struct

import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from vcm_residual.bitstream import decode_varint, deserialize, encode_varint, serialize, serialize_frame
from vcm_residual.errors import BadMagic, InvariantViolation, TruncatedStream, UnsupportedVersion
from vcm_residual.residual import Correction, ResidualFrame, ResidualStream, StreamHeader

from conftest import keypoints

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


@st.composite
def residual_frames(draw, frame_id):
    missed = draw(st.lists(keypoints, max_size=4))
    used = draw(st.lists(st.integers(0, 300), unique=True, max_size=8))
    split = draw(st.integers(0, len(used)))
    corr_idx, del_idx = sorted(used[:split]), sorted(used[split:])
    corrections = []
    for i in corr_idx:
        mask = draw(st.integers(1, 31))
        corrections.append(Correction(i, mask, tuple(draw(f32) for _ in range(bin(mask).count("1")))))
    return ResidualFrame(frame_id, tuple(missed), tuple(corrections), tuple(del_idx))


@st.composite
def streams(draw, max_frames=4):
    ids = sorted(draw(st.lists(st.integers(0, 100_000), unique=True, max_size=max_frames)))
    header = StreamHeader(draw(st.floats(0, 1, width=32)), draw(st.floats(0, 180, width=32)))
    return ResidualStream(header, tuple(draw(residual_frames(i)) for i in ids))


def test_empty_stream_is_fourteen_bytes():
    s = ResidualStream(StreamHeader(0.05, 18.0))
    b = serialize(s)
    assert len(b) == 14
    assert b == b"VCMR\x01" + struct.pack("<ff", 0.05, 18.0) + b"\x00"
    assert deserialize(b) == s


def test_byte_layout_of_one_frame():
    frame = ResidualFrame(
        300,
        missed=(),
        corrections=(Correction(2, 0b10001, (1.5, 0.25)),),
        deletions=(130,),
    )
    expected = (
        b"\xac\x02"  # frame id 300
        b"\x00\x01\x01"
        + b"\x02\x11" + struct.pack("<ff", 1.5, 0.25)
        + b"\x82\x01"  # deletion 130
    )
    assert serialize_frame(frame) == expected


def test_single_missed_keypoint_round_trip():
    from conftest import kp

    s = ResidualStream(StreamHeader(0.05, 18.0), (ResidualFrame(0, missed=(kp(10.5, 3.25, response=0.125),)),))
    b = serialize(s)
    assert len(b) == 14 + 4 + 20
    assert deserialize(b) == s
    assert serialize(deserialize(b)) == b


@given(st.integers(0, 2**64))
@example(0)
@example(127)
@example(128)
def test_varint_inverse(n):
    enc = encode_varint(n)
    value, pos = decode_varint(enc, 0)
    assert value == n and pos == len(enc)


@given(streams())
def test_stream_round_trip(s):
    b = serialize(s)
    assert deserialize(b) == s
    assert serialize(deserialize(b)) == b


@given(streams(max_frames=3))
def test_every_truncation_is_rejected(s):
    b = serialize(s)
    for k in range(len(b)):
        with pytest.raises(TruncatedStream):
            deserialize(b[:k])


def test_bad_magic():
    good = serialize(ResidualStream(StreamHeader(0.05, 18.0)))
    with pytest.raises(BadMagic):
        deserialize(b"XCMR" + good[4:])
    with pytest.raises(BadMagic):
        deserialize(b"XY")


def test_unsupported_version():
    good = serialize(ResidualStream(StreamHeader(0.05, 18.0)))
    with pytest.raises(UnsupportedVersion):
        deserialize(good[:4] + b"\x02" + good[5:])


def _header():
    return b"VCMR\x01" + struct.pack("<ff", 0.05, 18.0)


@pytest.mark.parametrize(
    "body",
    [
        b"\x80\x00",  # overlong zero frame count
        b"\x00\x00",  # trailing byte
        b"\x01\x00\x00\x01\x00\x00" + b"\x00" + struct.pack("<f", 1.0),  # zero mask
        b"\x01\x00\x00\x01\x00\x00" + b"\x20",  # reserved mask bits
        b"\x01\x00\x00\x00\x02\x05\x05",  # repeated deletion index
        b"\x02\x05\x00\x00\x00\x05\x00\x00\x00",  # non-increasing frame ids
        b"\x01\x00\x01\x00\x00" + struct.pack("<5f", 1, 1, 1, 400, 0.1),  # orientation out of range
        b"\x01\x00\x01\x00\x00" + struct.pack("<5f", 1, 1, float("nan"), 10, 0.1),
    ],
)
def test_invariant_violations(body):
    with pytest.raises(InvariantViolation):
        deserialize(_header() + body)
