import random
import struct

import pytest
from hypothesis import given, strategies as st

from dabxml import mot
from dabxml.mot import (
    CrcFailure,
    DataGroup,
    DuplicateSegment,
    EmptyBody,
    EmptyInput,
    InvalidValidity,
    MalformedTimestamp,
    MissingSegments,
    MixedTransportIds,
    MotHeaderCore,
    MotObject,
    MotParameter,
    NoTerminalSegment,
    SizeMismatch,
    Truncated,
    ValidityState,
    ValidityWindow,
)


def header_core_oracle(body_size, header_size, content_type, content_subtype) -> bytes:
    """Independent bit-string assembler: 28/13/6/9 bits, big-endian bit order."""
    bits = (
        format(body_size, "028b")
        + format(header_size, "013b")
        + format(content_type, "06b")
        + format(content_subtype, "09b")
    )
    return bytes(int(bits[i : i + 8], 2) for i in range(0, 56, 8))


def reflect(value: int, width: int) -> int:
    return int(format(value, f"0{width}b")[::-1], 2)


def crc16_oracle(data: bytes) -> int:
    """CRC-16/X.25 by polynomial long division over the reflected message."""
    generator = 0x11021
    k = 8 * len(data)
    message = 0
    for byte in data:
        message = (message << 8) | reflect(byte, 8)
    poly = (message << 16) ^ (0xFFFF << k)
    for shift in range(max(poly.bit_length() - 1, 15), 15, -1):
        if (poly >> shift) & 1:
            poly ^= generator << (shift - 16)
    return reflect((poly & 0xFFFF) ^ 0xFFFF, 16)


class TestCrc16:
    def test_check_value(self):
        assert crc16_oracle(b"123456789") == 0x906E
        assert mot.crc16(b"123456789") == 0x906E

    def test_empty(self):
        assert mot.crc16(b"") == 0x0000
        assert crc16_oracle(b"") == 0x0000

    @given(st.binary(max_size=64))
    def test_matches_long_division_oracle(self, data):
        assert mot.crc16(data) == crc16_oracle(data)

    @given(st.binary(max_size=64))
    def test_residue_property(self, data):
        crc = mot.crc16(data)
        assert mot.crc16(data + struct.pack("<H", crc)) == mot.CRC_RESIDUE_MAGIC

    def test_detects_every_single_bit_flip(self):
        group = mot.segment(b"fixed golden payload", transport_id=9, segment_size=32)[0]
        blob = bytearray(mot.serialize_group(group))
        for byte_index in range(len(blob)):
            for bit in range(8):
                blob[byte_index] ^= 1 << bit
                parsed_crc = struct.unpack(">H", blob[-2:])[0]
                assert mot.crc16(bytes(blob[:-2])) != parsed_crc
                blob[byte_index] ^= 1 << bit


class TestHeaderCore:
    def test_golden_vector_against_oracle(self):
        oracle = header_core_oracle(2, 7, 0, 1)
        core = MotHeaderCore(body_size=2, header_size=7, content_type=0, content_subtype=1)
        assert core.to_bytes() == oracle
        assert oracle == bytes.fromhex("00000020038001")

    def test_roundtrip(self):
        core = MotHeaderCore(body_size=123456, header_size=37, content_type=5, content_subtype=300)
        assert MotHeaderCore.from_bytes(core.to_bytes()) == core

    @given(
        st.integers(0, (1 << 28) - 1),
        st.integers(0, (1 << 13) - 1),
        st.integers(0, 63),
        st.integers(0, 511),
    )
    def test_matches_oracle(self, body, header, ctype, csub):
        core = MotHeaderCore(body, header, ctype, csub)
        assert core.to_bytes() == header_core_oracle(body, header, ctype, csub)

    def test_truncated(self):
        with pytest.raises(Truncated):
            MotHeaderCore.from_bytes(b"\x00\x00\x00")


class TestBuildObject:
    def test_plain_xml_object(self):
        obj = mot.build_mot_object(b"<x/>")
        assert obj.core.content_type == 0
        assert obj.core.content_subtype == 1
        assert obj.content_name() == b"TEXT/XML"
        assert obj.body == b"<x/>"
        assert obj.core.body_size == 4

    def test_header_size_with_validity(self):
        obj = mot.build_mot_object(b"x", ValidityWindow(start_validity=0, expire_time=1))
        # 7 core + (2+8 "TEXT/XML") + (2+8 start) + (2+8 expire)
        assert obj.core.header_size == 37
        assert mot.object_validity(obj) == ValidityWindow(0, 1)

    def test_empty_window_rejected(self):
        with pytest.raises(InvalidValidity):
            mot.build_mot_object(b"x", ValidityWindow(start_validity=5, expire_time=5))

    def test_empty_body_rejected(self):
        with pytest.raises(EmptyBody):
            mot.build_mot_object(b"")


class TestObjectSerialization:
    def test_no_parameters(self):
        core = MotHeaderCore(body_size=2, header_size=7)
        obj = MotObject(core=core, parameters=[], body=b"AB")
        blob = mot.serialize_object(obj)
        assert blob == header_core_oracle(2, 7, 0, 1) + b"\x41\x42"

    def test_parse_inverts(self):
        obj = mot.build_mot_object(b"<a>hi</a>", ValidityWindow(10, 20))
        assert mot.parse_object(mot.serialize_object(obj)) == obj

    def test_size_mismatch(self):
        core = MotHeaderCore(body_size=10, header_size=7)
        blob = core.to_bytes() + b"abc"
        with pytest.raises(SizeMismatch):
            mot.parse_object(blob)

    def test_unknown_parameter_preserved(self):
        obj = mot.build_mot_object(b"<x/>")
        obj.parameters.append(MotParameter(0x3F, b"\xde\xad"))
        obj = MotObject(
            core=MotHeaderCore(
                body_size=len(obj.body),
                header_size=7 + sum(len(p.encoded()) for p in obj.parameters),
            ),
            parameters=obj.parameters,
            body=obj.body,
        )
        parsed = mot.parse_object(mot.serialize_object(obj))
        assert parsed.parameter(0x3F) == MotParameter(0x3F, b"\xde\xad")

    def test_truncated_parameter_region(self):
        core = MotHeaderCore(body_size=0, header_size=9)
        with pytest.raises(Truncated):
            mot.parse_object(core.to_bytes() + b"\x0c")  # param id only, header cut

    @given(st.binary(min_size=1, max_size=64), st.booleans(), st.booleans())
    def test_roundtrip_property(self, body, with_start, with_expire):
        window = ValidityWindow(
            start_validity=100 if with_start else None,
            expire_time=200 if with_expire else None,
        )
        obj = mot.build_mot_object(body, window)
        assert mot.parse_object(mot.serialize_object(obj)) == obj


class TestSegmentation:
    def test_segment_sizes(self):
        groups = mot.segment(b"\xaa" * 1000, transport_id=1, segment_size=256)
        assert [len(g.data) for g in groups] == [256, 256, 256, 232]
        assert [g.last for g in groups] == [False, False, False, True]
        assert [g.segment_number for g in groups] == [0, 1, 2, 3]
        assert all(g.crc_ok() for g in groups)

    def test_single_segment(self):
        (group,) = mot.segment(b"0123456789", transport_id=1, segment_size=256)
        assert group.last and group.segment_number == 0

    def test_exact_fit(self):
        groups = mot.segment(b"\xbb" * 256, transport_id=1, segment_size=256)
        assert len(groups) == 1 and groups[0].last

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            mot.segment(b"", transport_id=1, segment_size=16)

    def test_group_wire_roundtrip(self):
        for group in mot.segment(b"payload bytes here", 42, 5):
            assert mot.parse_group(mot.serialize_group(group)) == group


class TestReassembly:
    def make_groups(self, payload=b"\xaa" * 1000, segment_size=256, tid=1):
        return mot.segment(payload, transport_id=tid, segment_size=segment_size)

    def test_shuffled_roundtrip(self):
        payload = bytes(random.Random(7).randrange(256) for _ in range(1000))
        groups = self.make_groups(payload)
        shuffled = groups[:]
        random.Random(13).shuffle(shuffled)
        assert mot.reassemble(shuffled) == payload

    def test_missing_segment(self):
        groups = self.make_groups()
        with pytest.raises(MissingSegments) as err:
            mot.reassemble([g for g in groups if g.segment_number != 2])
        assert err.value.missing == [2]

    def test_crc_failure_on_flipped_bit(self):
        groups = self.make_groups()
        target = groups[1]
        corrupted = DataGroup(
            transport_id=target.transport_id,
            segment_number=target.segment_number,
            last=target.last,
            data=bytes([target.data[0] ^ 0x01]) + target.data[1:],
            crc=target.crc,
        )
        with pytest.raises(CrcFailure) as err:
            mot.reassemble([groups[0], corrupted, groups[2], groups[3]])
        assert err.value.segment_number == 1

    def test_duplicate_segment(self):
        groups = self.make_groups()
        with pytest.raises(DuplicateSegment):
            mot.reassemble(groups + [groups[1]])

    def test_no_terminal(self):
        groups = self.make_groups()
        with pytest.raises(NoTerminalSegment):
            mot.reassemble(groups[:-1])

    def test_mixed_transport_ids(self):
        with pytest.raises(MixedTransportIds):
            mot.reassemble(self.make_groups(tid=1) + self.make_groups(tid=2))

    def test_buffer_out_of_order_completion(self):
        groups = self.make_groups()
        buf = mot.ReassemblyBuffer()
        order = [groups[3], groups[0], groups[2], groups[1]]
        results = [buf.add(g) for g in order]
        assert results[:3] == [None, None, None]
        assert results[3] == b"\xaa" * 1000
        assert buf.pending_transport_ids() == []

    def test_buffer_ignores_exact_duplicate(self):
        groups = self.make_groups()
        buf = mot.ReassemblyBuffer()
        assert buf.add(groups[0]) is None
        assert buf.add(groups[0]) is None

    @given(
        st.binary(min_size=1, max_size=400),
        st.integers(1, 64),
        st.integers(0, 0xFFFF),
        st.randoms(use_true_random=False),
    )
    def test_full_cycle_property(self, body, segment_size, tid, rng):
        window = ValidityWindow(start_validity=5, expire_time=50)
        obj = mot.build_mot_object(body, window)
        groups = mot.segment(mot.serialize_object(obj), tid, segment_size)
        shuffled = groups[:]
        rng.shuffle(shuffled)
        parsed = mot.parse_object(mot.reassemble(shuffled))
        assert parsed.body == body
        assert mot.object_validity(parsed) == window


class TestValidity:
    def test_unconstrained(self):
        obj = mot.build_mot_object(b"<x/>")
        assert mot.check_validity(obj, now=0) is ValidityState.ACTIVE
        assert mot.check_validity(obj, now=10**10) is ValidityState.ACTIVE

    def test_boundaries(self):
        obj = mot.build_mot_object(b"<x/>", ValidityWindow(100, 200))
        assert mot.check_validity(obj, now=99) is ValidityState.PENDING
        assert mot.check_validity(obj, now=100) is ValidityState.ACTIVE  # inclusive start
        assert mot.check_validity(obj, now=199) is ValidityState.ACTIVE
        assert mot.check_validity(obj, now=200) is ValidityState.EXPIRED  # exclusive end

    def test_malformed_timestamp(self):
        obj = mot.build_mot_object(b"<x/>")
        obj.parameters.append(MotParameter(mot.PARAM_START_VALIDITY, b"\x00\x01"))
        with pytest.raises(MalformedTimestamp):
            mot.check_validity(obj, now=0)

    @given(st.integers(0, 500), st.integers(0, 500), st.lists(st.integers(0, 600), min_size=2))
    def test_monotone_transitions(self, start, length, times):
        obj = mot.build_mot_object(b"<x/>", ValidityWindow(start, start + length + 1))
        order = {ValidityState.PENDING: 0, ValidityState.ACTIVE: 1, ValidityState.EXPIRED: 2}
        states = [order[mot.check_validity(obj, now=t)] for t in sorted(times)]
        assert states == sorted(states)
