import io

import pytest
from hypothesis import given, strategies as st

from dabxml import frames
from dabxml.frames import (
    FastInfoGroup,
    KeyMismatch,
    NonAsciiCharacter,
    PayloadOverflow,
    StreamFormatError,
    TransmissionFrame,
    TruncatedPayload,
    UserAppInfo,
    ValueOutOfRange,
    WrongFigKind,
)


def pack_entry_oracle(entry: UserAppInfo) -> bytes:
    """Independent bit-string assembler for one FIG 0/13 entry."""
    word = format(entry.user_app_type, "011b") + format(len(entry.app_data), "05b")
    return (
        bytes([entry.subchannel_id])
        + bytes(int(word[i : i + 8], 2) for i in (0, 8))
        + entry.app_data
    )


entries_strategy = st.lists(
    st.builds(
        UserAppInfo,
        subchannel_id=st.integers(0, 63),
        user_app_type=st.integers(0, 2047),
        app_data=st.binary(max_size=6),
    ),
    max_size=4,
).filter(lambda es: sum(3 + len(e.app_data) for e in es) <= 29)


class TestFig013:
    def test_single_entry_matches_oracle(self):
        entry = UserAppInfo(subchannel_id=3, user_app_type=6, app_data=b"")
        fig = frames.encode_fig_0_13([entry])
        assert fig.fig_type == 0 and fig.extension == 13
        assert fig.payload == bytes([0x03, 0x00, 0xC0])
        assert fig.payload == pack_entry_oracle(entry)

    def test_empty_entry_list(self):
        fig = frames.encode_fig_0_13([])
        assert (fig.fig_type, fig.extension, fig.payload) == (0, 13, b"")
        assert frames.decode_fig_0_13(fig) == []

    def test_two_entries_roundtrip(self):
        entries = [
            UserAppInfo(subchannel_id=1, user_app_type=6),
            UserAppInfo(subchannel_id=2, user_app_type=6),
        ]
        assert frames.decode_fig_0_13(frames.encode_fig_0_13(entries)) == entries

    def test_decode_known_payload(self):
        fig = FastInfoGroup(fig_type=0, extension=13, payload=bytes([0x03, 0x00, 0xC0]))
        assert frames.decode_fig_0_13(fig) == [
            UserAppInfo(subchannel_id=3, user_app_type=6, app_data=b"")
        ]

    def test_decode_truncated(self):
        fig = FastInfoGroup(fig_type=0, extension=13, payload=bytes([0x03, 0x00]))
        with pytest.raises(TruncatedPayload):
            frames.decode_fig_0_13(fig)

    def test_decode_truncated_app_data(self):
        # declares 4 app_data bytes but carries 1
        payload = bytes([0x03, 0x00, 0xC4, 0xAA])
        with pytest.raises(TruncatedPayload):
            frames.decode_fig_0_13(FastInfoGroup(0, 13, payload))

    def test_decode_wrong_kind(self):
        with pytest.raises(WrongFigKind):
            frames.decode_fig_0_13(FastInfoGroup(fig_type=0, extension=1, payload=b""))

    def test_overflow(self):
        entries = [UserAppInfo(subchannel_id=i, user_app_type=6) for i in range(10)]
        with pytest.raises(PayloadOverflow):
            frames.encode_fig_0_13(entries)

    def test_out_of_range_fields(self):
        with pytest.raises(ValueOutOfRange):
            frames.encode_fig_0_13([UserAppInfo(subchannel_id=64, user_app_type=6)])
        with pytest.raises(ValueOutOfRange):
            frames.encode_fig_0_13([UserAppInfo(subchannel_id=0, user_app_type=2048)])
        with pytest.raises(ValueOutOfRange):
            frames.encode_fig_0_13([UserAppInfo(0, 6, app_data=b"x" * 32)])

    @given(entries_strategy)
    def test_encode_decode_bijection(self, entries):
        fig = frames.encode_fig_0_13(entries)
        assert frames.decode_fig_0_13(fig) == entries
        assert fig.payload == b"".join(pack_entry_oracle(e) for e in entries)

    def test_user_app_type_preserved_all_values(self):
        # full 11-bit sweep through encode -> container -> parse -> decode
        for uat in range(2048):
            fig = frames.encode_fig_0_13([UserAppInfo(subchannel_id=5, user_app_type=uat)])
            frame = frames.mux_frame([fig], {5: b"\x00" * 8}, {5: b""}, frame_index=0)
            blob = frames.serialize_frame(frame)
            (parsed,) = frames.read_frames(io.BytesIO(blob))
            decoded = frames.decode_fig_0_13(parsed.fic[0])
            assert decoded[0].user_app_type == uat


class TestDynamicLabel:
    def test_known_text(self):
        text = "Dancing Queen by ABBA"
        encoded = frames.encode_dynamic_label(text)
        assert encoded == text.encode("ascii")
        assert len(encoded) == 21

    def test_empty(self):
        assert frames.encode_dynamic_label("") == b""

    def test_non_ascii_rejected(self):
        with pytest.raises(NonAsciiCharacter):
            frames.encode_dynamic_label("café")

    def test_too_long(self):
        with pytest.raises(ValueOutOfRange):
            frames.encode_dynamic_label("x" * 129)

    @given(st.text(alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E), max_size=128))
    def test_roundtrip_carries_no_structure(self, text):
        # identity both ways: the label is just its bytes, no fields exist
        assert frames.decode_dynamic_label(frames.encode_dynamic_label(text)) == text


class TestMux:
    def test_single_subchannel(self):
        pad = b"\x01" * 8
        frame = frames.mux_frame([], {1: pad}, {1: b"audio"}, frame_index=7)
        assert frames.demux_pads(frame, 1) == [pad]
        assert frame.frame_index == 7

    def test_zero_subchannels(self):
        frame = frames.mux_frame([], {}, {}, frame_index=0)
        assert frame.subchannels == {}

    def test_isolation(self):
        pads = {1: b"\x01" * 4, 2: b"\x02" * 4, 3: b"\x03" * 4}
        audio = {k: b"" for k in pads}
        frame = frames.mux_frame([], pads, audio, frame_index=0)
        for sub, pad in pads.items():
            assert frames.demux_pads(frame, sub) == [pad]

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            frames.mux_frame([], {1: b""}, {2: b""}, frame_index=0)


class TestContainer:
    def build_frame(self, index=0):
        fig = frames.encode_fig_0_13([UserAppInfo(1, frames.USER_APP_XML_MESSAGE)])
        return frames.mux_frame(
            [fig], {1: b"\x00" * 10, 2: b"\xfd\x00\x01\xaa" + b"\x00" * 6},
            {1: b"tone", 2: b"hum"}, frame_index=index,
        )

    def test_roundtrip(self):
        frame = self.build_frame(index=3)
        blob = frames.serialize_frame(frame)
        assert blob.startswith(b"DABS")
        (parsed,) = frames.read_frames(io.BytesIO(blob))
        assert parsed == frame

    def test_multi_frame_stream(self):
        stream = io.BytesIO()
        for i in range(4):
            frames.write_frame(stream, self.build_frame(index=i))
        stream.seek(0)
        parsed = list(frames.read_frames(stream))
        assert [f.frame_index for f in parsed] == [0, 1, 2, 3]

    def test_truncation_reports_offset(self):
        blob = frames.serialize_frame(self.build_frame())
        cut = len(blob) - 3
        with pytest.raises(StreamFormatError) as err:
            list(frames.read_frames(io.BytesIO(blob[:cut])))
        assert err.value.offset == cut

    def test_bad_magic(self):
        with pytest.raises(StreamFormatError):
            list(frames.read_frames(io.BytesIO(b"XXXX" + b"\x00" * 20)))

    def test_empty_stream(self):
        assert list(frames.read_frames(io.BytesIO(b""))) == []

    @given(
        st.dictionaries(
            st.integers(0, 63),
            st.tuples(st.binary(max_size=20), st.binary(max_size=30)),
            max_size=4,
        ),
        st.integers(0, 2**32 - 1),
    )
    def test_roundtrip_property(self, subs, index):
        pads = {k: v[1] for k, v in subs.items()}
        audio = {k: v[0] for k, v in subs.items()}
        frame = frames.mux_frame([], pads, audio, frame_index=index)
        (parsed,) = frames.read_frames(io.BytesIO(frames.serialize_frame(frame)))
        assert parsed == frame
