"""Wire protocol: golden bytes, round trips, canonicality, decoder totality."""

import random
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lockstep import wire
from lockstep.wire import (
    DecodeError,
    DType,
    EpisodeStateTag,
    Message,
    SpecSet,
    Tensor,
    decode_message,
    encode_message,
)

from msggen import random_message


def encode_tensor_body(tensor: Tensor) -> bytes:
    out = bytearray()
    wire._w_tensor(out, tensor)
    return bytes(out)


class TestTensor:
    def test_scalar_f32_golden_bytes(self):
        tensor = Tensor.from_scalar(1.0, DType.F32)
        assert encode_tensor_body(tensor) == bytes.fromhex("01000000803f")

    def test_pixel_tensor_data_length(self):
        tensor = Tensor(DType.U8, (72, 96, 3), bytes(72 * 96 * 3))
        assert len(tensor.data) == 20736
        assert tensor.element_count == 20736

    def test_empty_shape_is_scalar(self):
        assert Tensor.from_scalar(3, DType.I64).element_count == 1

    def test_zero_extent_means_empty(self):
        tensor = Tensor(DType.F64, (0, 4), b"")
        assert tensor.element_count == 0

    def test_data_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="expected"):
            Tensor(DType.F32, (2,), b"\x00" * 7)

    def test_bool_bytes_must_be_binary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            Tensor(DType.BOOL, (2,), b"\x00\x02")

    def test_string_round_trip(self):
        tensor = Tensor.from_strings(["seek", "", "müller", "空"], (2, 2))
        assert tensor.to_strings() == ["seek", "", "müller", "空"]

    def test_numpy_round_trip(self):
        arr = np.arange(12, dtype="<f4").reshape(3, 4)
        assert (Tensor.from_numpy(arr).to_numpy() == arr).all()

    def test_item_on_nonscalar_rejected(self):
        with pytest.raises(ValueError):
            Tensor.from_numpy(np.zeros(3, dtype="<f4")).item()


class TestGoldenExamples:
    def test_step_request_round_trip(self):
        msg = Message(42, wire.StepRequest(
            actions={1: Tensor.from_scalar(0.5, DType.F32),
                     4: Tensor.from_scalar(True, DType.BOOL)},
            requested_observations=(1, 2, 3),
        ))
        assert decode_message(encode_message(msg)) == msg

    def test_unknown_message_kind(self):
        frame = struct.pack("<IBQ", 9, 0xEE, 1)
        with pytest.raises(DecodeError, match="unknown message kind"):
            decode_message(frame)

    def test_empty_bytes_truncated(self):
        with pytest.raises(DecodeError, match="truncated frame"):
            decode_message(b"")

    def test_response_sequence_matches_request(self):
        # Sequence is carried verbatim through the envelope.
        msg = Message(2**63 + 5, wire.LeaveWorldResponse())
        assert decode_message(encode_message(msg)).sequence == 2**63 + 5


class TestRoundTrip:
    def test_random_messages_round_trip(self):
        rng = random.Random(20260810)
        for _ in range(500):
            msg = random_message(rng)
            assert decode_message(encode_message(msg)) == msg

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32))
    def test_hypothesis_seeded_round_trip(self, seed):
        msg = random_message(random.Random(seed))
        assert decode_message(encode_message(msg)) == msg

    def test_all_kinds_covered(self):
        rng = random.Random(7)
        seen = set()
        for _ in range(600):
            seen.add(type(random_message(rng).body))
        assert seen == set(wire.TAG_BY_BODY)


class TestCanonicality:
    def test_settings_insertion_order_irrelevant(self):
        a = {"zeta": Tensor.from_scalar(1, DType.I64), "alpha": Tensor.from_scalar(2, DType.I64)}
        b = dict(reversed(list(a.items())))
        assert (encode_message(Message(1, wire.CreateWorldRequest(a)))
                == encode_message(Message(1, wire.CreateWorldRequest(b))))

    def test_action_map_insertion_order_irrelevant(self):
        t = Tensor.from_scalar(0.0, DType.F32)
        a = Message(1, wire.StepRequest({3: t, 1: t}, ()))
        b = Message(1, wire.StepRequest({1: t, 3: t}, ()))
        assert encode_message(a) == encode_message(b)

    def test_equal_messages_equal_bytes(self):
        rng = random.Random(99)
        for _ in range(100):
            msg = random_message(rng)
            assert encode_message(msg) == encode_message(msg)


class TestDecodeErrors:
    def test_frame_length_mismatch(self):
        frame = encode_message(Message(1, wire.ResetWorldRequest()))
        with pytest.raises(DecodeError, match="length mismatch"):
            decode_message(frame + b"\x00")
        with pytest.raises(DecodeError, match="length mismatch"):
            decode_message(frame[:-1])

    def test_error_carries_offset(self):
        try:
            decode_message(struct.pack("<IBQ", 9, 0xEE, 1))
        except DecodeError as e:
            assert e.offset == 4
        else:
            pytest.fail("expected DecodeError")

    def test_truncated_tensor_data(self):
        good = encode_message(Message(1, wire.StepRequest(
            {1: Tensor.from_numpy(np.zeros(8, dtype="<f8"))}, ())))
        # Shorten the declared frame and payload so tensor data runs out.
        payload = bytearray(good[4:])
        clipped = payload[:-16]
        frame = struct.pack("<I", len(clipped)) + bytes(clipped)
        with pytest.raises(DecodeError, match="truncated frame"):
            decode_message(frame)

    def test_non_utf8_string(self):
        payload = bytearray()
        payload += struct.pack("<BQ", wire.TAG_BY_BODY[wire.CreateWorldResponse], 1)
        payload += struct.pack("<I", 2) + b"\xff\xfe"
        frame = struct.pack("<I", len(payload)) + bytes(payload)
        with pytest.raises(DecodeError, match="UTF-8"):
            decode_message(frame)

    def test_unsorted_map_keys_rejected(self):
        tensor_body = encode_tensor_body(Tensor.from_scalar(0.0, DType.F32))
        payload = bytearray()
        payload += struct.pack("<BQ", wire.TAG_BY_BODY[wire.StepRequest], 1)
        payload += struct.pack("<I", 2)
        payload += struct.pack("<I", 5) + tensor_body
        payload += struct.pack("<I", 3) + tensor_body
        payload += struct.pack("<I", 0)
        frame = struct.pack("<I", len(payload)) + bytes(payload)
        with pytest.raises(DecodeError, match="ascending"):
            decode_message(frame)

    def test_bad_episode_state(self):
        payload = struct.pack("<BQB", wire.TAG_BY_BODY[wire.StepResponse], 1, 9)
        payload += struct.pack("<I", 0)
        frame = struct.pack("<I", len(payload)) + payload
        with pytest.raises(DecodeError, match="episode state"):
            decode_message(frame)

    def test_oversize_declared_length(self):
        with pytest.raises(DecodeError, match="exceeds"):
            decode_message(struct.pack("<I", 2**31) + b"")

    def test_trailing_payload_bytes(self):
        good = encode_message(Message(1, wire.LeaveWorldRequest()))
        payload = good[4:] + b"\x00"
        frame = struct.pack("<I", len(payload)) + payload
        with pytest.raises(DecodeError, match="trailing"):
            decode_message(frame)

    def test_fuzz_smoke_never_crashes(self):
        rng = random.Random(0xF055)
        for _ in range(20_000):
            blob = rng.randbytes(rng.randint(0, 64))
            try:
                decode_message(blob)
            except DecodeError:
                pass


class TestEncodeErrors:
    def test_oversize_payload_rejected(self, monkeypatch):
        monkeypatch.setattr(wire, "MAX_PAYLOAD", 16)
        msg = Message(1, wire.CreateWorldResponse("a-name-longer-than-16-bytes"))
        with pytest.raises(wire.EncodeError, match="exceeds"):
            encode_message(msg)

    def test_unknown_body_type(self):
        with pytest.raises(wire.EncodeError, match="unknown message body"):
            encode_message(Message(1, object()))

    def test_uid_out_of_range(self):
        msg = Message(1, wire.StepRequest({}, (2**32,)))
        with pytest.raises(wire.EncodeError, match="u32 out of range"):
            encode_message(msg)


class TestSpecSet:
    def test_duplicate_uids_rejected(self):
        spec = wire.SensorSpec(1, "A", DType.F32, ())
        with pytest.raises(ValueError, match="duplicate uid"):
            SpecSet(sensors=(spec, wire.SensorSpec(1, "B", DType.F32, ())))

    def test_bounds_require_min_le_max(self):
        with pytest.raises(ValueError, match="min <= max"):
            wire.ActuatorSpec(1, "A", DType.F32, (), (2.0, 1.0))

    def test_unbounded_round_trip_preserves_none(self):
        specs = SpecSet(actuators=(wire.ActuatorSpec(1, "JUMP", DType.BOOL, (), None),))
        msg = Message(1, wire.JoinWorldResponse(specs))
        decoded = decode_message(encode_message(msg))
        assert decoded.body.specs.actuators[0].bounds is None

    def test_episode_state_terminality(self):
        assert not EpisodeStateTag.RUNNING.is_terminal
        assert EpisodeStateTag.TERMINATED.is_terminal
        assert EpisodeStateTag.INTERRUPTED.is_terminal


class TestAsTensor:
    @pytest.mark.parametrize("value,dtype", [
        ("seek_avoid", DType.STRING),
        (True, DType.BOOL),
        (7, DType.I64),
        (0.5, DType.F64),
    ])
    def test_python_scalars(self, value, dtype):
        tensor = wire.as_tensor(value)
        assert tensor.dtype == dtype
        assert tensor.item() == value

    def test_ndarray_passthrough(self):
        tensor = wire.as_tensor(np.zeros((2, 3), dtype="<i4"))
        assert tensor.dtype == DType.I32
        assert tensor.shape == (2, 3)
