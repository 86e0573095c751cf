"""A tour of the wire protocol: tensors, messages, frames, and errors.

Run:  python3 demos/01_wire_protocol.py
"""

import numpy as np

from lockstep import wire
from lockstep.wire import DType, Message, Tensor

# Tensors are the sole currency for actions, observations, and settings.
# A scalar is a rank-0 tensor; note the tiny canonical encoding.
move = Tensor.from_scalar(1.0, DType.F32)
print("scalar F32 1.0 ->", move)

# An image observation is just a U8 tensor with a [height, width, 3] shape.
pixels = Tensor.from_numpy(np.zeros((72, 96, 3), dtype=np.uint8))
print(f"PIXELS tensor: {pixels.shape}, {len(pixels.data)} bytes of data")

# Messages pair a client-chosen sequence number with one typed body.
request = Message(1, wire.StepRequest(
    actions={1: move, 4: Tensor.from_scalar(True, DType.BOOL)},
    requested_observations=(1, 2, 3),
))
frame = wire.encode_message(request)
print(f"\nStepRequest frame ({len(frame)} bytes): {frame.hex()}")

# Decoding inverts encoding exactly; map ordering is canonical, so equal
# messages always produce identical bytes.
decoded = wire.decode_message(frame)
print("round trip equal:", decoded == request)

shuffled = Message(1, wire.StepRequest(
    actions={4: Tensor.from_scalar(True, DType.BOOL), 1: move},
    requested_observations=(1, 2, 3),
))
print("insertion order irrelevant:", wire.encode_message(shuffled) == frame)

# The decoder is total: malformed bytes produce errors with byte offsets,
# never crashes, and it never reads past the declared frame length.
for blob in (b"", frame[:10], b"\x05\x00\x00\x00\xee\x00\x00\x00\x00"):
    try:
        wire.decode_message(blob)
    except wire.DecodeError as e:
        print(f"decode error: {e}")
