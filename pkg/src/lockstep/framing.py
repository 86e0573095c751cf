"""Socket helpers for length-prefixed frames."""

from __future__ import annotations

import socket
import struct

from . import wire


def recv_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes, or None on clean EOF at a frame boundary."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(min(n - got, 65536))
        if not chunk:
            if got == 0:
                return None
            raise ConnectionError(f"peer closed mid-frame ({got}/{n} bytes)")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes | None:
    """Read one complete frame (prefix + payload), or None on clean EOF."""
    prefix = recv_exact(sock, 4)
    if prefix is None:
        return None
    (length,) = struct.unpack("<I", prefix)
    if length > wire.MAX_PAYLOAD:
        raise wire.DecodeError(0, f"declared payload of {length} bytes exceeds {wire.MAX_PAYLOAD}")
    payload = recv_exact(sock, length)
    if payload is None:
        raise ConnectionError("peer closed between frame prefix and payload")
    return prefix + payload


def write_message(sock: socket.socket, msg: wire.Message) -> None:
    sock.sendall(wire.encode_message(msg))
