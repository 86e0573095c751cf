"""Minimal wire-protocol client: enough to drive a server for tests and benchmarks.

Synchronous and deliberately thin. `request()` sends one message and
blocks for its response; `post()`/`next_response()` allow pipelining.
Responses are matched by sequence number, which the server echoes.
"""

from __future__ import annotations

import socket

from . import framing, wire


class ServerError(Exception):
    """An ErrorResponse surfaced client-side; carries the wire error code."""

    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(f"{wire.ERROR_CODE_NAMES.get(code, code)}: {message}")


def parse_address(address: str) -> tuple[str, int]:
    """Parse 'host:port', including bracketed IPv6 like '[::]:10000'."""
    host, _, port = address.rpartition(":")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    if not host or not port:
        raise ValueError(f"address '{address}' is not HOST:PORT")
    return host, int(port)


class Channel:
    """One connection to a server."""

    def __init__(self, address: str, timeout: float | None = 30.0):
        host, port = parse_address(address)
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._next_sequence = 1

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- raw pipelined I/O ---------------------------------------------------

    def post(self, body: wire.Body) -> int:
        """Send a request without waiting; returns its sequence number."""
        seq = self._next_sequence
        self._next_sequence += 1
        framing.write_message(self.sock, wire.Message(seq, body))
        return seq

    def next_response(self) -> wire.Message:
        frame = framing.read_frame(self.sock)
        if frame is None:
            raise ConnectionError("server closed the connection")
        return wire.decode_message(frame)

    # -- blocking request/response --------------------------------------------

    def request(self, body: wire.Body) -> wire.Body:
        seq = self.post(body)
        msg = self.next_response()
        if msg.sequence != seq:
            raise ConnectionError(f"response sequence {msg.sequence} != request {seq}")
        if isinstance(msg.body, wire.ErrorResponse):
            raise ServerError(msg.body.code, msg.body.message)
        expected = wire.RESPONSE_FOR_REQUEST[type(body)]
        if not isinstance(msg.body, expected):
            raise ConnectionError(
                f"expected {expected.__name__}, got {type(msg.body).__name__}")
        return msg.body

    # -- convenience wrappers --------------------------------------------------

    def create_world(self, settings: dict | None = None) -> str:
        body = self.request(wire.CreateWorldRequest(_tensorize(settings)))
        return body.world_name

    def join_world(self, world_name: str, settings: dict | None = None) -> wire.SpecSet:
        body = self.request(wire.JoinWorldRequest(world_name, _tensorize(settings)))
        return body.specs

    def reset(self, settings: dict | None = None) -> wire.SpecSet:
        return self.request(wire.ResetRequest(_tensorize(settings))).specs

    def step(self, actions: dict[int, wire.Tensor] | None = None,
             requested: tuple[int, ...] = ()) -> wire.StepResponse:
        return self.request(wire.StepRequest(actions or {}, requested))

    def reset_world(self) -> None:
        self.request(wire.ResetWorldRequest())

    def leave_world(self) -> None:
        self.request(wire.LeaveWorldRequest())

    def destroy_world(self, world_name: str) -> None:
        self.request(wire.DestroyWorldRequest(world_name))


def _tensorize(settings: dict | None) -> dict[str, wire.Tensor]:
    return {k: wire.as_tensor(v) for k, v in (settings or {}).items()}


def connect(address: str, timeout: float | None = 30.0) -> Channel:
    return Channel(address, timeout)
