"""Connection handling: streaming TCP transport bridging agents to sessions.

Per connection there is one reader thread; it only decodes frames and
enqueues work, never executing session logic. Every request gets exactly
one response, written in request-arrival order with the request's
sequence number echoed. Responses are drained through a per-channel
ordered slot queue by whichever context fulfills them (the world loop
for session requests, the reader for registry requests and immediate
errors); a drain guard keeps writes serialized and ordered even when
fulfillment completes out of order. World create/destroy run on a
registry path that precedes any session.

Protocol violations answer with an ErrorResponse and, for undecodable
bytes, close the connection afterwards. One channel's violation never
affects another channel's session.
"""

from __future__ import annotations

import argparse
import logging
import socket
import sys
import threading
from collections import deque
from dataclasses import dataclass

from . import framing, kernel, wire
from .client import parse_address
from .session import RequestError, WorldHost

log = logging.getLogger("lockstep.server")

DEFAULT_ADDRESS = "[::]:10000"
SEND_BUFFER_BYTES = 4 * 1024 * 1024


@dataclass
class ServerConfig:
    address: str = DEFAULT_ADDRESS
    max_connections: int = 64
    queue_depth: int = 128
    allow_world_creation: bool = True
    default_scene: str = "seek_avoid"
    default_seed: int = 0


class _Slot:
    """One response-in-waiting, fulfilled exactly once."""

    __slots__ = ("sequence", "body", "done", "close_after")

    def __init__(self, sequence: int, close_after: bool = False):
        self.sequence = sequence
        self.body: wire.Body | None = None
        self.done = False
        self.close_after = close_after


class _Channel:
    """One agent connection: socket, ordered response slots, world binding."""

    def __init__(self, server: "Server", sock: socket.socket, agent_id: int):
        self.server = server
        self.sock = sock
        self.agent_id = agent_id
        self.host: WorldHost | None = None
        self._slots: deque[_Slot] = deque()
        self._lock = threading.Lock()
        self._draining = False
        self._eof = False
        self._closed = False
        self.closed_event = threading.Event()

    # -- reader -----------------------------------------------------------

    def reader_loop(self) -> None:
        try:
            while True:
                try:
                    frame = framing.read_frame(self.sock)
                except (wire.DecodeError, ConnectionError, OSError):
                    break
                if frame is None:
                    break
                try:
                    msg = wire.decode_message(frame)
                except wire.DecodeError as e:
                    slot = self._push_slot(_Slot(0, close_after=True))
                    self._fulfill(slot, wire.ErrorResponse(wire.INVALID_ARGUMENT, str(e)))
                    return
                self.dispatch(msg)
        finally:
            self._leave_if_joined()
            with self._lock:
                self._eof = True
                idle = not self._slots and not self._draining
            if idle:
                self._close()

    def dispatch(self, msg: wire.Message) -> None:
        body = msg.body
        slot = self._push_slot(_Slot(msg.sequence))
        try:
            if isinstance(body, wire.CreateWorldRequest):
                name = self.server.create_world(body.settings)
                self._fulfill(slot, wire.CreateWorldResponse(name))
            elif isinstance(body, wire.DestroyWorldRequest):
                self.server.destroy_world(body.world_name)
                self._fulfill(slot, wire.DestroyWorldResponse())
            elif isinstance(body, wire.JoinWorldRequest):
                self._schedule_join(body, slot)
            elif isinstance(body, (wire.StepRequest, wire.ResetRequest,
                                   wire.ResetWorldRequest, wire.LeaveWorldRequest)):
                self._schedule_session(body, slot)
            else:
                raise RequestError(wire.INVALID_ARGUMENT,
                                   f"{type(body).__name__} is not a request")
        except RequestError as e:
            self._fulfill(slot, wire.ErrorResponse(e.code, str(e)))
        except Exception as e:  # defensive: a dispatch bug answers, not kills
            log.exception("dispatch failure")
            self._fulfill(slot, wire.ErrorResponse(wire.INTERNAL, f"internal error: {e!r}"))

    def _schedule_join(self, body: wire.JoinWorldRequest, slot: _Slot) -> None:
        if self.host is not None:
            raise RequestError(wire.FAILED_PRECONDITION,
                               "connection already joined a world")
        host = self.server.lookup_world(body.world_name)

        def respond(response: wire.Body) -> None:
            if isinstance(response, wire.ErrorResponse):
                self.host = None
            self._fulfill(slot, response)

        self.host = host
        try:
            host.schedule(self.agent_id, body, respond)
        except RequestError:
            self.host = None
            raise

    def _schedule_session(self, body: wire.Body, slot: _Slot) -> None:
        host = self.host
        if host is None:
            raise RequestError(wire.FAILED_PRECONDITION,
                               "no world joined on this connection")
        if isinstance(body, wire.LeaveWorldRequest):
            def respond(response: wire.Body) -> None:
                if not isinstance(response, wire.ErrorResponse):
                    self.host = None
                self._fulfill(slot, response)
            host.schedule(self.agent_id, body, respond)
        else:
            host.schedule(self.agent_id, body,
                          lambda response: self._fulfill(slot, response))

    def _leave_if_joined(self) -> None:
        host, self.host = self.host, None
        if host is None:
            return
        try:
            host.schedule(self.agent_id, wire.LeaveWorldRequest(), None)
        except RequestError:
            pass

    # -- ordered response drain ---------------------------------------------
    #
    # Whichever context fulfills a slot attempts the drain; the guard flag
    # hands follow-up work to the active drainer, so frames always leave in
    # arrival order regardless of fulfillment order.

    def _push_slot(self, slot: _Slot) -> _Slot:
        with self._lock:
            self._slots.append(slot)
        return slot

    def _fulfill(self, slot: _Slot, body: wire.Body) -> None:
        with self._lock:
            if slot.done:
                return
            slot.body = body
            slot.done = True
            if self._draining:
                return
            self._draining = True
        self._drain()

    def _drain(self) -> None:
        close = False
        while True:
            with self._lock:
                if not self._slots or not self._slots[0].done:
                    self._draining = False
                    close = self._eof and not self._slots
                    break
                slot = self._slots.popleft()
            try:
                framing.write_message(self.sock, wire.Message(slot.sequence, slot.body))
            except OSError:
                close = True
                with self._lock:
                    self._draining = False
                    self._slots.clear()
                break
            if slot.close_after:
                close = True
                with self._lock:
                    self._draining = False
                break
        if close:
            self._close()

    def _close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        try:
            self.sock.close()
        except OSError:
            pass
        self.closed_event.set()
        self.server.forget_channel(self)


class Server:
    """A running server handle; also a context manager."""

    def __init__(self, config: ServerConfig):
        self.config = config
        host, port = parse_address(config.address)
        info = socket.getaddrinfo(host, port, type=socket.SOCK_STREAM,
                                  flags=socket.AI_PASSIVE)[0]
        self._listener = socket.socket(info[0], socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(info[4])
        self._listener.listen(128)
        self.address = self._format_address()
        self._worlds: dict[str, tuple[WorldHost, dict]] = {}
        self._registry_lock = threading.Lock()
        self._channels: set[_Channel] = set()
        self._channels_lock = threading.Lock()
        self._next_agent_id = 1
        self._next_world_number = 1
        self._closing = False
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="lockstep-accept", daemon=True)
        self._accept_thread.start()
        log.info("serving on %s", self.address)

    def _format_address(self) -> str:
        name = self._listener.getsockname()
        host, port = name[0], name[1]
        return f"[{host}]:{port}" if ":" in host else f"{host}:{port}"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- world registry ------------------------------------------------------

    def create_world(self, settings: dict[str, wire.Tensor]) -> str:
        if not self.config.allow_world_creation:
            raise RequestError(wire.FAILED_PRECONDITION,
                               "world creation is disabled on this server")
        scene = self._setting_str(settings, "scene", self.config.default_scene)
        seed = self._setting_int(settings, "seed", self.config.default_seed)
        with self._registry_lock:
            name = self._setting_str(settings, "world_name",
                                     f"world-{self._next_world_number}")
            existing = self._worlds.get(name)
            if existing is not None:
                if existing[1] == settings:
                    return name  # idempotent re-create with identical settings
                raise RequestError(wire.INVALID_ARGUMENT,
                                   f"world '{name}' exists with different settings")
            try:
                world = kernel.create_world(scene, seed, settings, name=name)
            except kernel.InvalidWorldSettings as e:
                raise RequestError(wire.INVALID_ARGUMENT, str(e)) from None
            host = WorldHost(world, queue_limit=self.config.queue_depth)
            host.start()
            self._worlds[name] = (host, dict(settings))
            self._next_world_number += 1
            log.info("created world '%s' (scene=%s seed=%d)", name, scene, seed)
            return name

    def lookup_world(self, name: str) -> WorldHost:
        with self._registry_lock:
            entry = self._worlds.get(name)
        if entry is None:
            raise RequestError(wire.NOT_FOUND, f"no world named '{name}'")
        return entry[0]

    def destroy_world(self, name: str) -> None:
        with self._registry_lock:
            entry = self._worlds.get(name)
            if entry is None:
                raise RequestError(wire.NOT_FOUND, f"no world named '{name}'")
            host = entry[0]
            if host.joined_count() > 0:
                raise RequestError(wire.FAILED_PRECONDITION,
                                   f"world '{name}' still has joined agents")
            del self._worlds[name]
        host.stop()
        log.info("destroyed world '%s'", name)

    @staticmethod
    def _setting_str(settings: dict, key: str, default: str) -> str:
        tensor = settings.get(key)
        if tensor is None:
            return default
        try:
            value = tensor.item()
        except ValueError as e:
            raise RequestError(wire.INVALID_ARGUMENT, f"setting '{key}': {e}") from None
        if not isinstance(value, str):
            raise RequestError(wire.INVALID_ARGUMENT, f"setting '{key}' must be a string")
        return value

    @staticmethod
    def _setting_int(settings: dict, key: str, default: int) -> int:
        tensor = settings.get(key)
        if tensor is None:
            return default
        try:
            value = tensor.item()
        except ValueError as e:
            raise RequestError(wire.INVALID_ARGUMENT, f"setting '{key}': {e}") from None
        if isinstance(value, bool) or not isinstance(value, int):
            raise RequestError(wire.INVALID_ARGUMENT, f"setting '{key}' must be an integer")
        return value

    # -- connections ---------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                sock, _peer = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, SEND_BUFFER_BYTES)
            with self._channels_lock:
                full = len(self._channels) >= self.config.max_connections
                if not full:
                    channel = _Channel(self, sock, self._next_agent_id)
                    self._next_agent_id += 1
                    self._channels.add(channel)
            if full:
                try:
                    framing.write_message(sock, wire.Message(0, wire.ErrorResponse(
                        wire.FAILED_PRECONDITION, "connection limit reached")))
                    sock.close()
                except OSError:
                    pass
                continue
            threading.Thread(target=channel.reader_loop, daemon=True,
                             name=f"reader-{channel.agent_id}").start()

    def forget_channel(self, channel: _Channel) -> None:
        with self._channels_lock:
            self._channels.discard(channel)

    # -- shutdown -------------------------------------------------------------

    def close(self) -> None:
        """Stop accepting, drain in-flight responses, stop all worlds."""
        if self._closing:
            return
        self._closing = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._channels_lock:
            channels = list(self._channels)
        for channel in channels:
            try:
                channel.sock.shutdown(socket.SHUT_RD)
            except OSError:
                pass
        for channel in channels:
            channel.closed_event.wait(timeout=5.0)
        with self._registry_lock:
            hosts = [h for h, _ in self._worlds.values()]
            self._worlds.clear()
        for host in hosts:
            host.stop()
        log.info("server on %s closed", self.address)


def serve(config: ServerConfig | None = None) -> Server:
    """Bind and start serving; raises OSError if the address is unusable."""
    return Server(config or ServerConfig())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lockstep-server",
        description="Serve deterministic simulation worlds to remote agents.",
    )
    parser.add_argument("--uri_address", default=DEFAULT_ADDRESS,
                        help="listen address as HOST:PORT (default [::]:10000)")
    parser.add_argument("--scene", default="seek_avoid",
                        help="default scene for CreateWorld requests")
    parser.add_argument("--seed", type=int, default=0,
                        help="default seed for CreateWorld requests")
    parser.add_argument("--max_connections", type=int, default=64)
    parser.add_argument("--logfile", nargs="?", const="", default=None,
                        help="log to PATH (no value: stdout; absent: stderr)")
    args = parser.parse_args(argv)

    if args.logfile is None:
        logging.basicConfig(level=logging.INFO)
    elif args.logfile == "":
        logging.basicConfig(level=logging.INFO, stream=sys.stdout)
    else:
        logging.basicConfig(level=logging.INFO, filename=args.logfile)

    config = ServerConfig(address=args.uri_address, max_connections=args.max_connections,
                          default_scene=args.scene, default_seed=args.seed)
    server = serve(config)
    print(f"serving on {server.address}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
