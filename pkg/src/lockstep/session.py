"""Session layer: per-agent sessions and the world time manager.

The world time manager (WTM) is the single scheduler that interleaves
agent request execution with simulation frames. Each executed request
returns a tick preference:

  MUST_TICK      the simulation must advance before the agent's next request
  MUST_NOT_TICK  it must not
  MAY_TICK       it may, per external criteria (here: a per-agent budget of
                 executed requests per frame; exhausting it promotes the
                 MAY_TICK to MUST_TICK)

One frame cycle: take the pending agents (those with queued work) in
ascending agent id; execute each agent's queue in order, stopping that
agent on MUST_TICK and deferring its remaining requests (and any
continuation) to the future list; once every pending agent has ticked or
drained, advance exactly one frame if any executed request demanded it;
the future list becomes the next cycle's pending list.

A request that needs several frames (e.g. settling physics) returns a
continuation, which re-enters the front of its agent's queue; its
response is sent only when no continuation remains.

Queues are multi-producer (one producer per connection) and single
consumer (the WTM loop). Session and world state are touched only on the
WTM loop.
"""

from __future__ import annotations

import enum
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import kernel, wire
from .avatars import ActionError, Avatar, EpisodeState, ObservationError, Task
from .kernel import World
from .wire import EpisodeStateTag


class TickState(enum.Enum):
    MUST_TICK = "MustTick"
    MUST_NOT_TICK = "MustNotTick"
    MAY_TICK = "MayTick"


class RequestError(Exception):
    """A request failure with a wire error code; answered, never fatal."""

    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class BackpressureError(RequestError):
    def __init__(self, agent_id: int, depth: int):
        super().__init__(
            wire.FAILED_PRECONDITION,
            f"request queue for agent {agent_id} is full ({depth} pending)",
        )


@dataclass
class ExecOutcome:
    """What one execution of a request produced: a tick preference, plus a
    continuation when the request needs to run again on a later frame."""

    tick: TickState
    continuation: Optional[Callable[[], "ExecOutcome"]] = None


class SessionRequest:
    """One schedulable unit of agent work, answered exactly once."""

    __slots__ = ("agent_id", "run", "label", "_respond", "responded")

    def __init__(self, agent_id: int, run: Callable[[], ExecOutcome],
                 respond: Callable[[wire.Body], None] | None = None, label=None):
        self.agent_id = agent_id
        self.run = run
        self.label = label
        self._respond = respond
        self.responded = False

    def respond(self, body: wire.Body) -> None:
        if self.responded:
            return
        self.responded = True
        if self._respond is not None:
            self._respond(body)

    def fail(self, error: RequestError) -> None:
        self.respond(wire.ErrorResponse(error.code, str(error)))


@dataclass
class FrameReport:
    requests_executed: int = 0
    frame_advanced: bool = False


class WorldTimeManager:
    """Centralized scheduler coordinating agent requests and frame advances."""

    def __init__(self, advance: Callable[[], None], *,
                 queue_limit: int = 128, may_tick_budget: int = 64):
        self._advance = advance
        self.queue_limit = queue_limit
        self.may_tick_budget = may_tick_budget
        self._cond = threading.Condition()
        self._inbox: dict[int, deque[SessionRequest]] = {}
        self._carry: dict[int, deque[SessionRequest]] = {}
        self._stopping = False
        self.frames_advanced = 0
        self.requests_executed = 0

    # -- producer side -----------------------------------------------------

    def schedule_request(self, agent_id: int, request: SessionRequest) -> None:
        """Append to the agent's queue; raises BackpressureError past the limit."""
        with self._cond:
            if self._stopping:
                raise RequestError(wire.FAILED_PRECONDITION, "world is shutting down")
            queue = self._inbox.setdefault(agent_id, deque())
            if len(queue) >= self.queue_limit:
                raise BackpressureError(agent_id, len(queue))
            queue.append(request)
            self._cond.notify_all()

    # -- consumer side (the WTM loop) ---------------------------------------

    def _take_pending(self) -> dict[int, deque[SessionRequest]]:
        """Deferred work first, then everything that arrived since last cycle.
        Requests arriving while a cycle runs wait for the next frame boundary."""
        with self._cond:
            pending: dict[int, deque[SessionRequest]] = {}
            agent_ids = set(self._carry) | {a for a, q in self._inbox.items() if q}
            for agent_id in sorted(agent_ids):
                queue: deque[SessionRequest] = deque()
                queue.extend(self._carry.pop(agent_id, ()))
                inbox = self._inbox.get(agent_id)
                if inbox:
                    queue.extend(inbox)
                    inbox.clear()
                if queue:
                    pending[agent_id] = queue
            return pending

    def _execute(self, request: SessionRequest) -> ExecOutcome:
        try:
            return request.run()
        except RequestError as e:
            request.fail(e)
            return ExecOutcome(TickState.MUST_NOT_TICK)
        except Exception as e:  # a faulty request must not poison the loop
            request.fail(RequestError(wire.INTERNAL, f"internal error: {e!r}"))
            return ExecOutcome(TickState.MUST_NOT_TICK)

    def run_frame_cycle(self) -> FrameReport:
        """Execute one pending/future scheduling round and at most one frame."""
        pending = self._take_pending()
        if not pending:
            return FrameReport()
        executed = 0
        tick_demanded = False
        future: dict[int, deque[SessionRequest]] = {}
        for agent_id in sorted(pending):
            queue = pending[agent_id]
            agent_executed = 0
            while queue:
                request = queue.popleft()
                outcome = self._execute(request)
                executed += 1
                agent_executed += 1
                if outcome.continuation is not None:
                    request.run = outcome.continuation
                    queue.appendleft(request)
                tick = outcome.tick
                if tick is TickState.MAY_TICK and agent_executed >= self.may_tick_budget:
                    tick = TickState.MUST_TICK
                if tick is TickState.MUST_TICK:
                    tick_demanded = True
                    if queue:
                        future[agent_id] = queue
                    break
        if tick_demanded:
            self._advance()
            self.frames_advanced += 1
        self.requests_executed += executed
        with self._cond:
            for agent_id, queue in future.items():
                self._carry[agent_id] = queue
            if future:
                self._cond.notify_all()
        return FrameReport(executed, tick_demanded)

    def _has_work_locked(self) -> bool:
        return any(self._carry.values()) or any(self._inbox.values())

    def run_until_idle(self, max_cycles: int = 1_000_000) -> int:
        """Drive cycles until no work remains; returns cycles run (test/in-process use)."""
        cycles = 0
        while cycles < max_cycles:
            report = self.run_frame_cycle()
            if report.requests_executed == 0 and not report.frame_advanced:
                break
            cycles += 1
        return cycles

    def run_loop(self, stop: threading.Event) -> None:
        """Consumer loop: sleep when idle, drain gracefully on stop."""
        while True:
            with self._cond:
                while not self._has_work_locked() and not stop.is_set():
                    self._cond.wait(timeout=0.1)
                if stop.is_set() and not self._has_work_locked():
                    self._stopping = True
                    return
            self.run_frame_cycle()

    def stop(self) -> None:
        with self._cond:
            self._stopping = True
            self._cond.notify_all()


JOINED = "JOINED"
LEFT = "LEFT"


class Session:
    """One agent's live binding of a task and an avatar inside a world."""

    def __init__(self, agent_id: int, world: World, task: Task, avatar: Avatar):
        self.agent_id = agent_id
        self.world = world
        self.task = task
        self.avatar = avatar
        self.status = JOINED
        self.episode = EpisodeState()
        self._episode_active = False
        self._interrupted_by_world_reset = False

    # Request handlers run only on the WTM loop. Each builds its response
    # via `respond` (exactly once) and returns an ExecOutcome.

    def handle_step(self, body: wire.StepRequest, respond) -> ExecOutcome:
        self._require_joined()
        if self._interrupted_by_world_reset:
            self._interrupted_by_world_reset = False
            self._episode_active = False
            respond(wire.StepResponse(EpisodeStateTag.INTERRUPTED, {}))
            return ExecOutcome(TickState.MUST_NOT_TICK)
        if not self._episode_active:
            raise RequestError(wire.FAILED_PRECONDITION, "episode not running")
        if not body.actions:
            observations = self._read(body.requested_observations)
            respond(wire.StepResponse(self.task.episode_state(), observations))
            return ExecOutcome(TickState.MUST_NOT_TICK)
        try:
            self.avatar.apply_actions(body.actions)
        except ActionError as e:
            raise RequestError(wire.INVALID_ARGUMENT, str(e)) from None
        self.task.on_step(self.world, self.avatar)
        preference = self.task.tick_preference()

        def finish() -> ExecOutcome:
            if not self.task.is_step_complete(self.world, self.avatar):
                return ExecOutcome(TickState.MUST_TICK, finish)
            self.episode.steps += 1
            self.episode.last_reward = self.task.reward()
            tag = self.task.episode_state()
            self.episode.tag = tag
            observations = self._read(body.requested_observations)
            respond(wire.StepResponse(tag, observations))
            if tag.is_terminal:
                self._episode_active = False
            return ExecOutcome(TickState.MUST_NOT_TICK)

        return ExecOutcome(preference, finish)

    def handle_reset(self, body: wire.ResetRequest, respond) -> ExecOutcome:
        self._require_joined()
        self.task.apply_settings(body.settings)
        self.task.start_episode(self.world, self.avatar)
        self.episode = EpisodeState()
        self._episode_active = True
        self._interrupted_by_world_reset = False
        respond(wire.ResetResponse(self.avatar.spec_set()))
        return ExecOutcome(TickState.MAY_TICK)

    def handle_leave(self, respond) -> ExecOutcome:
        self._require_joined()
        self.status = LEFT
        self._episode_active = False
        if self.avatar.entity is not None and self.avatar.entity.alive:
            self.world.remove_entity(self.avatar.entity)
        self.avatar.entity = None
        respond(wire.LeaveWorldResponse())
        return ExecOutcome(TickState.MUST_NOT_TICK)

    def on_world_reset(self, initiated_by_self: bool) -> None:
        if self._episode_active and not initiated_by_self:
            self._interrupted_by_world_reset = True
        self._episode_active = False
        self.avatar.entity = None

    def _require_joined(self):
        if self.status != JOINED:
            raise RequestError(wire.FAILED_PRECONDITION, "session has left the world")

    def _read(self, uids) -> dict[int, wire.Tensor]:
        try:
            return self.avatar.read_observations(uids)
        except ObservationError as e:
            raise RequestError(wire.INVALID_ARGUMENT, str(e)) from None


class WorldHost:
    """A world plus its scheduler and sessions: the in-process unit the
    transport binds connections to. All wire-request dispatch below runs on
    the WTM loop; only schedule() is called from connection threads."""

    def __init__(self, world: World, *, queue_limit: int = 128, may_tick_budget: int = 64):
        self.world = world
        self.wtm = WorldTimeManager(
            lambda: kernel.advance_frame(world),
            queue_limit=queue_limit,
            may_tick_budget=may_tick_budget,
        )
        self.sessions: dict[int, Session] = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self.wtm.run_loop, args=(self._stop,),
            name=f"wtm-{self.world.name}", daemon=True,
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        with self.wtm._cond:
            self.wtm._cond.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=5)
        kernel.destroy_world(self.world)

    def joined_count(self) -> int:
        return sum(1 for s in self.sessions.values() if s.status == JOINED)

    # -- request scheduling ----------------------------------------------------

    def schedule(self, agent_id: int, body: wire.Body,
                 respond: Callable[[wire.Body], None] | None) -> None:
        """Wrap a decoded request body into a scheduled unit of work."""
        request = SessionRequest(agent_id, lambda: None, respond,
                                 label=type(body).__name__)
        request.run = lambda: self._dispatch(agent_id, body, request.respond)
        self.wtm.schedule_request(agent_id, request)

    def _dispatch(self, agent_id: int, body: wire.Body, respond) -> ExecOutcome:
        if isinstance(body, wire.JoinWorldRequest):
            return self._join(agent_id, body, respond)
        session = self.sessions.get(agent_id)
        if session is None:
            raise RequestError(wire.FAILED_PRECONDITION, "agent has not joined this world")
        if isinstance(body, wire.StepRequest):
            return session.handle_step(body, respond)
        if isinstance(body, wire.ResetRequest):
            return session.handle_reset(body, respond)
        if isinstance(body, wire.ResetWorldRequest):
            return self._reset_world(session, respond)
        if isinstance(body, wire.LeaveWorldRequest):
            outcome = session.handle_leave(respond)
            del self.sessions[agent_id]
            return outcome
        raise RequestError(wire.INVALID_ARGUMENT,
                           f"request kind {type(body).__name__} not valid for a session")

    def _join(self, agent_id: int, body: wire.JoinWorldRequest, respond) -> ExecOutcome:
        existing = self.sessions.get(agent_id)
        if existing is not None and existing.status == JOINED:
            raise RequestError(wire.FAILED_PRECONDITION, "agent already joined this world")
        scene = kernel.SCENES[self.world.scene_id]
        try:
            task, avatar = scene.make_session(self.world, agent_id, body.settings)
        except (ValueError, KeyError) as e:
            raise RequestError(wire.INVALID_ARGUMENT, f"invalid join settings: {e}") from None
        session = Session(agent_id, self.world, task, avatar)
        self.sessions[agent_id] = session
        respond(wire.JoinWorldResponse(avatar.spec_set()))
        return ExecOutcome(TickState.MUST_NOT_TICK)

    def _reset_world(self, session: Session, respond) -> ExecOutcome:
        kernel.reset_world(self.world)
        for other in self.sessions.values():
            if other.status == JOINED:
                other.on_world_reset(initiated_by_self=other is session)
        respond(wire.ResetWorldResponse())
        return ExecOutcome(TickState.MUST_NOT_TICK)
