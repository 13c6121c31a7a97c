"""Minimal deterministic discrete-event kernel.

Processes are plain generators that yield events. The clock only moves
forward, ties at equal times fire in insertion order, and capacity stores
grant strictly first-come first-served.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from typing import Any, Callable, Generator, Iterable


class SimulationError(RuntimeError):
    """Kernel accounting or usage error."""


class Handle:
    """A scheduled callback; cancelling it turns the firing into a no-op."""

    __slots__ = ("time", "seq", "callback", "cancelled")

    def __init__(self, time: float, seq: int, callback: Callable[[], Any]):
        self.time = time
        self.seq = seq
        self.callback = callback
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def __lt__(self, other: "Handle") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


class Event:
    """Something a process can wait on.

    An event is *triggered* once it has a value and *processed* once its
    callbacks have run (always at a later queue step, never re-entrantly).
    """

    def __init__(self, env: "Environment"):
        self.env = env
        self.callbacks: list[Callable[["Event"], Any]] | None = []
        self.triggered = False
        self.processed = False
        self.value: Any = None

    def succeed(self, value: Any = None) -> "Event":
        if self.triggered:
            raise SimulationError("event already triggered")
        self.triggered = True
        self.value = value
        self.env.schedule(0.0, self._fire)
        return self

    def _fire(self) -> None:
        self.processed = True
        callbacks, self.callbacks = self.callbacks, None
        for cb in callbacks or ():
            cb(self)


class Timeout(Event):
    def __init__(self, env: "Environment", delay: float, value: Any = None, at: float | None = None):
        super().__init__(env)
        self.delay = delay
        self.triggered = True
        self.value = value
        if at is None:
            env.schedule(delay, self._fire)
        else:
            env.schedule_at(at, self._fire)


class AllOf(Event):
    """Fires once every child event has been processed; value is the list of child values."""

    def __init__(self, env: "Environment", events: Iterable[Event]):
        super().__init__(env)
        self._events = list(events)
        self._pending = 0
        for ev in self._events:
            if not ev.processed:
                self._pending += 1
                ev.callbacks.append(self._child_done)
        if self._pending == 0:
            self.succeed([ev.value for ev in self._events])

    def _child_done(self, _ev: Event) -> None:
        self._pending -= 1
        if self._pending == 0:
            self.succeed([ev.value for ev in self._events])


class Process(Event):
    """Drives a generator; the process itself is an event that fires on return."""

    def __init__(self, env: "Environment", generator: Generator[Event, Any, Any]):
        super().__init__(env)
        self._gen = generator
        env.schedule(0.0, lambda: self._resume(None))

    def _resume(self, event: Event | None) -> None:
        send = None if event is None else event.value
        try:
            target = self._gen.send(send)
        except StopIteration as stop:
            self.succeed(stop.value)
            return
        if not isinstance(target, Event):
            raise SimulationError(f"process yielded non-event {target!r}")
        if target.processed:
            self.env.schedule(0.0, lambda: self._resume(target))
        else:
            target.callbacks.append(self._resume)


class Environment:
    """Virtual clock plus a (time, sequence) ordered event queue."""

    def __init__(self, initial_time: float = 0.0):
        self._now = float(initial_time)
        self._queue: list[Handle] = []
        self._seq = itertools.count()

    @property
    def now(self) -> float:
        return self._now

    def schedule(self, delay: float, callback: Callable[[], Any]) -> Handle:
        if delay < 0:
            raise ValueError(f"negative delay {delay}")
        handle = Handle(self._now + delay, next(self._seq), callback)
        heapq.heappush(self._queue, handle)
        return handle

    def schedule_at(self, time: float, callback: Callable[[], Any]) -> Handle:
        """Absolute-time variant of :meth:`schedule`; avoids ``now + (t - now)`` rounding."""
        if time < self._now:
            raise ValueError(f"time {time} lies before now={self._now}")
        handle = Handle(float(time), next(self._seq), callback)
        heapq.heappush(self._queue, handle)
        return handle

    def timeout(self, delay: float, value: Any = None) -> Timeout:
        if delay < 0:
            raise ValueError(f"negative delay {delay}")
        return Timeout(self, delay, value)

    def timeout_until(self, time: float, value: Any = None) -> Timeout:
        if time < self._now:
            raise ValueError(f"time {time} lies before now={self._now}")
        return Timeout(self, time - self._now, value, at=time)

    def event(self) -> Event:
        return Event(self)

    def process(self, generator: Generator[Event, Any, Any]) -> Process:
        return Process(self, generator)

    def all_of(self, events: Iterable[Event]) -> AllOf:
        return AllOf(self, events)

    def peek(self) -> float:
        """Time of the next live entry, or inf when the queue is empty."""
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].time if self._queue else float("inf")

    def step(self) -> None:
        handle = heapq.heappop(self._queue)
        if handle.cancelled:
            return
        self._now = handle.time
        handle.callback()

    def run(self, until: float | None = None) -> float:
        """Process events until the queue drains or the next one lies past ``until``."""
        if until is not None and until < self._now:
            raise ValueError(f"until={until} lies before now={self._now}")
        while True:
            nxt = self.peek()
            if nxt == float("inf"):
                break
            if until is not None and nxt > until:
                break
            self.step()
        if until is not None:
            self._now = float(until)
        return self._now


class CapacityStore:
    """Integer-level container with strict FIFO blocking acquisition.

    A blocked large request also blocks every later request on the same
    store, even ones that would fit.
    """

    def __init__(self, env: Environment, capacity: int, init: int | None = None):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.env = env
        self.capacity = int(capacity)
        self.level = self.capacity if init is None else int(init)
        if not 0 <= self.level <= self.capacity:
            raise ValueError("initial level outside [0, capacity]")
        self._waiters: deque[tuple[int, Event]] = deque()
        self.outstanding = self.capacity - self.level

    @property
    def queue_length(self) -> int:
        return len(self._waiters)

    def acquire(self, amount: int) -> Event:
        amount = int(amount)
        if amount < 1:
            raise ValueError(f"acquire amount must be positive, got {amount}")
        if amount > self.capacity:
            raise SimulationError(
                f"acquire({amount}) can never be satisfied by a store of capacity {self.capacity}"
            )
        ev = Event(self.env)
        if not self._waiters and self.level >= amount:
            self._grant(amount, ev)
        else:
            self._waiters.append((amount, ev))
        return ev

    def release(self, amount: int) -> None:
        amount = int(amount)
        if amount < 1:
            raise ValueError(f"release amount must be positive, got {amount}")
        if amount > self.capacity - self.level:
            raise SimulationError(
                f"release({amount}) exceeds held amount {self.capacity - self.level}"
            )
        self.level += amount
        self.outstanding -= amount
        while self._waiters and self._waiters[0][0] <= self.level:
            want, ev = self._waiters.popleft()
            self._grant(want, ev)

    def _grant(self, amount: int, ev: Event) -> None:
        self.level -= amount
        self.outstanding += amount
        ev.succeed(amount)
