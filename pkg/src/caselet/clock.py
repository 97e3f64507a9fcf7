"""Injected time sources. Every temporal decision in the kernel flows
through a Clock; SystemClock below is the only place the wall clock is
ever read, and it is wired in only by the serve entry point."""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int: ...


class ManualClock:
    """Settable clock for tests, jobs at a fixed instant, and simulation."""

    def __init__(self, start: int = 0):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def set(self, at: int) -> None:
        self._now = int(at)

    def advance(self, seconds: int) -> int:
        self._now += int(seconds)
        return self._now


class SystemClock:
    def now(self) -> int:
        return int(time.time())
