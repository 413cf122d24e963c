"""Clock abstraction: virtual time for reproducible runs, wall time for service mode."""
from __future__ import annotations

import time


class Clock:
    """Milliseconds since epoch. Subclasses decide whose epoch."""

    def now_ms(self) -> int:
        raise NotImplementedError

    def advance(self, ms: int) -> None:
        raise NotImplementedError

    @property
    def simulated(self) -> bool:
        return False


class SimulatedClock(Clock):
    """Deterministic virtual clock; time moves only when told to."""

    def __init__(self, start_ms: int = 0):
        if start_ms < 0:
            raise ValueError("clock cannot start before zero")
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def advance(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("time does not run backwards")
        self._now += int(ms)

    def advance_to(self, ms: int) -> None:
        if ms < self._now:
            raise ValueError("time does not run backwards")
        self._now = int(ms)

    @property
    def simulated(self) -> bool:
        return True


class WallClock(Clock):
    """Real time; advance() is a no-op because the world advances itself."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def advance(self, ms: int) -> None:
        return None
