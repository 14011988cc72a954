"""Wall and virtual clocks driving tick schedules and playback timing.

Both clocks count integer milliseconds from their epoch. The virtual clock
advances only when told to, which makes scripted runs deterministic and
faster than real time; the wall clock sleeps toward absolute deadlines so
fixed-rate loops do not drift.
"""

import time


class WallClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def now_ms(self) -> int:
        return int((time.monotonic() - self._t0) * 1000.0)

    def sleep_until(self, deadline_ms: int) -> None:
        remaining = self._t0 + deadline_ms / 1000.0 - time.monotonic()
        if remaining > 0:
            time.sleep(remaining)


class VirtualClock:
    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def sleep_until(self, deadline_ms: int) -> None:
        if deadline_ms > self._now:
            self._now = int(deadline_ms)


def tick_times_ms(rate_hz: float, duration_ms: int) -> list[int]:
    """Integer-millisecond tick schedule [0, duration): round(k * 1000 / rate)."""
    period = 1000.0 / rate_hz
    ticks = []
    k = 0
    while True:
        t = round(k * period)
        if t >= duration_ms:
            return ticks
        ticks.append(int(t))
        k += 1
