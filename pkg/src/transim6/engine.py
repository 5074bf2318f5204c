"""Deterministic discrete-event core.

Time is fixed-point integer microseconds.  Events dispatch in strict
(time, seq) order, seq being a monotonically increasing tie-break counter,
so runs are bit-reproducible across platforms.
"""

from __future__ import annotations

import heapq

US_PER_S = 1_000_000

KIND_PACKET_ARRIVAL = "packet-arrival"
KIND_TRANSMIT_COMPLETE = "transmit-complete"
KIND_TIMER = "timer"
KIND_APP_SEND = "app-send"


def s_to_us(seconds: float) -> int:
    return round(seconds * US_PER_S)


def ms_to_us(ms: float) -> int:
    return round(ms * 1000)


def format_time(t_us: int) -> str:
    """Seconds with exactly six decimals, exact in fixed point."""
    return f"{t_us // US_PER_S}.{t_us % US_PER_S:06d}"


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


class SplitMix64:
    """64-bit splitmix generator.

    Sequence: state advances by 0x9E3779B97F4A7C15 per draw; each output is
    the new state mixed by two xor-shift multiplies (0xBF58476D1CE4E5B9,
    0x94D049BB133111EB) and a final 31-bit xor-shift.  Used only for flow
    start jitter, so one seed fixes the whole run.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self._state = seed & self.MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self.MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        return self.next_u64() % n


class EventQueue:
    """The simulator clock and pending-event heap."""

    def __init__(self):
        self._heap: list[tuple[int, int, str, object, object]] = []
        self._seq = 0
        self.now_us = 0
        self.dispatched = 0

    def schedule(self, time_us: int, kind: str, fn, arg=None) -> None:
        if time_us < self.now_us:
            raise SchedulingError(
                f"event {kind!r} scheduled at {time_us} before now={self.now_us}")
        heapq.heappush(self._heap, (time_us, self._seq, kind, fn, arg))
        self._seq += 1

    def schedule_in(self, delay_us: int, kind: str, fn, arg=None) -> None:
        self.schedule(self.now_us + delay_us, kind, fn, arg)

    def run_until(self, t_end_us: int, record: list | None = None) -> int:
        """Dispatch events through t_end (inclusive).  Returns the number
        dispatched; `record`, when given, collects (time, seq, kind)."""
        heap = self._heap
        while heap and heap[0][0] <= t_end_us:
            time_us, seq, kind, fn, arg = heapq.heappop(heap)
            self.now_us = time_us
            if record is not None:
                record.append((time_us, seq, kind))
            self.dispatched += 1
            fn(arg)
        if self.now_us < t_end_us:
            self.now_us = t_end_us
        return self.dispatched
