"""Traffic sources: constant-rate UDP and a small window-based TCP.

The TCP model keeps the classic sawtooth pieces: slow start adds one
segment per ack below ssthresh, congestion avoidance adds 1/cwnd per ack,
a retransmission timeout halves ssthresh, collapses cwnd to one and
resends from the highest cumulative ack (go-back-N).  There is no fast
retransmit; the single-path FIFO topology never reorders, so cumulative
acks plus timeouts are enough.  The effective window is capped by a
configured receiver window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import KIND_APP_SEND, KIND_TIMER, EventQueue

RTO_INITIAL_US = 3_000_000
RTO_MIN_US = 200_000
RTO_MAX_US = 60_000_000


@dataclass
class TcpLiteState:
    cwnd: float = 1.0
    ssthresh: float = 64.0
    in_flight: int = 0
    rto_us: int = RTO_INITIAL_US
    next_seq: int = 0
    acked_up_to: int = 0
    window_cap: int = 64
    srtt_us: float | None = None
    rttvar_us: float = 0.0


def tcp_lite_window(state: TcpLiteState) -> int:
    """Effective window: cwnd floored, bounded by the receiver window."""
    return max(1, min(int(state.cwnd), state.window_cap))


def tcp_lite_try_send(state: TcpLiteState) -> int:
    """How many new segments the window allows right now."""
    return max(0, tcp_lite_window(state) - state.in_flight)


def tcp_lite_on_ack(state: TcpLiteState, ack_no: int) -> int:
    """Apply a cumulative ack.  Returns the number of segments newly
    acked; stale and duplicate acks return 0 and change nothing."""
    if ack_no <= state.acked_up_to:
        return 0
    newly = ack_no - state.acked_up_to
    state.acked_up_to = ack_no
    state.in_flight = max(0, state.next_seq - ack_no)
    if state.cwnd < state.ssthresh:
        state.cwnd += 1.0
    else:
        state.cwnd += 1.0 / state.cwnd
    return newly


def tcp_lite_on_timeout(state: TcpLiteState) -> None:
    """Timeout: halve ssthresh, restart from one segment, back off the
    timer, rewind to the first unacked segment."""
    state.ssthresh = max(state.cwnd / 2.0, 2.0)
    state.cwnd = 1.0
    state.next_seq = state.acked_up_to
    state.in_flight = 0
    state.rto_us = min(state.rto_us * 2, RTO_MAX_US)


def tcp_lite_rtt_sample(state: TcpLiteState, sample_us: int) -> None:
    """Jacobson smoothing; clamps rto to [RTO_MIN_US, RTO_MAX_US]."""
    if state.srtt_us is None:
        state.srtt_us = float(sample_us)
        state.rttvar_us = sample_us / 2.0
    else:
        state.rttvar_us = 0.75 * state.rttvar_us + 0.25 * abs(state.srtt_us - sample_us)
        state.srtt_us = 0.875 * state.srtt_us + 0.125 * sample_us
    rto = int(state.srtt_us + max(4.0 * state.rttvar_us, 1000.0))
    state.rto_us = min(max(rto, RTO_MIN_US), RTO_MAX_US)


class CbrSource:
    """Fixed-size packets at an exact fixed interval, start to end."""

    def __init__(self, events: EventQueue, flow_id: int, payload_size: int,
                 interval_us: int, start_us: int, end_us: int, emit):
        if interval_us <= 0:
            raise ValueError("interval must be positive")
        self.events = events
        self.flow_id = flow_id
        self.payload_size = payload_size
        self.interval_us = interval_us
        self.start_us = start_us
        self.end_us = end_us
        self.emit = emit  # callback(flow_id, seq, payload_size)
        self._k = 0

    def start(self) -> None:
        if self.start_us < self.end_us:
            self.events.schedule(self.start_us, KIND_APP_SEND, self._on_send)

    def _on_send(self, _=None) -> None:
        self.emit(self.flow_id, self._k, self.payload_size)
        self._k += 1
        # absolute arithmetic, no drift accumulation
        next_us = self.start_us + self._k * self.interval_us
        if next_us < self.end_us:
            self.events.schedule(next_us, KIND_APP_SEND, self._on_send)


class FtpSender:
    """Backlogged bulk sender driving TcpLiteState; always has data."""

    def __init__(self, events: EventQueue, flow_id: int, payload_size: int,
                 start_us: int, emit, window_cap: int = 64):
        self.events = events
        self.flow_id = flow_id
        self.payload_size = payload_size
        self.start_us = start_us
        self.emit = emit  # callback(flow_id, seq, payload_size) -> bool (False: dropped at source)
        self.state = TcpLiteState(window_cap=window_cap)
        self._send_time_us: dict[int, int] = {}
        self._retransmitted: set[int] = set()
        self._timer_gen = 0
        self._timer_armed = False

    def start(self) -> None:
        self.events.schedule(self.start_us, KIND_APP_SEND, lambda _: self._pump())

    def _pump(self) -> None:
        for _ in range(tcp_lite_try_send(self.state)):
            self._send_segment()

    def _send_segment(self) -> None:
        st = self.state
        seq = st.next_seq
        if seq in self._send_time_us:
            self._retransmitted.add(seq)  # Karn: no RTT sample from this one
        else:
            self._send_time_us[seq] = self.events.now_us
        st.next_seq += 1
        st.in_flight += 1
        self.emit(self.flow_id, seq, self.payload_size)
        if not self._timer_armed:
            self._arm_timer()

    def _arm_timer(self) -> None:
        self._timer_gen += 1
        self._timer_armed = True
        self.events.schedule_in(self.state.rto_us, KIND_TIMER, self._on_timer, self._timer_gen)

    def _on_timer(self, gen: int) -> None:
        if gen != self._timer_gen:
            return  # superseded by a later ack
        self._timer_armed = False
        if self.state.in_flight == 0:
            return
        tcp_lite_on_timeout(self.state)
        self._arm_timer()
        self._pump()

    def on_ack(self, ack_no: int) -> None:
        st = self.state
        if tcp_lite_on_ack(st, ack_no) == 0:
            return
        last = ack_no - 1
        if last in self._send_time_us and last not in self._retransmitted:
            tcp_lite_rtt_sample(st, self.events.now_us - self._send_time_us[last])
        for seq in [s for s in self._send_time_us if s < ack_no]:
            del self._send_time_us[seq]
            self._retransmitted.discard(seq)
        if st.in_flight:
            self._arm_timer()
        else:
            self._timer_armed = False
            self._timer_gen += 1
        self._pump()


class TcpReceiver:
    """Cumulative-ack receiver; acks every arriving data segment."""

    def __init__(self, send_ack):
        self.expected = 0
        self.send_ack = send_ack  # callback(ack_no)
        self.delivered: list[int] = []

    def on_data(self, seq: int) -> None:
        if seq == self.expected:
            self.expected += 1
            self.delivered.append(seq)
        self.send_ack(self.expected)
