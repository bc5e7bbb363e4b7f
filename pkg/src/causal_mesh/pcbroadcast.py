"""Preventive causal broadcast: reliable broadcast restricted to safe FIFO links.

A freshly opened link starts unsafe. The owner pings the new neighbour over
safe links, buffers everything it delivers in the meantime, and once the pong
comes back it flushes the buffer on the new link and starts using it.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Set, Tuple

from .core import Network, Payload, Ping, Pong, ProcessId, ProtocolMessage
from .guard import CLOSE, REOPEN, BufferGuard
from .rbroadcast import RBroadcastProcess

FLOOD = "flood"
ROUTE = "route"


class Buffer:
    __slots__ = ("phase", "msgs")

    def __init__(self, phase: int) -> None:
        self.phase = phase
        self.msgs: List[Payload] = []

    def __len__(self) -> int:
        return len(self.msgs)

    def __repr__(self) -> str:
        return f"Buffer(phase={self.phase}, msgs={[str(m.id) for m in self.msgs]})"


class PCProcess(RBroadcastProcess):
    """``neighbors`` holds the safe links; ``buffers`` the links still in a ping phase.

    Pings travel over safe links either by flooding (deduplicated by
    ``(pinger, phase)``) or hop by hop along a route the network supplies.
    """

    protocol = "pc"

    def __init__(self, pid: ProcessId, net: Network, max_size: Optional[int] = None,
                 max_retry: Optional[int] = None, ping_routing: str = FLOOD) -> None:
        super().__init__(pid, net)
        if ping_routing not in (FLOOD, ROUTE):
            raise ValueError(f"unknown ping routing {ping_routing!r}")
        self.buffers: Dict[ProcessId, Buffer] = {}
        self.ping_counter = 0
        self.guard = BufferGuard(max_size, max_retry)
        self.ping_routing = ping_routing
        self._seen_pings: Set[Tuple[ProcessId, int]] = set()

    # -- safety -----------------------------------------------------------

    def open_link(self, q: ProcessId) -> None:
        if q == self.pid or q in self.neighbors or q in self.buffers:
            return
        self.net.control(self.pid, "link_opened", peer=q)
        if not self.neighbors and self.delivered == 0:
            # nothing delivered yet, so nothing can be overtaken on this link
            self.neighbors[q] = None
            self.net.control(self.pid, "link_safe", peer=q)
            return
        self._start_phase(q)

    def _start_phase(self, q: ProcessId) -> None:
        self.ping_counter += 1
        phase = self.ping_counter
        self.neighbors.pop(q, None)
        self.buffers[q] = Buffer(phase)
        self.guard.on_ping(q, phase)
        self.net.control(self.pid, "ping_sent", peer=q, phase=phase)
        self._send_ping(Ping(self.pid, q, phase))
        self.net.arm_timeout(self.pid, q, phase)

    def _send_ping(self, ping: Ping) -> None:
        if self.ping_routing == FLOOD:
            self._seen_pings.add((ping.src, ping.phase))
            self._forward(ping)
            return
        hop = self.net.next_hop(self.pid, ping)
        if hop is None:
            self.net.control(self.pid, "ping_unroutable", peer=ping.src, phase=ping.phase)
        else:
            self.net.send(self.pid, hop, ping)

    def on_control(self, src: ProcessId, msg: ProtocolMessage) -> None:
        if isinstance(msg, Ping):
            if self.ping_routing == FLOOD:
                key = (msg.src, msg.phase)
                if key in self._seen_pings:
                    return
                self._seen_pings.add(key)
            if msg.dst == self.pid:
                self.on_ping(msg)
            elif self.ping_routing == FLOOD:
                self._forward(msg)
            else:
                self._send_ping(msg)
        elif isinstance(msg, Pong):
            self.on_pong(msg)

    def on_ping(self, ping: Ping) -> None:
        self.net.control(self.pid, "pong_sent", peer=ping.src, phase=ping.phase)
        self.net.send_direct(self.pid, ping.src, Pong(ping.src, ping.dst, ping.phase))

    def on_pong(self, pong: Pong) -> None:
        q = pong.dst
        buf = self.buffers.get(q)
        if pong.src != self.pid or buf is None or buf.phase != pong.phase:
            self.net.control(self.pid, "pong_discarded", peer=q, phase=pong.phase)
            return
        send = self.net.send
        for m in buf.msgs:
            send(self.pid, q, m)
        del self.buffers[q]
        self.neighbors[q] = None
        self.guard.on_ack(q, pong.phase)
        self.net.control(self.pid, "buffer_flushed", peer=q, phase=pong.phase)
        self.net.control(self.pid, "link_safe", peer=q, phase=pong.phase)

    def close_link(self, q: ProcessId) -> None:
        was_safe = self.neighbors.pop(q, 0) is None
        was_buffering = self.buffers.pop(q, None) is not None
        self.guard.on_close(q)
        if was_safe or was_buffering:
            self.net.control(self.pid, "link_closed", peer=q)

    # -- bounding buffers -------------------------------------------------

    def retry(self, q: ProcessId) -> None:
        decision = self.guard.retry(q)
        if decision is None:
            return
        self.net.control(self.pid, "phase_retry", peer=q)
        if decision == REOPEN:
            self.net.control(self.pid, "buffer_reset", peer=q)
            self._start_phase(q)
        elif decision == CLOSE:
            self.net.control(self.pid, "link_abandoned", peer=q)
            self.close_link(q)

    def on_timeout(self, peer: ProcessId, phase: int) -> None:
        q = self.guard.on_timeout(phase)
        if q is None:
            return
        self.net.control(self.pid, "timeout_fired", peer=q, phase=phase)
        self.retry(q)

    # -- dissemination ----------------------------------------------------

    def _deliver(self, msg: Payload) -> None:
        if not self.buffers:
            super()._deliver(msg)
            return
        oversize = []
        admits = self.guard.admits
        for q, buf in self.buffers.items():
            if admits(len(buf.msgs)):
                buf.msgs.append(msg)
                self.ops.buffer_appends += 1
            else:
                oversize.append(q)
        super()._deliver(msg)
        for q in oversize:
            self.retry(q)

    def unsafe_links(self) -> int:
        return len(self.buffers)
