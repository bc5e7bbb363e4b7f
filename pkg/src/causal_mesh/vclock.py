"""Vector-clock causal broadcast, the reference point for overhead and delivery cost."""

from __future__ import annotations

from typing import Dict, List

from .core import MessageId, Network, ProcessId, ProtocolMessage, VcPayload
from .rbroadcast import RBroadcastProcess


def is_ready(clock: Dict[ProcessId, int], msg: VcPayload) -> bool:
    origin = msg.id.origin
    for p, c in msg.clock:
        if p == origin:
            if c != clock.get(p, 0) + 1:
                return False
        elif c > clock.get(p, 0):
            return False
    return True


class VcProcess(RBroadcastProcess):
    """Floods over every link and parks messages until their clock is satisfied.

    ``clock[p]`` counts messages from ``p`` delivered here. Entries never heard
    from are simply absent (read as zero) and are not put on the wire.
    """

    protocol = "vc"

    def __init__(self, pid: ProcessId, net: Network) -> None:
        super().__init__(pid, net)
        self.clock: Dict[ProcessId, int] = {}
        self.pending: List[VcPayload] = []

    def adopt(self, donor: "VcProcess") -> None:
        self.received = donor.received.copy()
        self.clock = dict(donor.clock)
        self.pending = list(donor.pending)

    def broadcast(self, body: bytes = b"") -> MessageId:
        mid = self.next_message_id()
        self.clock[self.pid] = self.clock.get(self.pid, 0) + 1
        msg = VcPayload(mid, body, tuple(sorted(self.clock.items())))
        self.mark_received(mid)
        self._forward(msg)
        self._vc_deliver(msg, advance=False)
        return mid

    def receive(self, src: ProcessId, msg: ProtocolMessage) -> None:
        if isinstance(msg, VcPayload):
            self.vc_on_receive(msg)

    def vc_on_receive(self, msg: VcPayload) -> int:
        """Handle a copy; returns how many messages became deliverable."""
        if not self.mark_received(msg.id):
            return 0
        self._forward(msg)
        self.ops.pending_scan_steps += 1
        if not is_ready(self.clock, msg):
            self.pending.append(msg)
            self.net.control(self.pid, "vc_parked", peer=msg.id.origin, phase=len(self.pending))
            return 0
        self._vc_deliver(msg)
        return 1 + self._drain()

    def _drain(self) -> int:
        delivered = 0
        progress = bool(self.pending)
        while progress:
            progress = False
            for i, m in enumerate(self.pending):
                self.ops.pending_scan_steps += 1
                if is_ready(self.clock, m):
                    del self.pending[i]
                    self._vc_deliver(m)
                    delivered += 1
                    progress = True
                    break
        if delivered:
            self.net.control(self.pid, "vc_drained", phase=len(self.pending))
        return delivered

    def _vc_deliver(self, msg: VcPayload, advance: bool = True) -> None:
        if advance:
            origin = msg.id.origin
            self.clock[origin] = self.clock.get(origin, 0) + 1
        self._deliver(msg)
