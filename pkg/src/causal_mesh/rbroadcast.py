"""Flood-based uniform reliable broadcast with exactly-once delivery."""

from __future__ import annotations

from typing import Dict, Iterable

from .core import MessageId, Network, Payload, ProcessBase, ProcessId, ProtocolMessage


class RBroadcastProcess(ProcessBase):
    """Sends every first-received message on every outgoing link.

    ``neighbors`` is an insertion-ordered set (a dict with ``None`` values) so
    fan-out order, and therefore the simulation, is deterministic.
    """

    protocol = "rbroadcast"

    def __init__(self, pid: ProcessId, net: Network) -> None:
        super().__init__(pid, net)
        self.neighbors: Dict[ProcessId, None] = {}

    # -- topology hooks ---------------------------------------------------

    def install_safe(self, q: ProcessId) -> None:
        """Add a link that needs no safety handshake (initial topology, joins)."""
        if q != self.pid:
            self.neighbors[q] = None

    def open_link(self, q: ProcessId) -> None:
        if q != self.pid and q not in self.neighbors:
            self.neighbors[q] = None
            self.net.control(self.pid, "link_opened", peer=q)
            self.net.control(self.pid, "link_safe", peer=q)

    def close_link(self, q: ProcessId) -> None:
        if self.neighbors.pop(q, 0) is None:
            self.net.control(self.pid, "link_closed", peer=q)

    def safe_out(self) -> Iterable[ProcessId]:
        return self.neighbors.keys()

    def adopt(self, donor: "RBroadcastProcess") -> None:
        """State transfer at join: start with the donor's view of what was seen."""
        self.received = donor.received.copy()

    # -- dissemination ----------------------------------------------------

    def broadcast(self, body: bytes = b"") -> MessageId:
        mid = self.next_message_id()
        msg = Payload(mid, body)
        self.mark_received(mid)
        self._forward(msg)
        self._deliver(msg)
        return mid

    def receive(self, src: ProcessId, msg: ProtocolMessage) -> None:
        if isinstance(msg, Payload):
            self.on_payload(msg)
        else:
            self.on_control(src, msg)

    def on_payload(self, msg: Payload) -> bool:
        if not self.mark_received(msg.id):
            return False
        self._forward(msg)
        self._deliver(msg)
        return True

    def on_control(self, src: ProcessId, msg: ProtocolMessage) -> None:
        # plain R-broadcast has no control traffic
        pass

    def on_timeout(self, peer: ProcessId, phase: int) -> None:
        pass

    def _forward(self, msg: ProtocolMessage) -> None:
        send = self.net.send
        pid = self.pid
        for q in self.neighbors:
            send(pid, q, msg)

    def _deliver(self, msg: Payload) -> None:
        self.delivered += 1
        self.ops.deliveries += 1
        self.net.deliver(self.pid, msg)
