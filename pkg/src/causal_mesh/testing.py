"""A :class:`~causal_mesh.core.Network` stub for driving processes by hand."""

from __future__ import annotations

from typing import Dict, List, Optional

from .core import Network, ProcessId


class RecordingNetwork(Network):
    """In-memory :class:`Network` that just records what processes ask for."""

    def __init__(self, route: Optional[Dict[tuple, ProcessId]] = None) -> None:
        self.sent: List[tuple] = []
        self.direct: List[tuple] = []
        self.delivered: List[tuple] = []
        self.controls: List[tuple] = []
        self.timeouts: List[tuple] = []
        self.route = route or {}

    def send(self, src, dst, msg):
        self.sent.append((src, dst, msg))

    def send_direct(self, src, dst, msg):
        self.direct.append((src, dst, msg))

    def deliver(self, pid, msg):
        self.delivered.append((pid, msg))

    def control(self, pid, event, peer=None, phase=None):
        self.controls.append((pid, event, peer, phase))

    def arm_timeout(self, pid, peer, phase):
        self.timeouts.append((pid, peer, phase))

    def next_hop(self, at, ping):
        return self.route.get((at, ping.dst))

    def events(self, name: str) -> List[tuple]:
        return [c for c in self.controls if c[1] == name]

    def clear(self) -> None:
        for lst in (self.sent, self.direct, self.delivered, self.controls, self.timeouts):
            lst.clear()
