"""Buffer bounds, ping-phase retries and failure timeouts.

The guard only keeps the bookkeeping (outstanding phases and retry counts) and
answers questions; the owning :class:`~causal_mesh.pcbroadcast.PCProcess`
performs the resulting link actions.
"""

from __future__ import annotations

from typing import Dict, Optional

from .core import ProcessId

REOPEN = "reopen"
CLOSE = "close"


class BufferGuard:
    """Outstanding ping phases (``outstanding``: phase -> peer) and retry counts.

    ``max_size`` and ``max_retry`` of ``None`` mean unbounded.
    """

    def __init__(self, max_size: Optional[int] = None, max_retry: Optional[int] = None) -> None:
        if max_size is not None and max_size < 1:
            raise ValueError("max_size must be positive")
        if max_retry is not None and max_retry < 0:
            raise ValueError("max_retry must be non-negative")
        self.max_size = max_size
        self.max_retry = max_retry
        self.outstanding: Dict[int, ProcessId] = {}
        self.retries: Dict[ProcessId, int] = {}

    def on_ping(self, q: ProcessId, phase: int) -> None:
        if q not in self.retries:
            self.retries[q] = 0
        self.outstanding[phase] = q

    def admits(self, size: int) -> bool:
        """Whether a buffer currently holding ``size`` messages may take one more."""
        return self.max_size is None or size + 1 <= self.max_size

    def _forget_phases(self, q: ProcessId) -> None:
        for phase in [i for i, peer in self.outstanding.items() if peer == q]:
            del self.outstanding[phase]

    def retry(self, q: ProcessId) -> Optional[str]:
        """Invalidate ``q``'s phases and decide between a fresh phase and giving up."""
        self._forget_phases(q)
        if q not in self.retries:
            return None
        self.retries[q] += 1
        if self.max_retry is None or self.retries[q] <= self.max_retry:
            return REOPEN
        return CLOSE

    def on_timeout(self, phase: int) -> Optional[ProcessId]:
        """Peer to retry if ``phase`` is still outstanding."""
        return self.outstanding.get(phase)

    def on_ack(self, q: ProcessId, phase: int) -> None:
        if self.outstanding.get(phase) == q:
            del self.outstanding[phase]
            self.retries.pop(q, None)

    def on_close(self, q: ProcessId) -> None:
        self._forget_phases(q)
        self.retries.pop(q, None)
