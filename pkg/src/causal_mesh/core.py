"""Identifiers, message kinds and the received-message log shared by every protocol."""

from __future__ import annotations

import struct
from typing import Dict, Iterable, Iterator, NamedTuple, Optional, Set, Tuple, Union

ProcessId = int

# one-byte kind tags of the canonical encoding
TAG_PAYLOAD = 0x01
TAG_PING = 0x02
TAG_PONG = 0x03
TAG_VC_PAYLOAD = 0x04

_U64 = struct.Struct(">Q")
_ID = struct.Struct(">QQ")
_CONTROL = struct.Struct(">BQQQ")


class MessageId(NamedTuple):
    origin: ProcessId
    counter: int

    def __str__(self) -> str:
        return f"{self.origin}:{self.counter}"


class Payload(NamedTuple):
    id: MessageId
    body: bytes = b""


class Ping(NamedTuple):
    src: ProcessId
    dst: ProcessId
    phase: int


class Pong(NamedTuple):
    src: ProcessId
    dst: ProcessId
    phase: int


class VcPayload(NamedTuple):
    id: MessageId
    body: bytes
    # sparse clock: sorted (process, counter) pairs, zero entries omitted
    clock: Tuple[Tuple[ProcessId, int], ...]


ProtocolMessage = Union[Payload, Ping, Pong, VcPayload]


def encode(msg: ProtocolMessage) -> bytes:
    """Canonical fixed-width big-endian encoding.

    ``Payload``   tag(1) origin(8) counter(8) body
    ``Ping/Pong`` tag(1) src(8) dst(8) phase(8)
    ``VcPayload`` tag(1) origin(8) counter(8) (process(8) counter(8))* body
    """
    if isinstance(msg, Payload):
        return bytes([TAG_PAYLOAD]) + _ID.pack(*msg.id) + msg.body
    if isinstance(msg, Ping):
        return _CONTROL.pack(TAG_PING, msg.src, msg.dst, msg.phase)
    if isinstance(msg, Pong):
        return _CONTROL.pack(TAG_PONG, msg.src, msg.dst, msg.phase)
    if isinstance(msg, VcPayload):
        clock = b"".join(_ID.pack(p, c) for p, c in msg.clock)
        return bytes([TAG_VC_PAYLOAD]) + _ID.pack(*msg.id) + clock + msg.body
    raise TypeError(f"not a protocol message: {msg!r}")


def serialized_control_size(msg: ProtocolMessage) -> int:
    """Bytes spent on everything but the application body."""
    body = getattr(msg, "body", b"")
    if isinstance(msg, (Ping, Pong)):
        return _CONTROL.size
    if isinstance(msg, Payload):
        return 1 + _ID.size
    if isinstance(msg, VcPayload):
        return 1 + _ID.size + _ID.size * len(msg.clock)
    return len(encode(msg)) - len(body)


class ReceivedLog:
    """Per-origin compacted set of seen message ids.

    Each origin keeps the highest counter ``c`` such that ``1..c`` were all seen,
    plus the counters seen above it. Exceptions are folded into the prefix as
    soon as the gap closes, so in-order dissemination costs one integer per
    origin.
    """

    __slots__ = ("_max", "_exc")

    def __init__(self) -> None:
        self._max: Dict[ProcessId, int] = {}
        self._exc: Dict[ProcessId, Set[int]] = {}

    def __contains__(self, mid: MessageId) -> bool:
        origin, counter = mid
        if counter <= self._max.get(origin, 0):
            return True
        exc = self._exc.get(origin)
        return exc is not None and counter in exc

    def mark(self, mid: MessageId) -> bool:
        """Record ``mid``; True iff it was not seen before."""
        origin, counter = mid
        top = self._max.get(origin, 0)
        if counter <= top:
            return False
        if counter == top + 1:
            top = counter
            exc = self._exc.get(origin)
            if exc:
                while top + 1 in exc:
                    top += 1
                    exc.discard(top)
                if not exc:
                    del self._exc[origin]
            self._max[origin] = top
            return True
        exc = self._exc.setdefault(origin, set())
        if counter in exc:
            return False
        exc.add(counter)
        return True

    def max_contiguous(self, origin: ProcessId) -> int:
        return self._max.get(origin, 0)

    def exceptions(self, origin: ProcessId) -> Set[int]:
        return set(self._exc.get(origin, ()))

    def origins(self) -> Set[ProcessId]:
        return set(self._max) | set(self._exc)

    def ids(self) -> Iterator[MessageId]:
        for origin in sorted(self.origins()):
            for c in range(1, self._max.get(origin, 0) + 1):
                yield MessageId(origin, c)
            for c in sorted(self._exc.get(origin, ())):
                yield MessageId(origin, c)

    def footprint(self) -> int:
        """Number of stored integers (one prefix per origin plus exceptions)."""
        return len(self._max) + sum(len(e) for e in self._exc.values())

    def copy(self) -> "ReceivedLog":
        other = ReceivedLog()
        other._max = dict(self._max)
        other._exc = {o: set(e) for o, e in self._exc.items()}
        return other

    def to_dict(self) -> Dict[str, list]:
        return {
            str(o): [self._max.get(o, 0), sorted(self._exc.get(o, ()))]
            for o in sorted(self.origins())
        }

    @classmethod
    def from_ids(cls, ids: Iterable[MessageId]) -> "ReceivedLog":
        log = cls()
        for mid in ids:
            log.mark(MessageId(*mid))
        return log

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReceivedLog):
            return NotImplemented
        return self._max == other._max and self._exc == other._exc

    def __len__(self) -> int:
        return sum(self._max.values()) + sum(len(e) for e in self._exc.values())

    def __repr__(self) -> str:
        return f"ReceivedLog({self.to_dict()})"


class OpCounters:
    """Instrumentation for the work done on the delivery path."""

    __slots__ = ("received_lookups", "pending_scan_steps", "buffer_appends", "deliveries")

    def __init__(self) -> None:
        self.received_lookups = 0
        self.pending_scan_steps = 0
        self.buffer_appends = 0
        self.deliveries = 0

    def as_dict(self) -> Dict[str, int]:
        return {k: getattr(self, k) for k in self.__slots__}


class Network:
    """What a protocol process may ask of its environment.

    The simulator implements this; tests use a recording stub.
    """

    def send(self, src: ProcessId, dst: ProcessId, msg: ProtocolMessage) -> None:
        raise NotImplementedError

    def send_direct(self, src: ProcessId, dst: ProcessId, msg: ProtocolMessage) -> None:
        """Out-of-band channel (no FIFO promise), used for pongs."""
        raise NotImplementedError

    def deliver(self, pid: ProcessId, msg: Union[Payload, VcPayload]) -> None:
        raise NotImplementedError

    def control(self, pid: ProcessId, event: str, peer: Optional[ProcessId] = None,
                phase: Optional[int] = None) -> None:
        raise NotImplementedError

    def arm_timeout(self, pid: ProcessId, peer: ProcessId, phase: int) -> None:
        raise NotImplementedError

    def next_hop(self, at: ProcessId, ping: "Ping") -> Optional[ProcessId]:
        """Next process on a path of safe links from ``at`` towards ``ping.dst``."""
        raise NotImplementedError


class ProcessBase:
    """State every protocol variant shares: identity, id counter, seen set."""

    def __init__(self, pid: ProcessId, net: Network) -> None:
        self.pid = pid
        self.net = net
        self.counter = 0
        self.received = ReceivedLog()
        self.delivered = 0
        self.ops = OpCounters()

    def next_message_id(self) -> MessageId:
        self.counter += 1
        return MessageId(self.pid, self.counter)

    def mark_received(self, mid: MessageId) -> bool:
        self.ops.received_lookups += 1
        return self.received.mark(mid)
