"""Offline ground truth over a finished trace.

Happen-before between broadcasts is tracked with per-process vector clocks
advanced on broadcast and merged on delivery, independently of any clock the
protocols keep. The oracle never feeds anything back into a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from .core import MessageId
from .trace import BROADCAST, CONTROL, DELIVER, RECEIVE, SEND, TOPOLOGY, TraceEvent

INF = float("inf")
PAYLOAD_KINDS = ("payload",)


class TraceError(ValueError):
    """The trace is structurally impossible (e.g. a delivery nobody received)."""

    def __init__(self, reason: str, index: int, event: TraceEvent) -> None:
        super().__init__(f"event {index}: {reason}: {event}")
        self.reason = reason
        self.index = index
        self.event = event


@dataclass
class Verdict:
    causal_violations: List[Tuple[int, MessageId, MessageId]] = field(default_factory=list)
    duplicates: List[Tuple[int, MessageId]] = field(default_factory=list)
    missing_deliveries: List[Tuple[int, MessageId]] = field(default_factory=list)
    safe_link_breaches: List[Tuple[int, int, MessageId, MessageId]] = field(default_factory=list)
    ping_ack_breaches: List[Tuple[int, int, int, MessageId]] = field(default_factory=list)
    violation_times: List[float] = field(default_factory=list)
    duplicate_times: List[float] = field(default_factory=list)
    labels: Dict[MessageId, str] = field(default_factory=dict)
    names: Dict[int, str] = field(default_factory=dict)
    messages: int = 0
    deliveries: int = 0

    @property
    def clean(self) -> bool:
        return not (self.causal_violations or self.duplicates or self.missing_deliveries
                    or self.safe_link_breaches or self.ping_ack_breaches)

    def _m(self, mid: MessageId) -> str:
        return self.labels.get(mid) or f"{mid.origin}:{mid.counter}"

    def _p(self, pid: int) -> Any:
        return self.names.get(pid, pid)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready report; ``(C, m, m')`` means C delivered m' before m although m -> m'."""
        return {
            "clean": self.clean,
            "messages": self.messages,
            "deliveries": self.deliveries,
            "causalViolations": [
                {"process": self._p(p), "earlier": self._m(m), "later": self._m(m2)}
                for p, m, m2 in self.causal_violations
            ],
            "duplicates": [{"process": self._p(p), "message": self._m(m)}
                           for p, m in self.duplicates],
            "missingDeliveries": [{"process": self._p(p), "message": self._m(m)}
                                  for p, m in self.missing_deliveries],
            "safeLinkBreaches": [
                {"from": self._p(a), "to": self._p(b), "sent": self._m(m2), "notYetReceived": self._m(m)}
                for a, b, m2, m in self.safe_link_breaches
            ],
            "pingAckBreaches": [
                {"from": self._p(a), "to": self._p(b), "phase": ph, "notYetReceived": self._m(m)}
                for a, b, ph, m in self.ping_ack_breaches
            ],
        }


def adopted_ids(data: Optional[Dict[str, Any]]) -> List[MessageId]:
    """Expand the compacted receive log attached to a join event."""
    out: List[MessageId] = []
    if not data:
        return out
    for origin, top, exc in data.get("adopted", ()):
        out.extend(MessageId(origin, c) for c in range(1, top + 1))
        out.extend(MessageId(origin, c) for c in exc)
    return out


def verify(trace: Sequence[TraceEvent]) -> Verdict:
    v = Verdict()
    stamps: Dict[MessageId, Dict[int, int]] = {}
    clocks: Dict[int, Dict[int, int]] = {}
    first_recv: Dict[int, Dict[MessageId, int]] = {}
    deliveries: Dict[int, List[MessageId]] = {}
    have: Dict[int, Set[MessageId]] = {}           # delivered or adopted
    prefix: Dict[int, Dict[int, int]] = {}          # contiguous part of ``have`` per origin
    waiting: Dict[int, Dict[MessageId, List[Tuple[MessageId, float]]]] = {}
    order: List[MessageId] = []
    members: Dict[int, bool] = {}                   # pid -> still correct
    sends: List[Tuple[int, int, int, MessageId, int]] = []
    recv_of_send: Dict[int, int] = {}
    pings: Dict[Tuple[int, int], Tuple[int, int]] = {}
    pong_at: Dict[Tuple[int, int], int] = {}

    def advance(p: int, origin: int) -> None:
        pre = prefix[p]
        top = pre.get(origin, 0)
        h = have[p]
        while MessageId(origin, top + 1) in h:
            top += 1
        pre[origin] = top

    def ensure(p: int) -> None:
        if p not in clocks:
            clocks[p] = {}
            first_recv[p] = {}
            deliveries[p] = []
            have[p] = set()
            prefix[p] = {}
            waiting[p] = {}

    for i, ev in enumerate(trace):
        kind = ev.kind
        p = ev.process
        if kind == SEND:
            if ev.detail in PAYLOAD_KINDS:
                ensure(p)
                sends.append((i, p, ev.peer, ev.msg, len(deliveries[p])))
        elif kind == RECEIVE:
            if ev.detail in ("payload", "vc"):
                ensure(p)
                if ev.msg not in stamps:
                    raise TraceError("receipt of a message never broadcast", i, ev)
                first_recv[p].setdefault(ev.msg, i)
                if ev.ref is not None:
                    recv_of_send[ev.ref] = i
        elif kind == DELIVER:
            ensure(p)
            m = ev.msg
            v.deliveries += 1
            if m in have[p]:
                v.duplicates.append((p, m))
                v.duplicate_times.append(ev.time)
                continue
            if m not in first_recv[p]:
                raise TraceError("delivery without receipt", i, ev)
            stamp = stamps[m]
            h = have[p]
            pre = prefix[p]
            w = waiting[p]
            for o, c in stamp.items():
                need = c - 1 if o == m.origin else c
                top = pre.get(o, 0)
                if top < need:
                    for k in range(top + 1, need + 1):
                        mk = MessageId(o, k)
                        if mk not in h:
                            w.setdefault(mk, []).append((m, ev.time))
            h.add(m)
            deliveries[p].append(m)
            advance(p, m.origin)
            clock = clocks[p]
            for o, c in stamp.items():
                if c > clock.get(o, 0):
                    clock[o] = c
            late = w.pop(m, None)
            if late:
                for m2, _ in late:
                    v.causal_violations.append((p, m, m2))
                    v.violation_times.append(ev.time)
        elif kind == BROADCAST:
            ensure(p)
            m = ev.msg
            if m in stamps:
                raise TraceError("message id broadcast twice", i, ev)
            clock = clocks[p]
            clock[p] = max(clock.get(p, 0) + 1, m.counter)
            stamps[m] = dict(clock)
            first_recv[p].setdefault(m, i)
            order.append(m)
            if ev.detail:
                v.labels[m] = ev.detail
        elif kind == CONTROL:
            if ev.detail == "buffer_flushed":
                # a flush is one atomic hand-over: only its last send must
                # find the receiver caught up
                j = i - 1
                last = len(sends) - 1
                while last >= 0 and sends[last][0] == j and sends[last][1] == p \
                        and sends[last][2] == ev.peer:
                    last -= 1
                    j -= 1
                if last < len(sends) - 2:
                    del sends[last + 1:-1]
            elif ev.detail == "ping_sent":
                ensure(p)
                pings[(p, ev.phase)] = (ev.peer, len(deliveries[p]))
            elif ev.detail == "pong_sent":
                pong_at.setdefault((ev.peer, ev.phase), i)
        elif kind == TOPOLOGY:
            op = ev.detail
            if op in ("spawn", "join"):
                ensure(p)
                members[p] = True
                if ev.data and "name" in ev.data:
                    v.names[p] = ev.data["name"]
                origins = set()
                for mid in adopted_ids(ev.data):
                    if mid not in stamps:
                        raise TraceError("adopted a message never broadcast", i, ev)
                    first_recv[p].setdefault(mid, i)
                    have[p].add(mid)
                    origins.add(mid.origin)
                    # the adopted history is part of the joiner's causal past
                    clock = clocks[p]
                    for o, c in stamps[mid].items():
                        if c > clock.get(o, 0):
                            clock[o] = c
                for o in origins:
                    advance(p, o)
            elif op in ("leave", "crash"):
                members[p] = False

    v.messages = len(order)
    for p in sorted(members):
        if not members[p]:
            continue
        h = have[p]
        for m in order:
            if m not in h:
                v.missing_deliveries.append((p, m))

    # safe-link definition: everything the sender had delivered before a send
    # must already be at the receiver when that send arrives
    cache: Dict[Tuple[int, int], List[float]] = {}

    def prefix_max(a: int, b: int) -> List[float]:
        key = (a, b)
        pm = cache.get(key)
        if pm is None:
            fr = first_recv.get(b, {})
            pm = [-1.0]
            acc = -1.0
            for m in deliveries.get(a, ()):
                acc = max(acc, fr.get(m, INF))
                pm.append(acc)
            cache[key] = pm
        return pm

    def culprit(a: int, b: int, k: int, bound: int) -> MessageId:
        fr = first_recv.get(b, {})
        for m in deliveries[a][:k]:
            if fr.get(m, INF) > bound:
                return m
        raise AssertionError("no culprit")

    for idx, a, b, m2, k in sends:
        r = recv_of_send.get(idx)
        if r is None:
            continue
        if prefix_max(a, b)[k] > r:
            v.safe_link_breaches.append((a, b, m2, culprit(a, b, k, r)))

    for (a, phase), (b, k) in pings.items():
        r = pong_at.get((a, phase))
        if r is None:
            continue
        if prefix_max(a, b)[k] > r:
            v.ping_ack_breaches.append((a, b, phase, culprit(a, b, k, r)))

    return v


def happened_before(stamps: Dict[MessageId, Dict[int, int]], m: MessageId, m2: MessageId) -> bool:
    a, b = stamps[m], stamps[m2]
    return m != m2 and all(c <= b.get(o, 0) for o, c in a.items())


def broadcast_stamps(trace: Sequence[TraceEvent]) -> Dict[MessageId, Dict[int, int]]:
    """Oracle vector clock of every broadcast (exposed for inspection and tests)."""
    stamps: Dict[MessageId, Dict[int, int]] = {}
    clocks: Dict[int, Dict[int, int]] = {}
    for ev in trace:
        if ev.kind == BROADCAST:
            clock = clocks.setdefault(ev.process, {})
            clock[ev.process] = max(clock.get(ev.process, 0) + 1, ev.msg.counter)
            stamps[ev.msg] = dict(clock)
        elif ev.kind == DELIVER and ev.msg in stamps:
            clock = clocks.setdefault(ev.process, {})
            for o, c in stamps[ev.msg].items():
                if c > clock.get(o, 0):
                    clock[o] = c
        elif ev.kind == TOPOLOGY and ev.detail == "join":
            clock = clocks.setdefault(ev.process, {})
            for mid in adopted_ids(ev.data):
                for o, c in stamps.get(mid, {}).items():
                    if c > clock.get(o, 0):
                        clock[o] = c
    return stamps
