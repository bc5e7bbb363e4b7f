"""Deterministic discrete-event network simulator.

Virtual time is in milliseconds. Links are directed FIFO channels; each gets a
base fraction of the global latency ceiling when created, and arrivals on one
link never overtake each other. Equal timestamps run in scheduling order, so a
scenario and a seed fully determine the trace.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Set, Tuple

from .core import MessageId, Network, Payload, Ping, Pong, ProcessId, ProtocolMessage
from .core import serialized_control_size
from .metrics import CSV_COLUMNS, MetricsReport, path_sample
from .oracle import Verdict, verify
from .pcbroadcast import PCProcess
from .rbroadcast import RBroadcastProcess
from .scenario import Scenario, ScenarioError
from .trace import (BROADCAST, CONTROL, DELIVER, RECEIVE, SEND, TOPOLOGY, TraceEvent)
from .vclock import VcProcess

log = logging.getLogger(__name__)

UP, LEFT, CRASHED = "up", "left", "crashed"
MIN_TIMEOUT_MS = 1000.0


class Link:
    __slots__ = ("src", "dst", "base", "fixed", "last", "cut")

    def __init__(self, src: ProcessId, dst: ProcessId, base: float, fixed: bool) -> None:
        self.src = src
        self.dst = dst
        self.base = base      # fraction of the ceiling, or ms when fixed
        self.fixed = fixed
        self.last = 0.0       # latest scheduled arrival, for FIFO
        self.cut = False      # set on crash: in-flight messages are lost

    def __repr__(self) -> str:
        return f"Link({self.src}->{self.dst})"


@dataclass
class RunResult:
    scenario: Scenario
    trace: List[TraceEvent]
    verdict: Verdict
    report: MetricsReport
    quiescent: bool
    end_time: float
    counters: Dict[str, int] = field(default_factory=dict)
    ops: Dict[str, int] = field(default_factory=dict)

    @property
    def outcome(self) -> str:
        if not self.quiescent:
            return "non_quiescent"
        return "clean" if self.verdict.clean else "violations"


class Simulation(Network):
    def __init__(self, scenario: Scenario) -> None:
        self.sc = scenario
        seed = scenario.seed
        self.rng_topo = random.Random(f"{seed}:topology")
        self.rng_lat = random.Random(f"{seed}:latency")
        self.rng_dyn = random.Random(f"{seed}:dynamics")
        self.rng_work = random.Random(f"{seed}:workload")
        self.rng_metrics = random.Random(f"{seed}:metrics")
        self.rng_faults = random.Random(f"{seed}:faults")
        self.now = 0.0
        self._queue: List[Tuple[float, int, Callable, tuple]] = []
        self._seq = 0
        self.trace: List[TraceEvent] = []
        self.procs: Dict[ProcessId, RBroadcastProcess] = {}
        self.status: Dict[ProcessId, str] = {}
        self.out: Dict[ProcessId, Dict[ProcessId, Link]] = {}
        self.inn: Dict[ProcessId, Set[ProcessId]] = {}   # reverse index of ``out``
        self._pair_base: Dict[Tuple[ProcessId, ProcessId], float] = {}
        self.counters = {"ping_phases": 0, "retries": 0, "abandoned_links": 0,
                         "payload_sends": 0, "ctrl_bytes": 0, "pongs_lost": 0,
                         "refused_mutations": 0}
        self.report = MetricsReport(protocol=scenario.protocol)
        self._drop_pongs = {(scenario.pid(a), int(ph)) for a, ph in scenario.dynamics.drop_pongs}
        self._busy_until = 0.0
        self.timeout_ms = 0.0
        self._routes: Dict[Tuple[ProcessId, int], deque] = {}

    # -- event queue --------------------------------------------------------

    def at(self, t: float, fn: Callable, *args: Any) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (t, self._seq, fn, args))

    def _emit(self, kind: str, process: ProcessId, **kw: Any) -> int:
        self.trace.append(TraceEvent(self.now, kind, process, **kw))
        return len(self.trace) - 1

    # -- Network interface ----------------------------------------------------

    def _delay(self, link: Link) -> float:
        if link.fixed:
            d = link.base
        else:
            d = link.base * self.sc.latency_ramp.ceiling(self.now)
        j = self.sc.latency_ramp.jitter
        if j:
            d *= 1.0 - j * self.rng_lat.random()
        return d

    def send(self, src: ProcessId, dst: ProcessId, msg: ProtocolMessage) -> None:
        link = self.out[src][dst]
        arrival = self.now + self._delay(link)
        if arrival < link.last:
            arrival = link.last
        link.last = arrival
        cls = type(msg)
        if cls is Ping:
            self.at(arrival, self._arrive, link, msg, None)
            return
        size = serialized_control_size(msg)
        self.counters["payload_sends"] += 1
        self.counters["ctrl_bytes"] += size
        self.trace.append(TraceEvent(self.now, SEND, src, msg.id, dst,
                                     "payload" if cls is Payload else "vc", None, None, size))
        self.at(arrival, self._arrive, link, msg, len(self.trace) - 1)

    def _arrive(self, link: Link, msg: ProtocolMessage, send_idx: Optional[int]) -> None:
        dst = link.dst
        if link.cut or self.status.get(dst) != UP:
            return
        if send_idx is not None:
            self.trace.append(TraceEvent(self.now, RECEIVE, dst, msg.id, link.src,
                                         "payload" if type(msg) is Payload else "vc",
                                         None, send_idx))
        self.procs[dst].receive(link.src, msg)

    def send_direct(self, src: ProcessId, dst: ProcessId, msg: ProtocolMessage) -> None:
        if isinstance(msg, Pong):
            lost = (msg.src, msg.phase) in self._drop_pongs
            if not lost and self.sc.dynamics.pong_loss:
                lost = self.rng_faults.random() < self.sc.dynamics.pong_loss
            if lost:
                self.counters["pongs_lost"] += 1
                self._emit(CONTROL, src, peer=dst, detail="pong_lost", phase=msg.phase)
                return
        self.at(self.now + self._pair_delay(src, dst), self._arrive_direct, src, dst, msg)

    def _arrive_direct(self, src: ProcessId, dst: ProcessId, msg: ProtocolMessage) -> None:
        if self.status.get(dst) == UP:
            self.procs[dst].receive(src, msg)

    def _pair_delay(self, src: ProcessId, dst: ProcessId) -> float:
        fixed = self.sc.link_key(src, dst)
        if fixed is not None:
            return fixed
        link = self.out.get(src, {}).get(dst) or self.out.get(dst, {}).get(src)
        if link is not None:
            return self._delay(link)
        if self.sc.latency_ramp.default_ms is not None:
            return self.sc.latency_ramp.default_ms
        key = (min(src, dst), max(src, dst))
        if key not in self._pair_base:
            lo, hi = self.sc.latency_ramp.spread
            self._pair_base[key] = self.rng_lat.uniform(lo, hi)
        return self._pair_base[key] * self.sc.latency_ramp.ceiling(self.now)

    def deliver(self, pid: ProcessId, msg: Any) -> None:
        self.trace.append(TraceEvent(self.now, DELIVER, pid, msg.id))

    def control(self, pid: ProcessId, event: str, peer: Optional[ProcessId] = None,
                phase: Optional[int] = None) -> None:
        if event == "ping_sent":
            self.counters["ping_phases"] += 1
        elif event == "phase_retry":
            self.counters["retries"] += 1
        elif event == "link_abandoned":
            self.counters["abandoned_links"] += 1
        self.trace.append(TraceEvent(self.now, CONTROL, pid, None, peer, event, phase))

    def arm_timeout(self, pid: ProcessId, peer: ProcessId, phase: int) -> None:
        self.at(self.now + self.timeout_ms, self._timeout, pid, peer, phase)

    def _timeout(self, pid: ProcessId, peer: ProcessId, phase: int) -> None:
        if self.status.get(pid) == UP:
            self.procs[pid].on_timeout(peer, phase)

    def next_hop(self, at: ProcessId, ping: Ping) -> Optional[ProcessId]:
        """Follow the route planned for this ping, re-planning when a hop went stale.

        Routes are shortest paths over safe links when planned; every hop is
        checked to still be a safe link before it is used.
        """
        key = (ping.src, ping.phase)
        route = self._routes.get(key)
        if route and route[0] in self.procs[at].neighbors and self.status.get(route[0]) == UP:
            hop = route.popleft()
        else:
            route = self._plan(at, ping.dst)
            if route is None:
                self._routes.pop(key, None)
                return None
            hop = route.popleft()
            self._routes[key] = route
        if not route:
            del self._routes[key]
        return hop

    def _plan(self, at: ProcessId, dst: ProcessId) -> Optional[deque]:
        if dst in self.procs[at].neighbors:
            return deque([dst])
        path = self._safe_path(at, dst)
        return None if path is None else deque(path[1:])

    def _safe_path(self, a: ProcessId, b: ProcessId,
                   drop: Set[Tuple[ProcessId, ProcessId]] = frozenset()
                   ) -> Optional[List[ProcessId]]:
        """Shortest path of safe links between live processes, by bidirectional BFS."""
        if a == b:
            return [a]
        procs, status, inn = self.procs, self.status, self.inn
        fwd: Dict[ProcessId, ProcessId] = {a: a}
        bwd: Dict[ProcessId, ProcessId] = {b: b}
        ff, bf = [a], [b]
        meet = None
        while ff and bf and meet is None:
            if len(ff) <= len(bf):
                nxt = []
                for x in ff:
                    for y in procs[x].neighbors:
                        if y in fwd or status.get(y) != UP or (x, y) in drop:
                            continue
                        fwd[y] = x
                        if y in bwd:
                            meet = y
                            break
                        nxt.append(y)
                    if meet is not None:
                        break
                ff = nxt
            else:
                nxt = []
                for y in bf:
                    for x in inn[y]:
                        if x in bwd or status.get(x) != UP or (x, y) in drop \
                                or y not in procs[x].neighbors:
                            continue
                        bwd[x] = y
                        if x in fwd:
                            meet = x
                            break
                        nxt.append(x)
                    if meet is not None:
                        break
                bf = nxt
        if meet is None:
            return None
        head = [meet]
        while head[-1] != a:
            head.append(fwd[head[-1]])
        head.reverse()
        x = meet
        while x != b:
            x = bwd[x]
            head.append(x)
        return head

    # -- processes and topology -------------------------------------------------

    def _make_process(self, pid: ProcessId) -> RBroadcastProcess:
        proto = self.sc.protocol
        if proto == "pc":
            p: RBroadcastProcess = PCProcess(pid, self, self.sc.guard.max_size,
                                             self.sc.guard.max_retry, self.sc.ping_routing)
        elif proto == "vc":
            p = VcProcess(pid, self)
        else:
            p = RBroadcastProcess(pid, self)
        self.procs[pid] = p
        self.status[pid] = UP
        self.out[pid] = {}
        self.inn[pid] = set()
        return p

    def _new_link(self, src: ProcessId, dst: ProcessId) -> Link:
        fixed = self.sc.link_key(src, dst)
        if fixed is not None:
            return Link(src, dst, fixed, True)
        if self.sc.latency_ramp.default_ms is not None:
            return Link(src, dst, self.sc.latency_ramp.default_ms, True)
        lo, hi = self.sc.latency_ramp.spread
        return Link(src, dst, self.rng_lat.uniform(lo, hi), False)

    def add_link(self, src: ProcessId, dst: ProcessId, initial: bool = False) -> bool:
        if src == dst or dst in self.out[src]:
            return False
        if self.status.get(src) != UP or dst not in self.status:
            return False
        self.out[src][dst] = self._new_link(src, dst)
        self.inn[dst].add(src)
        self._emit(TOPOLOGY, src, peer=dst, detail="add_link")
        if initial:
            self.procs[src].install_safe(dst)
        else:
            self.procs[src].open_link(dst)
        return True

    def remove_link(self, src: ProcessId, dst: ProcessId) -> bool:
        """Graceful removal: whatever is already in flight still arrives."""
        if dst not in self.out.get(src, {}):
            return False
        del self.out[src][dst]
        self.inn[dst].discard(src)
        self._emit(TOPOLOGY, src, peer=dst, detail="remove_link")
        self.procs[src].close_link(dst)
        return True

    def join(self, contact: ProcessId, name: Optional[str] = None) -> ProcessId:
        """A fresh process copies the contact's receive state and links both ways."""
        if self.status.get(contact) != UP:
            raise ScenarioError(f"join contact {contact} is not up")
        pid = max(self.procs) + 1
        proc = self._make_process(pid)
        donor = self.procs[contact]
        proc.adopt(donor)
        adopted = [[int(o), proc.received.max_contiguous(o), sorted(proc.received.exceptions(o))]
                   for o in sorted(proc.received.origins())]
        data: Dict[str, Any] = {"adopted": adopted, "contact": contact}
        if name:
            data["name"] = name
        self._emit(TOPOLOGY, pid, peer=contact, detail="join", data=data)
        if isinstance(proc, VcProcess):
            for m in proc.pending:
                self._emit(RECEIVE, pid, msg=m.id, peer=contact, detail="vc")
        for a, b in ((pid, contact), (contact, pid)):
            self.out[a][b] = self._new_link(a, b)
            self.inn[b].add(a)
            self._emit(TOPOLOGY, a, peer=b, detail="add_link")
            self.procs[a].install_safe(b)
        self._start_shuffling(pid)
        return pid

    def leave(self, pid: ProcessId) -> bool:
        if self.status.get(pid) != UP:
            return False
        for q in list(self.out[pid]):
            self.remove_link(pid, q)
        for x in sorted(self.inn[pid]):
            if self.status[x] == UP:
                self.remove_link(x, pid)
        self.status[pid] = LEFT
        self._emit(TOPOLOGY, pid, detail="leave")
        return True

    def crash(self, pid: ProcessId) -> bool:
        """Silent failure: in-flight traffic on its links is lost; neighbours are not told."""
        if self.status.get(pid) != UP:
            return False
        self.status[pid] = CRASHED
        for link in self.out[pid].values():
            link.cut = True
        for x in self.inn[pid]:
            self.out[x][pid].cut = True
        self._emit(TOPOLOGY, pid, detail="crash")
        return True

    def up(self) -> List[ProcessId]:
        return [p for p in sorted(self.procs) if self.status[p] == UP]

    # -- partition guard ---------------------------------------------------------

    def _safe_graph(self, drop: Iterable[Tuple[ProcessId, ProcessId]] = (),
                    without: Optional[ProcessId] = None) -> Dict[ProcessId, Set[ProcessId]]:
        drop = set(drop)
        g: Dict[ProcessId, Set[ProcessId]] = {}
        for p in self.up():
            if p == without:
                continue
            g[p] = {q for q in self.procs[p].safe_out()
                    if q != without and self.status.get(q) == UP and (p, q) not in drop}
        return g

    @staticmethod
    def _strongly_connected(g: Dict[ProcessId, Set[ProcessId]]) -> bool:
        if len(g) <= 1:
            return True
        root = next(iter(g))
        rev: Dict[ProcessId, Set[ProcessId]] = {p: set() for p in g}
        for p, qs in g.items():
            for q in qs:
                rev[q].add(p)
        for adj in (g, rev):
            seen = {root}
            stack = [root]
            while stack:
                for y in adj[stack.pop()]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if len(seen) != len(g):
                return False
        return True

    def keeps_connected(self, drop: Iterable[Tuple[ProcessId, ProcessId]] = (),
                        without: Optional[ProcessId] = None) -> bool:
        """Would every reachability over safe links survive the change?

        Dropping arcs keeps all reachabilities exactly when each dropped arc's
        tail still reaches its head, which is a handful of short searches
        instead of a whole-graph check. Removing a process falls back to
        checking strong connectivity of what remains.
        """
        if not self.sc.dynamics.guard_partitions:
            return True
        if without is not None:
            return self._strongly_connected(self._safe_graph(drop, without))
        drop = set(drop)
        return all(self._reaches(a, b, drop) for a, b in drop)

    def _reaches(self, a: ProcessId, b: ProcessId, drop: Set[Tuple[ProcessId, ProcessId]]) -> bool:
        return self._safe_path(a, b, drop) is not None

    def _keeps_a_safe_link(self, p: ProcessId, dropping: Iterable[ProcessId]) -> bool:
        remaining = set(self.procs[p].safe_out()) - set(dropping)
        return any(self.status.get(q) == UP for q in remaining)

    # -- peer sampling --------------------------------------------------------------

    def spray_exchange(self, p: ProcessId, q: Optional[ProcessId] = None) -> int:
        """Swap half of the partial views of ``p`` and one of its neighbours.

        Returns the number of entries each side handed over (0 if nothing moved).
        An entry naming the receiver itself is turned into a link back to the
        giver. Entries that would duplicate one the receiver already has are not
        candidates, and both sides hand over the same count ``k`` (at most half
        of the smaller view, rounded up), so every view keeps its size.
        """
        if self.status.get(p) != UP:
            return 0
        if q is None:
            peers = [x for x in self.out[p] if self.status.get(x) == UP]
            if not peers:
                return 0
            q = self.rng_topo.choice(sorted(peers))
        if q == p or self.status.get(q) != UP or q not in self.out[p]:
            return 0
        vp, vq = sorted(self.out[p]), sorted(self.out[q])

        def as_p(x: ProcessId) -> ProcessId:
            return p if x == q else x

        def as_q(y: ProcessId) -> ProcessId:
            return q if y == p else y

        cand_p = [x for x in vp if as_p(x) != q and as_p(x) not in self.out[q]]
        cand_q = [y for y in vq if as_q(y) != p and as_q(y) not in self.out[p]]
        k = min(math.ceil(len(vp) / 2), math.ceil(len(vq) / 2), len(cand_p), len(cand_q))
        if k == 0:
            return 0
        give_p = self.rng_topo.sample(cand_p, k)
        give_q = self.rng_topo.sample(cand_q, k)
        if self.sc.dynamics.guard_partitions:
            if not (self._keeps_a_safe_link(p, give_p) and self._keeps_a_safe_link(q, give_q)):
                self.counters["refused_mutations"] += 1
                return 0
            drop = [(p, x) for x in give_p] + [(q, y) for y in give_q]
            if not self.keeps_connected(drop):
                self.counters["refused_mutations"] += 1
                return 0
        self._emit(TOPOLOGY, p, peer=q, detail="exchange")
        # new links first, so pings can still leave over the ones being dropped
        for y in give_q:
            self.add_link(p, as_q(y))
        for x in give_p:
            self.add_link(q, as_p(x))
        for x in give_p:
            self.remove_link(p, x)
        for y in give_q:
            self.remove_link(q, y)
        return k

    def _start_shuffling(self, pid: ProcessId) -> None:
        period = self.sc.dynamics.shuffle_period_ms
        if period is None:
            return
        t = self.now + self.rng_dyn.uniform(*period)
        if t <= self.sc.dynamics.shuffle_until_ms:
            self.at(t, self._shuffle_tick, pid)

    def _shuffle_tick(self, pid: ProcessId) -> None:
        if self.status.get(pid) != UP:
            return
        self.spray_exchange(pid)
        self._start_shuffling(pid)

    # -- scripted and random dynamics ----------------------------------------------

    def _script_op(self, op: Dict[str, Any]) -> None:
        sc = self.sc
        kind = op["op"]
        if kind == "add_link":
            self.add_link(sc.pid(op["from"]), sc.pid(op["to"]))
        elif kind == "remove_link":
            a, b = sc.pid(op["from"]), sc.pid(op["to"])
            if not sc.dynamics.allow_partitions and not self._weakly_connected_without((a, b)):
                raise ScenarioError(f"removing {a}->{b} at t={self.now} partitions the network")
            self.remove_link(a, b)
        elif kind == "join":
            self.join(sc.pid(op["contact"]), op.get("name"))
        elif kind == "leave":
            self.leave(sc.pid(op["process"]))
        elif kind == "crash":
            self.crash(sc.pid(op["process"]))
        elif kind == "exchange":
            other = op.get("with")
            self.spray_exchange(sc.pid(op["process"]), None if other is None else sc.pid(other))

    def _weakly_connected_without(self, arc: Tuple[ProcessId, ProcessId]) -> bool:
        nodes = self.up()
        adj: Dict[ProcessId, Set[ProcessId]] = {p: set() for p in nodes}
        for p in nodes:
            for q in self.out[p]:
                if (p, q) != arc and q in adj:
                    adj[p].add(q)
                    adj[q].add(p)
        if not nodes:
            return True
        seen = {nodes[0]}
        stack = [nodes[0]]
        while stack:
            for y in adj[stack.pop()]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == len(nodes)

    def _random_op(self, kind: str) -> None:
        rng = self.rng_dyn
        up = self.up()
        if kind == "add":
            for _ in range(10):
                p = rng.choice(up)
                choices = [q for q in up if q != p and q not in self.out[p]]
                if choices:
                    self.add_link(p, rng.choice(choices))
                    return
        elif kind == "remove":
            arcs = [(p, q) for p in up for q in sorted(self.out[p]) if self.status[q] == UP]
            rng.shuffle(arcs)
            for p, q in arcs[:10]:
                if self._keeps_a_safe_link(p, [q]) and self.keeps_connected([(p, q)]):
                    self.remove_link(p, q)
                    return
        elif kind == "join":
            self.join(rng.choice(up))
            return
        elif kind == "leave":
            if len(up) <= 3:
                return
            cands = list(up)
            rng.shuffle(cands)
            for p in cands[:10]:
                if self.keeps_connected(without=p) and all(
                        self._keeps_a_safe_link(x, [p]) for x in up
                        if x != p and p in self.procs[x].safe_out()):
                    self.leave(p)
                    return
        else:
            raise ScenarioError(f"unknown random op {kind!r}")
        self.counters["refused_mutations"] += 1

    # -- workload -------------------------------------------------------------------

    def broadcast(self, pid: ProcessId, label: Optional[str] = None) -> None:
        if self.status.get(pid) != UP:
            return
        proc = self.procs[pid]
        mid_counter = proc.counter + 1
        body = (label or f"m{pid}.{mid_counter}").encode()
        self._emit(BROADCAST, pid, msg=MessageId(pid, mid_counter), detail=label)
        proc.broadcast(body)

    def _random_broadcast(self) -> None:
        up = self.up()
        if up:
            self.broadcast(self.rng_work.choice(up))

    # -- metrics ---------------------------------------------------------------------

    def snapshot(self) -> Dict[str, Any]:
        nodes = self.up()
        k = min(self.sc.metrics.sources, len(nodes))
        sources = sorted(self.rng_metrics.sample(nodes, k)) if k else []
        upset = set(nodes)
        safe = {p: [q for q in self.procs[p].safe_out() if q in upset] for p in nodes}
        full = {p: [q for q in self.out[p] if q in upset] for p in nodes}
        s_safe = path_sample(nodes, safe, sources)
        s_all = path_sample(nodes, full, sources)
        unsafe = []
        sizes = []
        pending = 0
        for p in nodes:
            proc = self.procs[p]
            bufs = getattr(proc, "buffers", None)
            if bufs is not None:
                unsafe.append(len(bufs))
                sizes.extend(len(b) for b in bufs.values())
            else:
                unsafe.append(0)
            pending += len(getattr(proc, "pending", ()))
        c = self.counters
        row = {
            "time_ms": self.now,
            "protocol": self.sc.protocol,
            "n_processes": len(nodes),
            "ramp_factor": self.sc.latency_ramp.ceiling(self.now),
            "avg_sp_safe": s_safe.mean,
            "avg_sp_all": s_all.mean,
            "avg_unsafe_links": sum(unsafe) / len(unsafe) if unsafe else 0.0,
            "avg_buffer": sum(sizes) / len(sizes) if sizes else 0.0,
            "max_buffer": max(sizes) if sizes else 0,
            "ctrl_bytes_payload": c["ctrl_bytes"] / c["payload_sends"] if c["payload_sends"] else 0.0,
            "vc_pending": pending,
            "violations": 0,
            "duplicates": 0,
            "abandoned_links": c["abandoned_links"],
            "ping_phases": c["ping_phases"],
            "retries": c["retries"],
        }
        assert tuple(row) == CSV_COLUMNS
        self.report.rows.append(row)
        self.report.unreachable_safe.append(s_safe.unreachable)
        self.report.unreachable_all.append(s_all.unreachable)
        return row

    def _snapshot_tick(self) -> None:
        self.snapshot()
        nxt = self.now + self.sc.metrics.interval_ms
        if nxt <= self._busy_until:
            self.at(nxt, self._snapshot_tick)

    # -- setup and main loop --------------------------------------------------------------

    def _initial_topology(self) -> List[Tuple[ProcessId, ProcessId]]:
        sc = self.sc
        n = sc.process_count
        topo = sc.initial_topology
        if topo.kind == "clique":
            return [(a, b) for a in range(n) for b in range(n) if a != b]
        if topo.kind == "ring":
            return [(a, (a + 1) % n) for a in range(n)] + [((a + 1) % n, a) for a in range(n)] \
                if n > 2 else [(a, b) for a in range(n) for b in range(n) if a != b]
        if topo.kind == "explicit":
            arcs = [(sc.pid(a), sc.pid(b)) for a, b in topo.edges]
            if topo.bidirectional:
                arcs += [(b, a) for a, b in arcs]
            return arcs
        # random: a random Hamiltonian cycle keeps it strongly connected,
        # then extra random arcs up to the requested out-degree
        rng = self.rng_topo
        order = list(range(n))
        rng.shuffle(order)
        arcs = {(order[i], order[(i + 1) % n]) for i in range(n)} if n > 1 else set()
        for a in range(n):
            have = {b for x, b in arcs if x == a}
            others = [b for b in range(n) if b != a and b not in have]
            rng.shuffle(others)
            while len(have) < topo.degree and others:
                b = others.pop()
                have.add(b)
                arcs.add((a, b))
        return sorted(arcs)

    def _estimate_diameter(self) -> int:
        nodes = self.up()
        full = {p: list(self.out[p]) for p in nodes}
        k = min(16, len(nodes))
        sample = path_sample(nodes, full, nodes[:k])
        d = sample.distances
        finite = d[d != math.inf]
        return max(1, int(finite.max())) if finite.size else 1

    def setup(self) -> None:
        sc = self.sc
        for pid in range(sc.process_count):
            self._make_process(pid)
            data = {"name": sc.names[pid]} if sc.names else None
            self._emit(TOPOLOGY, pid, detail="spawn", data=data)
        for a, b in self._initial_topology():
            self.add_link(a, b, initial=True)
        if sc.guard.timeout_ms is not None:
            self.timeout_ms = float(sc.guard.timeout_ms)
        else:
            est = 4.0 * sc.latency_ramp.max_latency() * self._estimate_diameter()
            self.timeout_ms = max(MIN_TIMEOUT_MS, est)

        busy = 0.0
        for op in sc.dynamics.script:
            self.at(float(op["at"]), self._script_op, op)
            busy = max(busy, float(op["at"]))
        for pid in range(sc.process_count):
            self._start_shuffling(pid)
        if sc.dynamics.shuffle_period_ms is not None:
            busy = max(busy, sc.dynamics.shuffle_until_ms)
        rnd = sc.dynamics.random
        if rnd:
            lo, hi = rnd.get("fromMs", 0.0), rnd.get("untilMs", 0.0)
            ops = []
            for kind, key in (("add", "adds"), ("remove", "removes"), ("join", "joins"),
                              ("leave", "leaves")):
                ops += [kind] * int(rnd.get(key, 0))
            for kind in ops:
                self.at(self.rng_dyn.uniform(lo, hi), self._random_op, kind)
            busy = max(busy, hi)

        wl = sc.workload
        for entry in wl.script:
            self.at(float(entry["at"]), self.broadcast, sc.pid(entry["process"]), entry.get("label"))
            busy = max(busy, float(entry["at"]))
        total = wl.total_messages
        if wl.rate_per_process is not None and not total:
            total = round(wl.rate_per_process * sc.process_count * (wl.until_ms - wl.from_ms) / 1000)
        for _ in range(total):
            self.at(self.rng_work.uniform(wl.from_ms, wl.until_ms), self._random_broadcast)
        if total:
            busy = max(busy, wl.until_ms)
        self._busy_until = busy
        self.at(0.0, self._snapshot_tick)

    def run(self, observer: Optional[Callable[["Simulation"], None]] = None) -> RunResult:
        """Run to quiescence (or ``max_time_ms``); ``observer`` sees every quiescent point."""
        self.setup()
        quiescent = True
        queue = self._queue
        limit = self.sc.max_time_ms
        pop = heapq.heappop
        while queue:
            t, _, fn, args = queue[0]
            if t > limit:
                quiescent = False
                break
            pop(queue)
            self.now = t
            fn(*args)
            if observer is not None:
                observer(self)
        self.snapshot()
        verdict = verify(self.trace)
        self.report.fill_verdict_counts(verdict.violation_times, verdict.duplicate_times)
        ops: Dict[str, int] = {}
        for proc in self.procs.values():
            for k, v in proc.ops.as_dict().items():
                ops[k] = ops.get(k, 0) + v
        self.report.totals = {
            "violations": len(verdict.causal_violations),
            "duplicates": len(verdict.duplicates),
            "missing": len(verdict.missing_deliveries),
            "safe_link_breaches": len(verdict.safe_link_breaches),
            **{k: v for k, v in self.counters.items()},
        }
        if not quiescent:
            log.warning("run %s stopped at %.0f ms with %d events pending",
                        self.sc.name, self.now, len(queue))
        return RunResult(self.sc, self.trace, verdict, self.report, quiescent, self.now,
                         dict(self.counters), ops)


def run(scenario: Scenario) -> RunResult:
    return Simulation(scenario).run()
