"""Declarative run descriptions and their JSON file format.

A scenario file is a JSON object with these top-level keys (only ``protocol``
and ``processCount`` are required)::

    name             free-form label
    seed             integer; the command line --seed wins over it
    protocol         "rbroadcast" | "pc" | "vc"
    processCount     initial number of processes
    names            optional list of labels, one per initial process
    initialTopology  {"kind": "clique"|"ring"|"random"|"explicit",
                      "degree": out-degree for "random",
                      "edges": [[from, to], ...] for "explicit",
                      "bidirectional": add the reverse of every explicit edge}
    latencyRamp      {"startMs", "endMs", "durationMs": latency ceiling ramp,
                      "spread": [lo, hi] per-link fraction of the ceiling,
                      "jitter": per-message fractional jitter in [0, 1],
                      "links": {"A->B": fixed ms}, "defaultMs": fixed ms for
                      unlisted pairs}
    dynamics         {"script": [{"at", "op", ...}],
                      "shuffle": {"periodMs": [lo, hi], "untilMs"},
                      "random": {"adds", "removes", "joins", "leaves",
                                 "fromMs", "untilMs"},
                      "pongLoss": probability, "dropPongs": [[pinger, phase]],
                      "guardPartitions": bool, "allowPartitions": bool}
    workload         {"script": [{"at", "process", "label"}],
                      "totalMessages", "ratePerProcess" (per second),
                      "fromMs", "untilMs"}
    guard            {"maxSize", "maxRetry", "timeoutMs"}; null = unbounded/default
    pingRouting      "flood" | "route"
    metrics          {"intervalMs", "sources"}
    maxTimeMs        hard stop; a run still busy then is reported non-quiescent

Script operations: ``add_link``/``remove_link`` (``from``, ``to``),
``join`` (``contact``), ``leave``/``crash`` (``process``), ``exchange``
(``process``, optional ``with``). Processes are referenced by index or name.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

PROTOCOLS = ("rbroadcast", "pc", "vc")
TOPOLOGIES = ("clique", "ring", "random", "explicit")
SCRIPT_OPS = ("add_link", "remove_link", "join", "leave", "crash", "exchange")


class ScenarioError(ValueError):
    pass


@dataclass
class Topology:
    kind: str = "random"
    degree: int = 4
    edges: List[Tuple[Any, Any]] = field(default_factory=list)
    bidirectional: bool = False


@dataclass
class LatencyRamp:
    start_ms: float = 0.0
    end_ms: float = 0.0
    duration_ms: float = 0.0
    spread: Tuple[float, float] = (0.5, 1.0)
    jitter: float = 0.0
    links: Dict[str, float] = field(default_factory=dict)
    default_ms: Optional[float] = None

    def ceiling(self, t: float) -> float:
        if self.duration_ms <= 0:
            return self.end_ms
        frac = min(1.0, max(0.0, t / self.duration_ms))
        return self.start_ms + (self.end_ms - self.start_ms) * frac

    def max_latency(self) -> float:
        fixed = list(self.links.values())
        if self.default_ms is not None:
            fixed.append(self.default_ms)
        return max([self.start_ms, self.end_ms] + fixed)


@dataclass
class Dynamics:
    script: List[Dict[str, Any]] = field(default_factory=list)
    shuffle_period_ms: Optional[Tuple[float, float]] = None
    shuffle_until_ms: float = 0.0
    random: Dict[str, float] = field(default_factory=dict)
    pong_loss: float = 0.0
    drop_pongs: List[Tuple[Any, int]] = field(default_factory=list)
    guard_partitions: bool = True
    allow_partitions: bool = False


@dataclass
class Workload:
    script: List[Dict[str, Any]] = field(default_factory=list)
    total_messages: int = 0
    rate_per_process: Optional[float] = None
    from_ms: float = 0.0
    until_ms: float = 0.0


@dataclass
class GuardParams:
    max_size: Optional[int] = None
    max_retry: Optional[int] = None
    timeout_ms: Optional[float] = None


@dataclass
class Sampling:
    interval_ms: float = 10_000.0
    sources: int = 16


@dataclass
class Scenario:
    protocol: str
    process_count: int
    name: str = "scenario"
    seed: int = 0
    names: Optional[List[str]] = None
    initial_topology: Topology = field(default_factory=Topology)
    latency_ramp: LatencyRamp = field(default_factory=LatencyRamp)
    dynamics: Dynamics = field(default_factory=Dynamics)
    workload: Workload = field(default_factory=Workload)
    guard: GuardParams = field(default_factory=GuardParams)
    ping_routing: str = "flood"
    metrics: Sampling = field(default_factory=Sampling)
    max_time_ms: float = 3_600_000.0

    def __post_init__(self) -> None:
        self.validate()

    # -- references -------------------------------------------------------

    def pid(self, ref: Union[int, str]) -> int:
        """Resolve a process reference (index or name)."""
        if isinstance(ref, bool):
            raise ScenarioError(f"bad process reference {ref!r}")
        if isinstance(ref, int):
            return ref
        if self.names and ref in self.names:
            return self.names.index(ref)
        try:
            return int(ref)
        except (TypeError, ValueError):
            raise ScenarioError(f"unknown process {ref!r}") from None

    def link_key(self, src: int, dst: int) -> Optional[float]:
        lr = self.latency_ramp
        for a in (self.label(src), str(src)):
            for b in (self.label(dst), str(dst)):
                val = lr.links.get(f"{a}->{b}")
                if val is not None:
                    return float(val)
        return None

    def label(self, pid: int) -> str:
        if self.names and 0 <= pid < len(self.names):
            return self.names[pid]
        return str(pid)

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not isinstance(self.process_count, int) or self.process_count < 1:
            raise ScenarioError("processCount must be a positive integer")
        if self.names is not None:
            if len(self.names) != self.process_count or len(set(self.names)) != len(self.names):
                raise ScenarioError("names must list one distinct label per initial process")
        topo = self.initial_topology
        if topo.kind not in TOPOLOGIES:
            raise ScenarioError(f"initialTopology.kind must be one of {TOPOLOGIES}")
        if topo.kind == "random" and not 1 <= topo.degree < max(2, self.process_count):
            raise ScenarioError("initialTopology.degree must be in [1, processCount)")
        for a, b in topo.edges:
            pa, pb = self.pid(a), self.pid(b)
            if not (0 <= pa < self.process_count and 0 <= pb < self.process_count) or pa == pb:
                raise ScenarioError(f"bad edge {a!r}->{b!r}")
        lr = self.latency_ramp
        if min(lr.start_ms, lr.end_ms, lr.duration_ms) < 0:
            raise ScenarioError("latencyRamp values must be non-negative")
        lo, hi = lr.spread
        if not 0 <= lo <= hi:
            raise ScenarioError("latencyRamp.spread must satisfy 0 <= lo <= hi")
        if not 0 <= lr.jitter <= 1:
            raise ScenarioError("latencyRamp.jitter must be within [0, 1]")
        for key in lr.links:
            if "->" not in key:
                raise ScenarioError(f"latency link key {key!r} must look like 'A->B'")
        dyn = self.dynamics
        for op in dyn.script:
            if op.get("op") not in SCRIPT_OPS or "at" not in op:
                raise ScenarioError(f"bad dynamics script entry {op!r}")
        if dyn.shuffle_period_ms is not None:
            lo, hi = dyn.shuffle_period_ms
            if not 0 < lo <= hi:
                raise ScenarioError("dynamics.shuffle.periodMs must satisfy 0 < lo <= hi")
        if not 0 <= dyn.pong_loss <= 1:
            raise ScenarioError("dynamics.pongLoss must be a probability")
        for entry in self.workload.script:
            if "at" not in entry or "process" not in entry:
                raise ScenarioError(f"bad workload script entry {entry!r}")
        g = self.guard
        if g.max_size is not None and g.max_size < 1:
            raise ScenarioError("guard.maxSize must be positive")
        if g.max_retry is not None and g.max_retry < 0:
            raise ScenarioError("guard.maxRetry must be non-negative")
        if self.ping_routing not in ("flood", "route"):
            raise ScenarioError("pingRouting must be 'flood' or 'route'")
        if self.metrics.interval_ms <= 0 or self.metrics.sources < 1:
            raise ScenarioError("metrics.intervalMs and metrics.sources must be positive")
        if topo.kind == "explicit" and not self.dynamics.allow_partitions:
            if not _weakly_connected(self.process_count,
                                     [(self.pid(a), self.pid(b)) for a, b in topo.edges]):
                raise ScenarioError("initial topology is partitioned (set dynamics.allowPartitions)")

    # -- (de)serialisation --------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "protocol": self.protocol,
            "processCount": self.process_count,
            "names": self.names,
            "initialTopology": {
                "kind": self.initial_topology.kind,
                "degree": self.initial_topology.degree,
                "edges": [list(e) for e in self.initial_topology.edges],
                "bidirectional": self.initial_topology.bidirectional,
            },
            "latencyRamp": {
                "startMs": self.latency_ramp.start_ms,
                "endMs": self.latency_ramp.end_ms,
                "durationMs": self.latency_ramp.duration_ms,
                "spread": list(self.latency_ramp.spread),
                "jitter": self.latency_ramp.jitter,
                "links": dict(self.latency_ramp.links),
                "defaultMs": self.latency_ramp.default_ms,
            },
            "dynamics": {
                "script": copy.deepcopy(self.dynamics.script),
                "shuffle": None if self.dynamics.shuffle_period_ms is None else {
                    "periodMs": list(self.dynamics.shuffle_period_ms),
                    "untilMs": self.dynamics.shuffle_until_ms,
                },
                "random": _random_ops(self.dynamics.random),
                "pongLoss": self.dynamics.pong_loss,
                "dropPongs": [list(d) for d in self.dynamics.drop_pongs],
                "guardPartitions": self.dynamics.guard_partitions,
                "allowPartitions": self.dynamics.allow_partitions,
            },
            "workload": {
                "script": copy.deepcopy(self.workload.script),
                "totalMessages": self.workload.total_messages,
                "ratePerProcess": self.workload.rate_per_process,
                "fromMs": self.workload.from_ms,
                "untilMs": self.workload.until_ms,
            },
            "guard": {
                "maxSize": self.guard.max_size,
                "maxRetry": self.guard.max_retry,
                "timeoutMs": self.guard.timeout_ms,
            },
            "pingRouting": self.ping_routing,
            "metrics": {"intervalMs": self.metrics.interval_ms, "sources": self.metrics.sources},
            "maxTimeMs": self.max_time_ms,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes: Any) -> "Scenario":
        data = {**asdict_shallow(self), **changes}
        return Scenario(**data)


def _random_ops(rnd: Dict[str, Any]) -> Dict[str, Any]:
    """Operation counts as ints and window bounds as floats, so hashes are stable."""
    return {k: float(v) if k.endswith("Ms") else int(v) for k, v in rnd.items()}


def asdict_shallow(sc: Scenario) -> Dict[str, Any]:
    return {f: copy.deepcopy(getattr(sc, f)) for f in sc.__dataclass_fields__}


_TOP_KEYS = {"name", "seed", "protocol", "processCount", "names", "initialTopology",
             "latencyRamp", "dynamics", "workload", "guard", "pingRouting", "metrics",
             "maxTimeMs"}


def _take(d: Dict[str, Any], allowed: set, where: str) -> Dict[str, Any]:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ScenarioError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {sorted(extra)}")
    return d


def scenario_from_dict(raw: Dict[str, Any]) -> Scenario:
    raw = _take(raw, _TOP_KEYS, "scenario")
    if "protocol" not in raw or "processCount" not in raw:
        raise ScenarioError("scenario needs 'protocol' and 'processCount'")
    t = _take(raw.get("initialTopology"), {"kind", "degree", "edges", "bidirectional"},
              "initialTopology")
    lr = _take(raw.get("latencyRamp"), {"startMs", "endMs", "durationMs", "spread", "jitter",
                                        "links", "defaultMs"}, "latencyRamp")
    dy = _take(raw.get("dynamics"), {"script", "shuffle", "random", "pongLoss", "dropPongs",
                                     "guardPartitions", "allowPartitions"}, "dynamics")
    sh = _take(dy.get("shuffle"), {"periodMs", "untilMs"}, "dynamics.shuffle")
    rnd = _take(dy.get("random"), {"adds", "removes", "joins", "leaves", "fromMs", "untilMs"},
                "dynamics.random")
    wl = _take(raw.get("workload"), {"script", "totalMessages", "ratePerProcess", "fromMs",
                                     "untilMs"}, "workload")
    g = _take(raw.get("guard"), {"maxSize", "maxRetry", "timeoutMs"}, "guard")
    m = _take(raw.get("metrics"), {"intervalMs", "sources"}, "metrics")
    try:
        return Scenario(
            name=str(raw.get("name", "scenario")),
            seed=int(raw.get("seed", 0)),
            protocol=raw["protocol"],
            process_count=raw["processCount"],
            names=raw.get("names"),
            initial_topology=Topology(
                kind=t.get("kind", "random"),
                degree=int(t.get("degree", 4)),
                edges=[tuple(e) for e in t.get("edges", [])],
                bidirectional=bool(t.get("bidirectional", False)),
            ),
            latency_ramp=LatencyRamp(
                start_ms=float(lr.get("startMs", 0.0)),
                end_ms=float(lr.get("endMs", lr.get("startMs", 0.0))),
                duration_ms=float(lr.get("durationMs", 0.0)),
                spread=tuple(lr.get("spread", (0.5, 1.0))),
                jitter=float(lr.get("jitter", 0.0)),
                links={k: float(v) for k, v in (lr.get("links") or {}).items()},
                default_ms=None if lr.get("defaultMs") is None else float(lr["defaultMs"]),
            ),
            dynamics=Dynamics(
                script=list(dy.get("script", [])),
                shuffle_period_ms=tuple(sh["periodMs"]) if sh.get("periodMs") else None,
                shuffle_until_ms=float(sh.get("untilMs", 0.0)),
                random=_random_ops(rnd),
                pong_loss=float(dy.get("pongLoss", 0.0)),
                drop_pongs=[tuple(d) for d in dy.get("dropPongs", [])],
                guard_partitions=bool(dy.get("guardPartitions", True)),
                allow_partitions=bool(dy.get("allowPartitions", False)),
            ),
            workload=Workload(
                script=list(wl.get("script", [])),
                total_messages=int(wl.get("totalMessages", 0)),
                rate_per_process=wl.get("ratePerProcess"),
                from_ms=float(wl.get("fromMs", 0.0)),
                until_ms=float(wl.get("untilMs", 0.0)),
            ),
            guard=GuardParams(
                max_size=g.get("maxSize"),
                max_retry=g.get("maxRetry"),
                timeout_ms=g.get("timeoutMs"),
            ),
            ping_routing=raw.get("pingRouting", "flood"),
            metrics=Sampling(
                interval_ms=float(m.get("intervalMs", 10_000.0)),
                sources=int(m.get("sources", 16)),
            ),
            max_time_ms=float(raw.get("maxTimeMs", 3_600_000.0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc


def bundled_names() -> List[str]:
    root = resources.files("causal_mesh") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: Union[str, Path]) -> Scenario:
    """Load a scenario from a JSON file, or by the name of a bundled one."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        res = resources.files("causal_mesh") / "scenarios" / f"{ref}.json"
        if not res.is_file():
            raise ScenarioError(f"no scenario file or bundled scenario named {str(ref)!r}")
        text = res.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{ref}: invalid JSON: {exc}") from exc
    return scenario_from_dict(raw)


def _weakly_connected(n: int, edges: List[Tuple[int, int]]) -> bool:
    adj: Dict[int, set] = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {0}
    stack = [0]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == n


def randomized(seed: int, protocol: str = "pc", n: Optional[int] = None,
               ping_routing: Optional[str] = None, messages: int = 16) -> Scenario:
    """A random connected network under random graceful churn.

    Latencies are uniform in [0, 5000] ms per link with per-message jitter.
    """
    import random

    rng = random.Random(f"randomized:{seed}")
    n = n if n is not None else rng.randint(8, 64)
    return Scenario(
        name=f"randomized-{seed}",
        seed=seed,
        protocol=protocol,
        process_count=n,
        initial_topology=Topology(kind="random", degree=min(n - 1, rng.randint(2, 4))),
        latency_ramp=LatencyRamp(start_ms=5000.0, end_ms=5000.0, spread=(0.0, 1.0),
                                 jitter=0.5),
        dynamics=Dynamics(
            shuffle_period_ms=(30_000.0, 60_000.0),
            shuffle_until_ms=40_000.0,
            random={"adds": max(2, n // 4), "removes": max(2, n // 6), "joins": 2,
                    "leaves": 2, "fromMs": 0.0, "untilMs": 40_000.0},
        ),
        workload=Workload(total_messages=messages, from_ms=0.0, until_ms=40_000.0),
        ping_routing=ping_routing or rng.choice(["flood", "route"]),
        metrics=Sampling(interval_ms=20_000.0, sources=4),
    )
