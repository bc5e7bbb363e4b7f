"""Overlay and protocol measurements sampled during a run."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .trace import SEND, TraceEvent

CSV_COLUMNS = (
    "time_ms", "protocol", "n_processes", "ramp_factor", "avg_sp_safe", "avg_sp_all",
    "avg_unsafe_links", "avg_buffer", "max_buffer", "ctrl_bytes_payload", "vc_pending",
    "violations", "duplicates", "abandoned_links", "ping_phases", "retries",
)


@dataclass
class PathSample:
    """Hop distances from sampled sources to every other process.

    ``distances`` keeps unreachable targets as ``inf``; ``unreachable`` counts
    them and ``mean`` is ``inf`` as soon as there is one, so a sparser graph can
    never report a shorter average.
    """

    distances: np.ndarray
    mean: float
    unreachable: int


def path_sample(nodes: Sequence[int], adjacency: Mapping[int, Iterable[int]],
                sources: Sequence[int]) -> PathSample:
    if not sources or len(nodes) < 2:
        return PathSample(np.zeros((len(sources), 0)), 0.0, 0)
    index = {p: i for i, p in enumerate(nodes)}
    rows: List[int] = []
    cols: List[int] = []
    for p in nodes:
        i = index[p]
        for q in adjacency.get(p, ()):
            j = index.get(q)
            if j is not None:
                rows.append(i)
                cols.append(j)
    n = len(nodes)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    src = [index[s] for s in sources]
    dist = shortest_path(graph, method="D", directed=True, unweighted=True, indices=src)
    dist = np.atleast_2d(dist)
    mask = np.ones_like(dist, dtype=bool)
    mask[np.arange(len(src)), src] = False
    others = dist[mask]
    unreachable = int((~np.isfinite(others)).sum())
    mean = math.inf if unreachable else float(others.mean()) if others.size else 0.0
    return PathSample(dist, mean, unreachable)


def overhead_stats(trace: Iterable[TraceEvent]) -> Dict[str, Counter]:
    """Control bytes of every sent broadcast message, per message class."""
    out: Dict[str, Counter] = {}
    for ev in trace:
        if ev.kind == SEND and ev.size is not None and ev.detail in ("payload", "vc"):
            out.setdefault(ev.detail, Counter())[ev.size] += 1
    return out


@dataclass
class MetricsReport:
    protocol: str
    rows: List[Dict[str, object]] = field(default_factory=list)
    unreachable_safe: List[int] = field(default_factory=list)
    unreachable_all: List[int] = field(default_factory=list)
    totals: Dict[str, object] = field(default_factory=dict)

    def series(self, column: str) -> List[object]:
        return [r[column] for r in self.rows]

    def fill_verdict_counts(self, violation_times: Sequence[float],
                            duplicate_times: Sequence[float]) -> None:
        vt = sorted(violation_times)
        dt = sorted(duplicate_times)
        for row in self.rows:
            t = row["time_ms"]
            row["violations"] = int(np.searchsorted(vt, t, side="right"))
            row["duplicates"] = int(np.searchsorted(dt, t, side="right"))

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([format_cell(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()


def format_cell(x: object) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        if math.isnan(x):
            return "nan"
        return f"{x:.6f}".rstrip("0").rstrip(".") or "0"
    return str(x)


def parse_csv(text: str) -> List[Dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))

