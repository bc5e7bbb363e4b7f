"""
Safe paths stretch as latency grows
===================================

A random overlay keeps reshuffling its links. Under preventive causal
broadcast a fresh link is unusable until its ping phase completes, so the
higher the latency, the more links are waiting at any moment and the longer
the paths made of safe links only. Plain flooding uses every link at once,
so its path lengths do not move.

This is a reduced version of the full sweep (N=128, two seeds) that runs in
well under a minute.
"""

import statistics

from causal_mesh import load_scenario, run
from causal_mesh.cli import with_ramp

base = load_scenario("sec4_sweep").replace(process_count=128)
levels = [0, 1000, 2500, 5000]

print(f"{'ramp ms':>8} {'protocol':>10} {'safe paths':>11} {'all paths':>10} {'unsafe/proc':>12}")
for level in levels:
    for protocol in ("pc", "rbroadcast"):
        cells = []
        for seed in (0, 1):
            sc = with_ramp(base.replace(protocol=protocol, seed=seed), level)
            rows = [r for r in run(sc).report.rows if 30_000 <= r["time_ms"] <= 120_000]
            cells.append(rows)
        flat = [r for rows in cells for r in rows]
        print(f"{level:>8} {protocol:>10} "
              f"{statistics.fmean(r['avg_sp_safe'] for r in flat):>11.3f} "
              f"{statistics.fmean(r['avg_sp_all'] for r in flat):>10.3f} "
              f"{statistics.fmean(r['avg_unsafe_links'] for r in flat):>12.3f}")
