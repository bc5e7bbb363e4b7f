"""
Control bytes per message
=========================

Preventive causal broadcast only tags each message with its origin and a
counter, so the control part of a message has the same size whatever the
network size or history. A vector clock carries one entry per process that
has broadcast something the sender knows of.
"""

from causal_mesh import load_scenario, run
from causal_mesh.metrics import overhead_stats
from causal_mesh.scenario import Workload

base = load_scenario("sec4_sweep")
for n in (16, 64, 256):
    line = [f"N={n:<4}"]
    for protocol, kind in (("pc", "payload"), ("vc", "vc")):
        sc = base.replace(process_count=n, protocol=protocol,
                          workload=Workload(total_messages=64, until_ms=120_000.0))
        dist = overhead_stats(run(sc).trace)[kind]
        mean = sum(k * c for k, c in dist.items()) / sum(dist.values())
        line.append(f"{protocol}: mean {mean:6.1f} B (min {min(dist)}, max {max(dist)})")
    print("   ".join(line))
