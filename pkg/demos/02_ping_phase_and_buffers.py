"""
Ping phases and bounded buffers
===============================

A new link starts unsafe. Its owner pings the far end over safe links and
buffers every message it delivers meanwhile; the pong proves the far end has
caught up, so the buffer is flushed and the link joins the broadcast set.

Here the buffer holds at most 2 messages. A third delivery during the phase
resets the buffer and starts phase 2, so the pong of phase 1 arrives stale
and is discarded.
"""

from causal_mesh import Simulation, load_scenario

sim = Simulation(load_scenario("fig5_bounded_buffers"))
peak = {"size": 0}


def watch(s):
    for p in s.procs.values():
        for buf in getattr(p, "buffers", {}).values():
            peak["size"] = max(peak["size"], len(buf))


result = sim.run(observer=watch)
names = dict(enumerate(result.scenario.names))

for ev in result.trace:
    if ev.kind == "control" and ev.process == 0 and ev.peer == 2:
        phase = "" if ev.phase is None else f" (phase {ev.phase})"
        print(f"t={ev.time:>6.0f}  {names[ev.process]}->{names[ev.peer]}  {ev.detail}{phase}")

print("largest buffer ever held:", peak["size"])
print("outcome:", result.outcome)
