"""
Giving up on a crashed neighbour
================================

A opens a link to D just before D crashes. No pong ever comes back, so every
ping phase times out. After the configured number of retries (3) A closes
the link and drops its buffer instead of growing it forever.
"""

from causal_mesh import Simulation, load_scenario

sim = Simulation(load_scenario("fig3_failures"))
result = sim.run()

for ev in result.trace:
    if ev.kind == "control" and ev.process == 0 and ev.peer == 2:
        print(f"t={ev.time:>6.0f}  {ev.detail}" + ("" if ev.phase is None else f" #{ev.phase}"))

a = sim.procs[0]
print("ping phases:", result.counters["ping_phases"])
print("buffer still held for D:", 2 in a.buffers)
print("quiescent:", result.quiescent, " outcome:", result.outcome)
