"""
Reproducing a causal order violation
====================================

Three processes A, B and D. A is linked to B, B to D. At t=10 ms A opens a
direct link to D, which is much faster than the path through B. A then
broadcasts ``a`` (t=0) and ``a'`` (t=20). With plain flooding D receives
``a'`` over the new link long before ``a`` comes around through B.
"""

from causal_mesh import load_scenario, run

sc = load_scenario("fig2_violation")

for protocol in ("rbroadcast", "pc", "vc"):
    result = run(sc.replace(protocol=protocol))
    verdict = result.verdict.to_dict()
    print(f"{protocol:>10}: outcome={result.outcome}")
    for v in verdict["causalViolations"]:
        print(f"{'':>12}{v['process']} delivered {v['later']} before {v['earlier']}")

# Where did D's copies come from? Each receive event names the sending peer.
result = run(sc)
names = {0: "A", 1: "B", 2: "D"}
for ev in result.trace:
    if ev.kind in ("receive", "deliver") and ev.process == 2:
        label = result.verdict.labels[ev.msg]
        via = f" via {names[ev.peer]}" if ev.kind == "receive" else ""
        print(f"t={ev.time:>6.0f}  D {ev.kind:<8} {label}{via}")
