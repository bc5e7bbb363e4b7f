"""
Checking a hand-written trace
=============================

The oracle reads nothing but the trace. Here B relays A's message and then
broadcasts its own; C receives B's message first, which breaks causality
because B's message depends on A's.
"""

from causal_mesh import verify
from causal_mesh.core import MessageId
from causal_mesh.trace import TraceEvent

A, B, C = 0, 1, 2
a, b = MessageId(A, 1), MessageId(B, 1)


def ev(t, kind, p, m=None, **kw):
    return TraceEvent(float(t), kind, p, m, **kw)


trace = [ev(0, "topology", p, detail="spawn") for p in (A, B, C)] + [
    ev(1, "broadcast", A, a, detail="a"), ev(1, "deliver", A, a),
    ev(2, "receive", B, a, peer=A, detail="payload"), ev(2, "deliver", B, a),
    ev(3, "broadcast", B, b, detail="b"), ev(3, "deliver", B, b),
    ev(4, "receive", C, b, peer=B, detail="payload"), ev(4, "deliver", C, b),
    ev(5, "receive", C, a, peer=A, detail="payload"), ev(5, "deliver", C, a),
]

verdict = verify(trace)
print("clean:", verdict.clean)
for v in verdict.to_dict()["causalViolations"]:
    print(f"process {v['process']} delivered {v['later']} before {v['earlier']}")
