"""Acceptance criteria 1-10, one PASS/FAIL line each in the terminal summary."""

import inspect
import json
import random
import time
from collections import Counter

import pytest
from scipy.stats import spearmanr

from bruteforce import closure_verdict, link_breaches, random_trace
from causal_mesh import cli
from causal_mesh.core import MessageId, VcPayload
from causal_mesh.metrics import overhead_stats, parse_csv
from causal_mesh.oracle import verify
from causal_mesh.pcbroadcast import PCProcess
from causal_mesh.rbroadcast import RBroadcastProcess
from causal_mesh.scenario import Workload, load_scenario, randomized
from causal_mesh.sim import Simulation, run
from causal_mesh.testing import RecordingNetwork
from causal_mesh.trace import BROADCAST, CONTROL, RECEIVE
from causal_mesh.vclock import VcProcess
from conftest import report

A, B, D, X = 0, 1, 2, 3
SUITE_RUNS = 1000
PLATEAU = (30_000, 120_000)


@pytest.fixture(scope="module")
def suite():
    """The randomized PC safety suite, shared by criteria 2, 7 and 8."""
    t0 = time.perf_counter()
    runs = []
    for seed in range(SUITE_RUNS):
        r = run(randomized(seed, "pc"))
        receipts = sum(1 for e in r.trace if e.kind == RECEIVE and e.detail == "payload")
        broadcasts = sum(1 for e in r.trace if e.kind == BROADCAST)
        runs.append({
            "n": r.scenario.process_count,
            "outcome": r.outcome,
            "violations": len(r.verdict.causal_violations),
            "duplicates": len(r.verdict.duplicates),
            "missing": len(r.verdict.missing_deliveries),
            "breaches": len(r.verdict.safe_link_breaches),
            "ack_breaches": len(r.verdict.ping_ack_breaches),
            "ops": r.ops,
            "copies": receipts + broadcasts,
            "joins": sum(1 for e in r.trace if e.detail == "join"),
            "leaves": sum(1 for e in r.trace if e.detail == "leave"),
            "exchanges": sum(1 for e in r.trace if e.detail == "exchange"),
        })
    return runs, time.perf_counter() - t0


def test_1_fig2_violation_reproduced():
    t0 = time.perf_counter()
    verdicts = {p: run(load_scenario("fig2_violation").replace(protocol=p)).verdict
                for p in ("rbroadcast", "pc", "vc")}
    elapsed = time.perf_counter() - t0
    r_viol = verdicts["rbroadcast"].to_dict()["causalViolations"]
    ok = (r_viol == [{"process": "D", "earlier": "a", "later": "a'"}]
          and not verdicts["pc"].causal_violations and not verdicts["vc"].causal_violations
          and elapsed < 1.0)
    report(1, ok, f"rbroadcast={[(v['process'], v['earlier'], v['later']) for v in r_viol]} "
                  f"pc={len(verdicts['pc'].causal_violations)} "
                  f"vc={len(verdicts['vc'].causal_violations)} in {elapsed:.3f}s")
    assert ok


def test_2_randomized_pc_suite(suite):
    runs, elapsed = suite
    sizes = [r["n"] for r in runs]
    bad = [i for i, r in enumerate(runs) if r["outcome"] != "clean"]
    totals = {k: sum(r[k] for r in runs) for k in ("violations", "duplicates", "missing")}
    churn = {k: sum(r[k] for r in runs) for k in ("joins", "leaves", "exchanges")}
    ok = (len(runs) >= 1000 and min(sizes) >= 8 and max(sizes) <= 64 and not bad
          and not any(totals.values()) and elapsed < 300)
    report(2, ok, f"{len(runs)} runs, N {min(sizes)}..{max(sizes)}, {totals}, "
                  f"churn {churn}, {len(bad)} non-clean, {elapsed:.0f}s")
    assert ok, bad[:10]


def _plateau_means(rows, manifest):
    """Per cell: mean of the metric rows inside the plateau window."""
    cells = []
    for cell in manifest["cells"]:
        assert "error" not in cell, cell
        chunk = rows[cell["firstRow"]:cell["firstRow"] + cell["rowCount"]]
        window = [r for r in chunk if PLATEAU[0] <= float(r["time_ms"]) <= PLATEAU[1]]
        assert window
        mean = {c: sum(float(r[c]) for r in window) / len(window)
                for c in ("avg_sp_safe", "avg_sp_all", "avg_unsafe_links")}
        cells.append((cell, mean))
    return cells


def test_3_latency_ramp_trend(tmp_path):
    levels = [0, 1000, 2500, 5000]
    details = []
    ok = True
    for n in (256, 1000):
        out = tmp_path / f"n{n}"
        t0 = time.perf_counter()
        code = cli.main(["sweep", "--scenario", "sec4_sweep", "--protocol", "pc,rbroadcast",
                         "--ramp", ",".join(map(str, levels)), "--n", str(n), "--reps", "5",
                         "--seed", "0", "--out", str(out)])
        elapsed = time.perf_counter() - t0
        rows = parse_csv((out / "sweep.csv").read_text())
        manifest = json.loads((out / "manifest.json").read_text())
        cells = _plateau_means(rows, manifest)
        pc = [(c["rampMs"], m) for c, m in cells if c["protocol"] == "pc"]
        rb = [(c["rampMs"], m) for c, m in cells if c["protocol"] == "rbroadcast"]
        rho = spearmanr([lv for lv, _ in pc], [m["avg_sp_safe"] for _, m in pc])[0]

        def by_level(pairs, col):
            return [sum(m[col] for lv, m in pairs if lv == L) / sum(1 for lv, _ in pairs if lv == L)
                    for L in levels]

        all_rb = by_level(rb, "avg_sp_all")
        spread = (max(all_rb) - min(all_rb)) / (sum(all_rb) / len(all_rb))
        unsafe = by_level(pc, "avg_unsafe_links")
        rising = all(a < b for a, b in zip(unsafe, unsafe[1:]))
        pc_clean = all(c["outcome"] == "clean" for c, _ in cells if c["protocol"] == "pc")
        cell_ok = (code in (0, 1) and rho > 0.8 and spread < 0.05 and rising and pc_clean
                   and elapsed < 900)
        ok = ok and cell_ok
        details.append(f"N={n}: rho={rho:.3f} R-all spread={100 * spread:.2f}% "
                       f"unsafe={[round(u, 2) for u in unsafe]} {elapsed:.0f}s")
    report(3, ok, "; ".join(details))
    assert ok


def test_4_constant_control_overhead():
    base = load_scenario("sec4_sweep")
    pc_sizes = set()
    for n in (16, 64, 256):
        for msgs in (4, 64):
            sc = base.replace(process_count=n, protocol="pc",
                              workload=Workload(total_messages=msgs, until_ms=120_000.0))
            pc_sizes |= set(overhead_stats(run(sc).trace).get("payload", Counter()))
    vc_mean = {}
    for n in (16, 256):
        sc = base.replace(process_count=n, protocol="vc",
                          workload=Workload(total_messages=64, until_ms=120_000.0))
        dist = overhead_stats(run(sc).trace)["vc"]
        vc_mean[n] = sum(k * c for k, c in dist.items()) / sum(dist.values())
    ok = pc_sizes == {17} and vc_mean[256] > vc_mean[16]
    report(4, ok, f"pc control bytes {sorted(pc_sizes)}; vc mean "
                  f"N=16 {vc_mean[16]:.1f} < N=256 {vc_mean[256]:.1f}")
    assert ok


def test_5_bounded_buffers_fig5():
    sim = Simulation(load_scenario("fig5_bounded_buffers"))
    peak = [0]

    def watch(s):
        for p in s.procs.values():
            for buf in getattr(p, "buffers", {}).values():
                peak[0] = max(peak[0], len(buf))

    result = sim.run(observer=watch)
    steps = [(e.detail, e.phase) for e in result.trace
             if e.kind == CONTROL and e.process == A and e.peer == D]
    expected = [("link_opened", None), ("ping_sent", 1), ("phase_retry", None),
                ("buffer_reset", None), ("ping_sent", 2), ("pong_discarded", 1),
                ("buffer_flushed", 2), ("link_safe", 2)]
    ok = steps == expected and peak[0] <= 2 and result.outcome == "clean"
    report(5, ok, f"A->D: {' > '.join(d if p is None else f'{d}#{p}' for d, p in steps)}; "
                  f"peak buffer {peak[0]}")
    assert ok


def test_6_retry_bound_fig3():
    sim = Simulation(load_scenario("fig3_failures"))
    result = sim.run()
    a = sim.procs[A]
    phases = [e.phase for e in result.trace
              if e.kind == CONTROL and e.process == A and e.peer == D and e.detail == "ping_sent"]
    closed = [e for e in result.trace
              if e.kind == CONTROL and e.process == A and e.detail == "link_closed" and e.peer == D]
    ok = (phases == [1, 2, 3, 4] and len(closed) == 1 and D not in a.buffers
          and D not in a.neighbors and not a.guard.outstanding and D not in a.guard.retries
          and result.quiescent)
    report(6, ok, f"ping phases {phases}, closed={len(closed)}, "
                  f"buffer for D left={D in a.buffers}, quiescent={result.quiescent}")
    assert ok


def test_7_safe_link_definition(suite):
    runs, _ = suite
    breaches = sum(r["breaches"] for r in runs)
    acks = sum(r["ack_breaches"] for r in runs)
    ok = breaches == 0 and acks == 0
    report(7, ok, f"{breaches} safe-link breaches, {acks} ping-ack breaches over {len(runs)} runs")
    assert ok


def _vc_scan_cost(k):
    """Scan steps when ``k`` causally chained messages arrive newest first."""
    chain = [VcPayload(MessageId(0, c), b"", ((0, c),)) for c in range(1, k + 1)]
    dst = VcProcess(1, RecordingNetwork())
    for m in reversed(chain):
        dst.vc_on_receive(m)
    assert dst.delivered == k
    return dst.ops.pending_scan_steps


def test_8_constant_delivery_path(suite):
    runs, _ = suite
    structural = all("pending" not in inspect.getsource(f) for f in (
        RBroadcastProcess.on_payload, RBroadcastProcess._deliver, PCProcess._deliver,
        PCProcess.on_pong))
    structural = structural and not hasattr(PCProcess(0, RecordingNetwork()), "pending")
    scans = sum(r["ops"]["pending_scan_steps"] for r in runs)
    one_touch = all(r["ops"]["received_lookups"] == r["copies"] for r in runs)
    costs = {k: _vc_scan_cost(k) for k in (4, 8, 16, 32)}
    per_msg = [costs[k] / k for k in sorted(costs)]
    grows = all(a < b for a, b in zip(per_msg, per_msg[1:]))
    ok = structural and scans == 0 and one_touch and grows
    report(8, ok, f"pc pending scans={scans}, one log lookup per copy={one_touch}; "
                  f"vc scans per message with k parked: "
                  f"{ {k: round(c / k, 1) for k, c in costs.items()} }")
    assert ok


def test_9_oracle_matches_transitive_closure():
    mismatches = []
    traces = 200
    for seed in range(traces):
        trace = random_trace(random.Random(f"oracle:{seed}"), max_events=200)
        assert len(trace) <= 200
        v = verify(trace)
        vio, dup, missing = closure_verdict(trace)
        safe, acks = link_breaches(trace)
        same = (sorted(v.causal_violations) == sorted(vio) and v.duplicates == dup
                and set(v.missing_deliveries) == missing
                and len(v.missing_deliveries) == len(missing)
                and sorted(v.safe_link_breaches) == sorted(safe)
                and sorted(v.ping_ack_breaches) == sorted(acks))
        if not same:
            mismatches.append(seed)
    ok = not mismatches
    report(9, ok, f"{traces - len(mismatches)}/{traces} random traces agree with the brute force")
    assert ok, mismatches[:10]


def test_10_determinism(tmp_path):
    scenario_file = tmp_path / "randomized.json"
    scenario_file.write_text(json.dumps(randomized(7, "pc").to_dict()))
    same = []
    for ref in ("fig5_bounded_buffers", str(scenario_file), "sec4_sweep"):
        outs = []
        for rep in ("first", "second"):
            out = tmp_path / f"{len(same)}-{rep}"
            args = ["run", "--scenario", ref, "--seed", "42", "--out", str(out), "--emit-trace"]
            if ref == "sec4_sweep":
                args += ["--protocol", "vc"]
            cli.main(args)
            outs.append(((out / "metrics.csv").read_bytes(), (out / "trace.jsonl").read_bytes()))
        same.append(outs[0] == outs[1] and len(outs[0][1]) > 0)
    ok = all(same)
    report(10, ok, f"byte-identical CSV and trace on {sum(same)}/{len(same)} scenarios")
    assert ok
