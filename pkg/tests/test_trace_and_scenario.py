import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from causal_mesh.core import MessageId
from causal_mesh.scenario import (PROTOCOLS, Scenario, ScenarioError, bundled_names, load_scenario,
                                  randomized, scenario_from_dict)
from causal_mesh.trace import KINDS, TraceEvent, TraceFormatError, read_trace, write_trace

events = st.builds(
    TraceEvent,
    time=st.one_of(st.integers(0, 10**9).map(float), st.floats(0, 1e9, allow_nan=False)),
    kind=st.sampled_from(KINDS),
    process=st.integers(0, 10**6),
    msg=st.one_of(st.none(), st.builds(MessageId, st.integers(0, 999), st.integers(1, 999))),
    peer=st.one_of(st.none(), st.integers(0, 999)),
    detail=st.one_of(st.none(), st.text(max_size=8)),
    phase=st.one_of(st.none(), st.integers(1, 99)),
    ref=st.one_of(st.none(), st.integers(0, 10**6)),
    size=st.one_of(st.none(), st.integers(0, 999)),
    data=st.one_of(st.none(), st.fixed_dictionaries({"contact": st.integers(0, 9)})),
)


@given(st.lists(events, max_size=20))
def test_trace_round_trip(evs):
    buf = io.StringIO()
    write_trace(evs, buf)
    back = read_trace(io.StringIO(buf.getvalue()))
    assert back == evs


@pytest.mark.parametrize("line", [
    "not json", '{"k": "send"}', '{"t": 0, "k": "teleport", "p": 1}', '{"t": 0, "k": "send", "p": 1, "m": [1]}',
])
def test_corrupt_lines_are_reported(line):
    with pytest.raises(TraceFormatError):
        read_trace(io.StringIO(line + "\n"))


def test_blank_lines_are_skipped():
    assert read_trace(io.StringIO("\n\n")) == []


def test_bundled_scenarios_load():
    names = bundled_names()
    assert {"fig2_violation", "fig4_repair", "fig5_bounded_buffers", "fig3_failures",
            "sec4_sweep"} <= set(names)
    for name in names:
        sc = load_scenario(name)
        assert sc.protocol in PROTOCOLS


def test_names_resolve_to_indices():
    sc = load_scenario("fig2_violation")
    assert (sc.pid("A"), sc.pid("D"), sc.pid(1)) == (0, 2, 1)
    assert sc.link_key(0, 1) == 100 and sc.link_key(1, 0) is None
    with pytest.raises(ScenarioError):
        sc.pid("Z")


@pytest.mark.parametrize("raw", [
    {"protocol": "gossip", "processCount": 3},
    {"protocol": "pc", "processCount": 0},
    {"protocol": "pc"},
    {"protocol": "pc", "processCount": 3, "colour": "blue"},
    {"protocol": "pc", "processCount": 3, "initialTopology": {"kind": "torus"}},
    {"protocol": "pc", "processCount": 3, "initialTopology": {"kind": "random", "degree": 3}},
    {"protocol": "pc", "processCount": 3, "initialTopology": {"kind": "explicit", "edges": [[0, 1]]}},
    {"protocol": "pc", "processCount": 3, "latencyRamp": {"jitter": 2}},
    {"protocol": "pc", "processCount": 3, "guard": {"maxSize": 0}},
    {"protocol": "pc", "processCount": 3, "pingRouting": "smoke"},
    {"protocol": "pc", "processCount": 3, "dynamics": {"script": [{"op": "explode", "at": 1}]}},
    {"protocol": "pc", "processCount": "three"},
])
def test_invalid_scenarios_are_rejected(raw):
    with pytest.raises(ScenarioError):
        scenario_from_dict(raw)


def test_unknown_file_or_name(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario("no_such_scenario")
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    with pytest.raises(ScenarioError):
        load_scenario(str(bad))


def test_serialisation_round_trip_and_hash():
    for sc in (randomized(5), load_scenario("fig5_bounded_buffers"), load_scenario("sec4_sweep")):
        again = scenario_from_dict(json.loads(json.dumps(sc.to_dict())))
        assert again == sc and again.config_hash() == sc.config_hash()
    sc = randomized(5)
    assert sc.replace(seed=6).config_hash() != sc.config_hash()


def test_randomized_scenarios_stay_in_range():
    for seed in range(50):
        sc = randomized(seed)
        assert 8 <= sc.process_count <= 64
        assert isinstance(sc, Scenario) and sc.latency_ramp.end_ms == 5000
