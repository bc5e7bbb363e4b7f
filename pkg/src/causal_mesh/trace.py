"""Trace events and their line-oriented JSON form."""

from __future__ import annotations

import json
from typing import IO, Any, Dict, Iterable, Iterator, List, NamedTuple, Optional

from .core import MessageId

BROADCAST = "broadcast"
SEND = "send"
RECEIVE = "receive"
DELIVER = "deliver"
TOPOLOGY = "topology"
CONTROL = "control"
KINDS = (BROADCAST, SEND, RECEIVE, DELIVER, TOPOLOGY, CONTROL)


class TraceEvent(NamedTuple):
    """One observable step of a run.

    ``detail`` names the message class on send/receive (``payload``, ``vc``,
    ``ping``, ``pong``), the operation on topology events and the event name on
    control events; on broadcasts it carries the message label. ``ref`` is the
    index of the matching send for a receive. ``size`` is the control-byte
    count of a sent message. ``data`` holds rare structured extras such as the
    adopted receive log of a joining process.
    """

    time: float
    kind: str
    process: int
    msg: Optional[MessageId] = None
    peer: Optional[int] = None
    detail: Optional[str] = None
    phase: Optional[int] = None
    ref: Optional[int] = None
    size: Optional[int] = None
    data: Optional[Dict[str, Any]] = None


class TraceFormatError(ValueError):
    pass


def _num(x: float) -> Any:
    return int(x) if float(x).is_integer() else x


def event_to_json(ev: TraceEvent) -> str:
    rec: Dict[str, Any] = {"t": _num(ev.time), "k": ev.kind, "p": ev.process}
    if ev.msg is not None:
        rec["m"] = [ev.msg.origin, ev.msg.counter]
    for key, val in (("q", ev.peer), ("d", ev.detail), ("ph", ev.phase),
                     ("ref", ev.ref), ("sz", ev.size), ("x", ev.data)):
        if val is not None:
            rec[key] = val
    return json.dumps(rec, separators=(",", ":"), sort_keys=True)


def event_from_json(line: str, lineno: int = 0) -> TraceEvent:
    try:
        rec = json.loads(line)
        kind = rec["k"]
        if kind not in KINDS:
            raise TraceFormatError(f"line {lineno}: unknown event kind {kind!r}")
        m = rec.get("m")
        return TraceEvent(
            time=rec["t"],
            kind=kind,
            process=int(rec["p"]),
            msg=MessageId(int(m[0]), int(m[1])) if m is not None else None,
            peer=rec.get("q"),
            detail=rec.get("d"),
            phase=rec.get("ph"),
            ref=rec.get("ref"),
            size=rec.get("sz"),
            data=rec.get("x"),
        )
    except TraceFormatError:
        raise
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise TraceFormatError(f"line {lineno}: {exc}") from exc


def write_trace(events: Iterable[TraceEvent], fh: IO[str]) -> None:
    for ev in events:
        fh.write(event_to_json(ev))
        fh.write("\n")


def read_trace(fh: IO[str]) -> List[TraceEvent]:
    return list(iter_trace(fh))


def iter_trace(fh: IO[str]) -> Iterator[TraceEvent]:
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if line:
            yield event_from_json(line, lineno)
