"""Causal broadcast over dynamic overlays, with a simulator to exercise it."""

from .core import MessageId, Payload, Ping, Pong, ReceivedLog, VcPayload
from .guard import BufferGuard
from .oracle import TraceError, Verdict, verify
from .pcbroadcast import PCProcess
from .rbroadcast import RBroadcastProcess
from .scenario import Scenario, ScenarioError, load_scenario, randomized
from .sim import RunResult, Simulation, run
from .vclock import VcProcess

__all__ = [
    "BufferGuard", "MessageId", "Payload", "PCProcess", "Ping", "Pong", "RBroadcastProcess",
    "ReceivedLog", "RunResult", "Scenario", "ScenarioError", "Simulation", "TraceError",
    "VcPayload", "VcProcess", "Verdict", "load_scenario", "randomized", "run", "verify",
]
__version__ = "0.1.0"
