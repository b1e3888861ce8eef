"""Lockstep simulation harness: scenarios, faults, audit, traces."""

from .audit import AuditReport, audit
from .generator import generate
from .runner import run, simulate, verify_trace
from .scenario import ScenarioConfig, ScenarioError, load_scenario, parse_scenario
from .world import World

__all__ = [
    "AuditReport",
    "ScenarioConfig",
    "ScenarioError",
    "World",
    "audit",
    "generate",
    "load_scenario",
    "parse_scenario",
    "run",
    "simulate",
    "verify_trace",
]
