"""Generative business-process agents: event model, process specs, a
stage-barrier run coordinator with human escalation, a dependency-mining
optimizer, and a simulation harness for the bundled scenarios."""
from __future__ import annotations

from .engine import (
    Decision,
    NodeStatus,
    RunCoordinator,
    RunResult,
    RunStatus,
    Ticket,
    TicketState,
    execute,
)
from .events import Actor, Event5W3H1R, EventLog, Outcome, Quantity, ResultStatus
from .harness import SimulationResult, compare, run_scenario, to_json
from .optimizer import OptimizationReport, OptimizerConfig, optimize
from .planner import PlanOutcome, default_library, plan
from .process_spec import (
    AgentKind,
    FallbackPolicy,
    Lognormal,
    NodeSpec,
    ProcessSpec,
    parse_spec,
    serialize_spec,
)
from .replay import ReplayedRun, load_trail, replay_records
from .scenarios import Scenario, build_resources, get_scenario, scenario_names
from .service import create_app

__version__ = "0.1.0"

__all__ = [
    "Actor",
    "AgentKind",
    "Decision",
    "Event5W3H1R",
    "EventLog",
    "FallbackPolicy",
    "Lognormal",
    "NodeSpec",
    "NodeStatus",
    "OptimizationReport",
    "OptimizerConfig",
    "Outcome",
    "PlanOutcome",
    "ProcessSpec",
    "Quantity",
    "ReplayedRun",
    "ResultStatus",
    "RunCoordinator",
    "RunResult",
    "RunStatus",
    "Scenario",
    "SimulationResult",
    "Ticket",
    "TicketState",
    "build_resources",
    "compare",
    "create_app",
    "default_library",
    "execute",
    "get_scenario",
    "load_trail",
    "optimize",
    "parse_spec",
    "plan",
    "replay_records",
    "run_scenario",
    "scenario_names",
    "serialize_spec",
    "to_json",
    "__version__",
]
