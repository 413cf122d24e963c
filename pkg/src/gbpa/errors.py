"""Error taxonomy shared across the package."""
from __future__ import annotations


class GbpaError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.__doc__ or self.code)
        self.detail = detail or (self.__doc__ or self.code)


# --- event model ---------------------------------------------------------

class EventError(GbpaError):
    code = "event_error"


class MissingFieldError(EventError):
    code = "missing_field"

    def __init__(self, facet: str, detail: str = ""):
        self.facet = facet
        super().__init__(detail or f"missing mandatory facet: {facet}")


class BadUnitError(EventError):
    code = "bad_unit"


class BadTimestampError(EventError):
    code = "bad_timestamp"


# --- process specs -------------------------------------------------------

class SpecError(GbpaError):
    code = "spec_error"


class CycleDetectedError(SpecError):
    code = "cycle_detected"

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle + self.cycle[:1]))


class DuplicateNodeIdError(SpecError):
    code = "duplicate_node_id"


class DanglingEdgeError(SpecError):
    code = "dangling_edge"


class UnknownAgentKindError(SpecError):
    code = "unknown_agent_kind"


# --- planner -------------------------------------------------------------

class PlannerError(GbpaError):
    code = "planner_error"


class UnrecognizedIntentError(PlannerError):
    code = "unrecognized_intent"


class MissingEntityError(PlannerError):
    code = "missing_entity"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"intent is missing required entity: {name}")


class NoTemplateError(PlannerError):
    code = "no_template"


class UnboundPlaceholderError(PlannerError):
    code = "unbound_placeholder"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"template placeholder left unbound: {name}")


class PlanningFailedError(PlannerError):
    code = "planning_failed"

    def __init__(self, provider_error: Exception | None, template_error: Exception | None):
        self.provider_error = provider_error
        self.template_error = template_error
        super().__init__(
            f"planning failed; provider: {provider_error!r}; template: {template_error!r}"
        )


# --- engine --------------------------------------------------------------

class EngineError(GbpaError):
    code = "engine_error"


class RunAbortedError(EngineError):
    """Run terminated without completing; carries the partial result."""

    code = "run_aborted"

    def __init__(self, detail: str = "", result=None):
        super().__init__(detail or "run aborted")
        self.result = result


class WriteConflictError(EngineError):
    code = "write_conflict"


class TicketNotFoundError(EngineError):
    code = "ticket_not_found"


class AlreadyResolvedError(EngineError):
    code = "already_resolved"


class MissingInputError(EngineError):
    code = "missing_input"


# --- agents --------------------------------------------------------------

class AgentError(GbpaError):
    code = "agent_error"


class AgentFailure(AgentError):
    """Recoverable agent failure; subject to retry/fallback/escalation."""

    code = "agent_failure"


class ExtractionFailedError(AgentFailure):
    code = "extraction_failed"

    def __init__(self, fields: list[str]):
        self.fields = list(fields)
        super().__init__(f"could not extract fields: {', '.join(self.fields)}")


class UnknownRoleError(AgentError):
    code = "unknown_role"


class NonNumericFieldError(AgentError):
    code = "non_numeric_field"


class InsufficientFundsError(AgentFailure):
    code = "insufficient_funds"


class EndpointDownError(AgentFailure):
    code = "endpoint_down"


class EscalationRequired(AgentError):
    """Agent demands a human decision; bypasses retries and opens a ticket."""

    code = "escalation_required"


# --- optimizer -----------------------------------------------------------

class OptimizerError(GbpaError):
    code = "optimizer_error"


class MissingDurationError(OptimizerError):
    code = "missing_duration"

    def __init__(self, node: str):
        self.node = node
        super().__init__(f"no duration model for node: {node}")


class CorrelationKeyMissingError(OptimizerError):
    code = "correlation_key_missing"


# --- simulation harness --------------------------------------------------

class HarnessError(GbpaError):
    code = "harness_error"


class ScenarioAssetsMissingError(HarnessError):
    code = "scenario_assets_missing"


class ScenarioMismatchError(HarnessError):
    code = "scenario_mismatch"
