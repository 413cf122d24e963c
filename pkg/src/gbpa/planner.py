"""Turn a natural-language request into a runnable workflow spec.

Planning is two-layered: an optional external provider is asked first, and a
deterministic template library is the fallback. Templates are ordinary spec
documents with {{placeholder}} strings bound from the extracted intent.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import httpx

from .errors import (
    MissingEntityError,
    NoTemplateError,
    PlannerError,
    PlanningFailedError,
    UnboundPlaceholderError,
    UnrecognizedIntentError,
)
from .process_spec import ProcessSpec, parse_spec


@dataclass(frozen=True)
class Intent:
    kind: str
    entities: tuple[tuple[str, str], ...] = ()
    text: str = ""

    def entity(self, name: str, default: str | None = None) -> str | None:
        return dict(self.entities).get(name, default)


_AMOUNT = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?)(?!\.?\d)")
_CURRENCY = re.compile(r"\b([A-Z]{3})\b")


def _first(pattern: str, text: str) -> str | None:
    m = re.search(pattern, text)
    return m.group(1) if m else None


def extract_intent(text: str) -> Intent:
    """Classify the request and pull out its entities.

    Recognized intents: wire_transfer, reimbursement, transaction_query.
    """
    lowered = text.lower()
    entities: dict[str, str] = {}

    amount = _AMOUNT.search(text)
    if amount:
        entities["amount"] = amount.group(1)
    currency = _CURRENCY.search(text)
    if currency:
        entities["currency"] = currency.group(1)

    if any(w in lowered for w in ("wire", "remit", "transfer")) and "reimburs" not in lowered:
        src = _first(r"from\s+(\S+)", lowered)
        dst = _first(r"to\s+(\S+)", lowered)
        counterparty = _first(r"counterparty\s+(\S+)", text)
        purpose = _first(r"purpose\s+(\S+)", lowered)
        if src:
            entities["src"] = src.rstrip(".,")
        if dst:
            entities["dst"] = dst.rstrip(".,")
        entities["counterparty"] = (counterparty or "unspecified").rstrip(".,")
        entities["purpose"] = (purpose or "general").rstrip(".,")
        for required in ("amount", "currency", "src", "dst"):
            if required not in entities:
                raise MissingEntityError(required)
        return Intent("wire_transfer", tuple(sorted(entities.items())), text)

    if any(w in lowered for w in ("reimburs", "expense claim", "expense report")):
        employee = _first(r"(?:for|employee)\s+(\S+)", lowered)
        category = _first(r"category\s+(\S+)", lowered)
        if employee:
            entities["employee"] = employee.rstrip(".,")
        entities["category"] = (category or "general").rstrip(".,")
        for required in ("amount", "employee"):
            if required not in entities:
                raise MissingEntityError(required)
        return Intent("reimbursement", tuple(sorted(entities.items())), text)

    if any(w in lowered for w in ("show", "list", "find", "query")) and any(
        w in lowered for w in ("transaction", "deposit", "payment", "event")
    ):
        customer = _first(r"customer\s+(\S+)", lowered)
        if customer:
            entities["customer"] = customer.rstrip(".,?")
        terms = [
            w for w in re.findall(r"[a-z0-9-]+", lowered)
            if w not in ("show", "list", "find", "query", "me", "all", "the", "please")
        ]
        entities["query"] = " ".join(terms)
        return Intent("transaction_query", tuple(sorted(entities.items())), text)

    raise UnrecognizedIntentError(f"cannot classify request: {text[:80]!r}")


_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


def _substitute(value: Any, entities: Mapping[str, str], unbound: set[str]) -> Any:
    if isinstance(value, str):
        def repl(m: re.Match) -> str:
            name = m.group(1)
            if name not in entities:
                unbound.add(name)
                return m.group(0)
            return str(entities[name])
        return _PLACEHOLDER.sub(repl, value)
    if isinstance(value, Mapping):
        return {k: _substitute(v, entities, unbound) for k, v in value.items()}
    if isinstance(value, list):
        return [_substitute(v, entities, unbound) for v in value]
    return value


class TemplateLibrary:
    """Spec documents keyed by intent kind."""

    def __init__(self):
        self._templates: dict[str, dict[str, Any]] = {}

    def register(self, kind: str, doc: Mapping[str, Any]) -> None:
        self._templates[str(kind)] = dict(doc)

    def kinds(self) -> list[str]:
        return sorted(self._templates)

    def template_for(self, kind: str) -> dict[str, Any]:
        if kind not in self._templates:
            raise NoTemplateError(f"no template registered for intent: {kind}")
        return self._templates[kind]

    def instantiate(self, intent: Intent) -> ProcessSpec:
        doc = self.template_for(intent.kind)
        unbound: set[str] = set()
        bound = _substitute(doc, dict(intent.entities), unbound)
        if unbound:
            raise UnboundPlaceholderError(sorted(unbound)[0])
        return parse_spec(bound)


PlanProvider = Callable[[str], Mapping[str, Any]]


class HttpPlannerProvider:
    """POSTs {"text": ...} to {base_url}/plan and expects a spec document."""

    def __init__(self, base_url: str, timeout_s: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def __call__(self, text: str) -> Mapping[str, Any]:
        try:
            response = httpx.post(
                f"{self.base_url}/plan", json={"text": text}, timeout=self.timeout_s
            )
        except httpx.HTTPError as exc:
            raise PlannerError(f"planner endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise PlannerError(f"planner endpoint returned {response.status_code}")
        return response.json()


@dataclass(frozen=True)
class PlanOutcome:
    spec: ProcessSpec
    intent: Intent
    source: str
    defaults: tuple[tuple[str, Any], ...] = ()

    @property
    def run_inputs(self) -> dict[str, Any]:
        return dict(self.defaults)


def plan(
    text: str,
    library: TemplateLibrary,
    provider: PlanProvider | None = None,
) -> PlanOutcome:
    """Provider first, template fallback; both failing is a planning failure.

    Intent extraction failures propagate as-is since no layer can recover
    from an unintelligible request.
    """
    intent = extract_intent(text)
    provider_error: Exception | None = None
    if provider is not None:
        try:
            spec = parse_spec(dict(provider(text)))
            return PlanOutcome(
                spec, intent, "provider",
                tuple(sorted(spec.meta.get("defaults", {}).items())),
            )
        except Exception as exc:
            provider_error = exc
    try:
        spec = library.instantiate(intent)
    except Exception as template_error:
        raise PlanningFailedError(provider_error, template_error) from template_error
    return PlanOutcome(
        spec, intent, "template",
        tuple(sorted(spec.meta.get("defaults", {}).items())),
    )


def default_library() -> TemplateLibrary:
    """Built-in templates for the recognized intents."""
    library = TemplateLibrary()
    library.register("wire_transfer", {
        "id": "planned-wire",
        "version": "1",
        "nodes": [
            {
                "id": "intake_request",
                "agent_kind": "document",
                "reads": ["form.request_text"],
                "writes": [
                    "request.amount", "request.src_account",
                    "request.dst_account", "request.counterparty",
                ],
                "duration": 1000,
                "params": {
                    "source": "form.request_text",
                    "schema": {
                        "request.amount": "amount",
                        "request.src_account": "src_account",
                        "request.dst_account": "dst_account",
                        "request.counterparty": "counterparty",
                    },
                },
            },
            {
                "id": "account_review",
                "agent_kind": "api",
                "reads": ["request.src_account", "request.amount"],
                "writes": ["account.active", "account.funds_ok"],
                "duration": 1000,
                "params": {"endpoint": "account_review"},
            },
            {
                "id": "limit_authorization",
                "agent_kind": "authorization",
                "reads": ["request.amount"],
                "writes": ["auth.approved"],
                "duration": 1000,
                "params": {"amount_field": "request.amount", "role": "manager"},
            },
            {
                "id": "payment_execution",
                "agent_kind": "api",
                "reads": [
                    "auth.approved", "account.funds_ok",
                    "request.src_account", "request.amount",
                ],
                "writes": ["payment.debited", "payment.dispatched"],
                "duration": 1000,
                "effectful": True,
                "params": {"endpoint": "payment"},
            },
        ],
        "edges": [
            ["intake_request", "account_review"],
            ["account_review", "limit_authorization"],
            ["limit_authorization", "payment_execution"],
        ],
        "metadata": {
            "inputs": ["form.request_text"],
            "defaults": {
                "form.request_text": (
                    "amount: {{amount}}\n"
                    "currency: {{currency}}\n"
                    "src_account: {{src}}\n"
                    "dst_account: {{dst}}\n"
                    "counterparty: {{counterparty}}"
                ),
            },
        },
    })
    library.register("reimbursement", {
        "id": "planned-reimbursement",
        "version": "1",
        "nodes": [
            {
                "id": "claim_intake",
                "agent_kind": "document",
                "reads": ["form.receipt_text"],
                "writes": ["claim.amount", "claim.employee"],
                "duration": 1000,
                "params": {
                    "source": "form.receipt_text",
                    "schema": {
                        "claim.amount": "amount",
                        "claim.employee": "employee",
                    },
                },
            },
            {
                "id": "claim_checks",
                "agent_kind": "reasoning",
                "reads": ["claim.amount", "claim.employee"],
                "writes": ["validation.ok"],
                "duration": 1000,
            },
            {
                "id": "approval",
                "agent_kind": "authorization",
                "reads": ["claim.amount"],
                "writes": ["approval.manager"],
                "duration": 1000,
                "params": {"amount_field": "claim.amount", "role": "manager"},
            },
        ],
        "edges": [
            ["claim_intake", "claim_checks"],
            ["claim_checks", "approval"],
        ],
        "metadata": {
            "inputs": ["form.receipt_text"],
            "defaults": {
                "form.receipt_text": (
                    "amount: {{amount}}\nemployee: {{employee}}"
                ),
            },
        },
    })
    library.register("transaction_query", {
        "id": "planned-query",
        "version": "1",
        "nodes": [
            {
                "id": "history_lookup",
                "agent_kind": "retrieval",
                "reads": ["query.text"],
                "writes": ["query.results"],
                "duration": 1000,
                "params": {"query_field": "query.text", "out_field": "query.results"},
            },
        ],
        "edges": [],
        "metadata": {
            "inputs": ["query.text"],
            "defaults": {"query.text": "{{query}}"},
        },
    })
    return library
