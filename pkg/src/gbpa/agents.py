"""Deterministic worker agents and the registry the engine dispatches through.

Each agent kind gets an adapter with signature (node, ctx) -> output field map.
Recoverable trouble raises AgentFailure (retried by the engine); demands for a
human raise EscalationRequired. Money is Decimal throughout; rates are exact
fractions.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from random import Random
from typing import Any, Callable, Iterable, Mapping, Sequence

from .errors import (
    AgentFailure,
    EndpointDownError,
    EscalationRequired,
    ExtractionFailedError,
    InsufficientFundsError,
    NonNumericFieldError,
    UnknownRoleError,
)
from .events import EventLog, render_narrative
from .process_spec import AgentKind, NodeSpec


# --- rule engine ---------------------------------------------------------

_CHECKS = {"present", "pattern", "lte", "lt", "gte", "gt", "eq", "ne", "in", "not_in"}


@dataclass(frozen=True)
class Rule:
    id: str
    field: str
    check: str
    value: Any = None
    severity: str = "block"
    code: str = ""

    def __post_init__(self):
        if self.check not in _CHECKS:
            raise ValueError(f"unknown check: {self.check}")
        if self.severity not in ("block", "warn"):
            raise ValueError(f"unknown severity: {self.severity}")


@dataclass(frozen=True)
class RuleSet:
    id: str
    rules: tuple[Rule, ...] = ()


@dataclass(frozen=True)
class Violation:
    rule_id: str
    code: str
    severity: str
    field: str


@dataclass(frozen=True)
class CheckReport:
    violations: tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not any(v.severity == "block" for v in self.violations)


def load_ruleset(doc: Mapping[str, Any]) -> RuleSet:
    return RuleSet(
        id=str(doc.get("id", "")),
        rules=tuple(
            Rule(
                id=str(r["id"]),
                field=str(r["field"]),
                check=str(r["check"]),
                value=r.get("value"),
                severity=str(r.get("severity", "block")),
                code=str(r.get("code", r["id"])),
            )
            for r in doc.get("rules", ())
        ),
    )


def load_blacklist(text: str) -> frozenset[str]:
    """Newline-delimited entries; blank lines and #-comments ignored."""
    entries = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line)
    return frozenset(entries)


def _as_decimal(value: Any) -> Decimal | None:
    if isinstance(value, bool):
        return None
    try:
        return Decimal(str(value))
    except InvalidOperation:
        return None


def _compare(check: str, left: Any, right: Any) -> bool:
    ld, rd = _as_decimal(left), _as_decimal(right)
    if ld is not None and rd is not None:
        left, right = ld, rd
    else:
        left, right = str(left), str(right)
    return {
        "lte": left <= right,
        "lt": left < right,
        "gte": left >= right,
        "gt": left > right,
        "eq": left == right,
        "ne": left != right,
    }[check]


def check_fields(fields: Mapping[str, Any], ruleset: RuleSet) -> CheckReport:
    """Evaluate every rule; a report passes iff no blocking violation fired.

    Absent fields fire only `present` rules, so coverage of absence is
    declared explicitly rather than implied by every comparison.
    """
    violations = []
    for rule in ruleset.rules:
        value = fields.get(rule.field)
        absent = value is None or value == ""
        if rule.check == "present":
            fired = absent
        elif absent:
            fired = False
        elif rule.check == "pattern":
            fired = re.fullmatch(str(rule.value), str(value)) is None
        elif rule.check == "in":
            fired = str(value) not in {str(v) for v in rule.value}
        elif rule.check == "not_in":
            fired = str(value) in {str(v) for v in rule.value}
        else:
            fired = not _compare(rule.check, value, rule.value)
        if fired:
            violations.append(Violation(rule.id, rule.code, rule.severity, rule.field))
    return CheckReport(tuple(violations))


# --- document extraction -------------------------------------------------

def extract_fields(text: str, schema: Mapping[str, str]) -> dict[str, Any]:
    """Pull `key: value` lines out of a document into schema-named fields.

    schema maps output field path -> source key in the document.
    """
    found: dict[str, str] = {}
    for line in text.splitlines():
        if ":" in line:
            key, _, value = line.partition(":")
            found[key.strip()] = value.strip()
    out: dict[str, Any] = {}
    missing = []
    for target, source in schema.items():
        if source in found and found[source] != "":
            out[target] = found[source]
        else:
            missing.append(target)
    if missing:
        raise ExtractionFailedError(sorted(missing))
    return out


# --- authorization -------------------------------------------------------

@dataclass(frozen=True)
class LimitTable:
    limits: tuple[tuple[str, Decimal], ...]

    def limit_for(self, role: str) -> Decimal:
        table = dict(self.limits)
        if role not in table:
            raise UnknownRoleError(f"no limit configured for role: {role}")
        return table[role]


def load_limits(doc: Mapping[str, Any]) -> LimitTable:
    return LimitTable(tuple(sorted((k, Decimal(str(v))) for k, v in doc.items())))


@dataclass(frozen=True)
class AuthorizationDecision:
    approved: bool
    role: str
    amount: Decimal
    reason: str = ""


def authorize(amount: Decimal | str, role: str, limits: LimitTable) -> AuthorizationDecision:
    """Approve iff amount is within the role's limit, inclusive."""
    amount = Decimal(str(amount))
    limit = limits.limit_for(role)
    if amount <= limit:
        return AuthorizationDecision(True, role, amount, "within limit")
    return AuthorizationDecision(False, role, amount, f"amount exceeds {role} limit {limit}")


# --- retrieval and search ------------------------------------------------

def retrieval_lookup(query: str, log: EventLog, k: int = 10):
    """Events whose narratives contain all query terms.

    Ranked by total term occurrences, then recency. An empty query returns
    the k most recent events.
    """
    events = list(log)
    if not query.strip():
        return sorted(events, key=lambda e: -e.when_ms)[:k]
    terms = [t.lower() for t in query.split()]
    scored = []
    for e in events:
        narrative = render_narrative(e).lower()
        if all(t in narrative for t in terms):
            scored.append((sum(narrative.count(t) for t in terms), e.when_ms, e))
    scored.sort(key=lambda item: (-item[0], -item[1]))
    return [e for _, _, e in scored[:k]]


def web_search(query: str, corpus: Sequence[tuple[str, str]], k: int = 5):
    """Canned local corpus of (title, body) documents; no network."""
    terms = [t.lower() for t in query.split() if t]
    hits = []
    for title, body in corpus:
        text = f"{title}\n{body}".lower()
        score = sum(text.count(t) for t in terms)
        if not terms or all(t in text for t in terms):
            hits.append((score, title))
    hits.sort(key=lambda item: (-item[0], item[1]))
    return [title for _, title in hits[:k]]


# --- data analysis -------------------------------------------------------

def analyst_compute(metric: str, log: EventLog, field: str | None = None):
    """count, sum(field), or error_rate over a log, with exact arithmetic."""
    if metric == "count":
        return len(log)
    if metric == "sum":
        if field is None:
            raise NonNumericFieldError("sum requires a field")
        total = Decimal(0)
        for e in log:
            if field == "how_much":
                if e.how_much is None:
                    continue
                total += e.how_much.magnitude
                continue
            value = dict(e.attributes).get(field)
            if value is None:
                continue
            number = _as_decimal(value)
            if number is None:
                raise NonNumericFieldError(f"non-numeric value for {field}: {value!r}")
            total += number
        return total
    if metric == "error_rate":
        if len(log) == 0:
            return Fraction(0)
        failures = sum(1 for e in log if e.result.status.value == "failure")
        return Fraction(failures, len(log))
    raise ValueError(f"unknown metric: {metric}")


# --- mock bank -----------------------------------------------------------

class MockBank:
    """In-memory ledger. Money moves between accounts and an external sink;
    the grand total never changes."""

    def __init__(self, accounts: Mapping[str, Decimal | str] | None = None):
        self.accounts: dict[str, Decimal] = {
            k: Decimal(str(v)) for k, v in (accounts or {}).items()
        }
        self.external_sink = Decimal(0)
        self.down_endpoints: set[str] = set()
        self._voucher_seq = 0

    def total(self) -> Decimal:
        return sum(self.accounts.values(), Decimal(0)) + self.external_sink

    def _guard(self, endpoint: str) -> None:
        if endpoint in self.down_endpoints:
            raise EndpointDownError(f"endpoint down: {endpoint}")

    def verify_account(self, account: str) -> bool:
        self._guard("verify_account")
        return account in self.accounts

    def check_balance(self, account: str, amount: Decimal | str) -> bool:
        self._guard("check_balance")
        return self.accounts.get(account, Decimal(0)) >= Decimal(str(amount))

    def debit(self, account: str, amount: Decimal | str) -> Decimal:
        self._guard("debit")
        amount = Decimal(str(amount))
        balance = self.accounts.get(account, Decimal(0))
        if balance < amount:
            raise InsufficientFundsError(f"{account} holds {balance}, needs {amount}")
        self.accounts[account] = balance - amount
        self.external_sink += amount
        return self.accounts[account]

    def dispatch(self, account: str, amount: Decimal | str) -> str:
        self._guard("dispatch")
        return f"disp-{account}-{Decimal(str(amount))}"

    def voucher(self, reference: str) -> str:
        self._guard("voucher")
        self._voucher_seq += 1
        return f"vch-{self._voucher_seq:06d}-{hashlib.sha256(reference.encode()).hexdigest()[:8]}"

    def archive(self, payload: str) -> str:
        self._guard("archive")
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# --- registry and adapters ----------------------------------------------

@dataclass
class AgentContext:
    """What a dispatched agent can see: upstream fields plus a seeded RNG."""

    fields: dict[str, Any]
    rng: Random
    attempt: int = 1
    resources: "ScenarioResources | None" = None


@dataclass
class ScenarioResources:
    bank: MockBank = field(default_factory=MockBank)
    rulesets: dict[str, RuleSet] = field(default_factory=dict)
    limits: LimitTable = field(default_factory=lambda: LimitTable(()))
    blacklist: frozenset[str] = frozenset()
    event_log: EventLog = field(default_factory=lambda: EventLog(()))
    search_corpus: tuple[tuple[str, str], ...] = ()
    allowed_purposes: frozenset[str] = frozenset()


Adapter = Callable[[NodeSpec, AgentContext], dict[str, Any]]


class AgentRegistry:
    """agent kind -> adapter, with an exclusivity flag per binding."""

    def __init__(self):
        self._bindings: dict[AgentKind, tuple[Adapter, bool]] = {}

    def bind(self, kind: AgentKind, adapter: Adapter, exclusive: bool = False) -> None:
        self._bindings[AgentKind(kind)] = (adapter, exclusive)

    def adapter(self, kind: AgentKind) -> tuple[Adapter, bool]:
        if kind not in self._bindings:
            raise KeyError(f"no agent bound for kind: {kind}")
        return self._bindings[kind]

    def kinds(self) -> list[AgentKind]:
        return sorted(self._bindings, key=lambda k: k.value)


def _ok_writes(node: NodeSpec, **overrides: Any) -> dict[str, Any]:
    # Default output: every declared write set to True, then overridden.
    out: dict[str, Any] = {path: True for path in node.writes}
    out.update({k: v for k, v in overrides.items() if k in node.writes})
    return out


def _document_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    schema = node.param("schema") or {}
    source = node.param("source", "form.request_text")
    text = str(ctx.fields.get(source, ""))
    extracted = extract_fields(text, schema)
    missing = [w for w in node.writes if w not in extracted]
    if missing:
        raise ExtractionFailedError(sorted(missing))
    return {k: v for k, v in extracted.items() if k in node.writes}


def _reasoning_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    # A consolidated node may fold extraction in ahead of its checks.
    extracted: dict[str, Any] = {}
    schema = node.param("schema")
    if schema:
        text = str(ctx.fields.get(node.param("source", "form.request_text"), ""))
        extracted = extract_fields(text, schema)
    visible = {**ctx.fields, **extracted}
    ruleset = resources.rulesets.get(node.param("ruleset", ""), RuleSet(id="empty"))
    report = check_fields(visible, ruleset)
    if not report.passed:
        codes = ",".join(v.code for v in report.violations if v.severity == "block")
        raise AgentFailure(f"checks failed: {codes}")
    flags = sorted(v.code for v in report.violations)
    out = _ok_writes(node)
    out.update({k: v for k, v in extracted.items() if k in node.writes})
    flag_field = node.param("flags_field")
    if flag_field and flag_field in node.writes:
        out[flag_field] = flags
    return out


def _authorization_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    amount = ctx.fields.get(node.param("amount_field", "request.amount"), "0")
    role = node.param("role", "clerk")
    decision = authorize(amount, role, resources.limits)
    if not decision.approved:
        raise EscalationRequired(decision.reason)
    return _ok_writes(node)


def _retrieval_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    query = str(ctx.fields.get(node.param("query_field", ""), ""))
    hits = retrieval_lookup(query, resources.event_log, k=int(node.param("k", 10)))
    out_field = node.param("out_field") or next(iter(sorted(node.writes)), None)
    out = _ok_writes(node)
    if out_field:
        out[out_field] = [render_narrative(e) for e in hits]
    return out


def _rag_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    out = _retrieval_adapter(node, ctx)
    return out


def _web_search_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    query = str(ctx.fields.get(node.param("query_field", ""), ""))
    titles = web_search(query, resources.search_corpus)
    out_field = node.param("out_field") or next(iter(sorted(node.writes)), None)
    out = _ok_writes(node)
    if out_field:
        out[out_field] = titles
    return out


def _data_analyst_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    metric = node.param("metric", "count")
    value = analyst_compute(metric, resources.event_log, node.param("field"))
    out_field = node.param("out_field") or next(iter(sorted(node.writes)), None)
    out = _ok_writes(node)
    if out_field:
        out[out_field] = value
    return out


def _api_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    bank = resources.bank
    endpoint = node.param("endpoint", "")
    fields = ctx.fields
    amount = fields.get(node.param("amount_field", "request.amount"), "0")
    account = str(fields.get(node.param("account_field", "request.src_account"), ""))

    if endpoint == "verify_account":
        if not bank.verify_account(account):
            raise AgentFailure(f"unknown account: {account}")
        return _ok_writes(node)
    if endpoint == "check_balance":
        if not bank.check_balance(account, amount):
            raise InsufficientFundsError(f"{account} cannot cover {amount}")
        return _ok_writes(node)
    if endpoint == "account_review":
        if not bank.verify_account(account):
            raise AgentFailure(f"unknown account: {account}")
        if not bank.check_balance(account, amount):
            raise InsufficientFundsError(f"{account} cannot cover {amount}")
        return _ok_writes(node)
    if endpoint == "debit":
        bank.debit(account, amount)
        return _ok_writes(node)
    if endpoint == "dispatch":
        ref = bank.dispatch(str(fields.get("request.dst_account", "")), amount)
        return _ok_writes(node, **{f: ref for f in node.writes})
    if endpoint == "payment":
        bank.debit(account, amount)
        ref = bank.dispatch(str(fields.get("request.dst_account", "")), amount)
        return _ok_writes(node, **{"payment.dispatched": ref})
    if endpoint == "voucher":
        ref = bank.voucher(str(fields.get(node.param("ref_field", "payment.dispatched"), "")))
        return _ok_writes(node, **{f: ref for f in node.writes})
    if endpoint == "archive":
        receipt = bank.archive(str(sorted(fields.items())))
        return _ok_writes(node, **{f: receipt for f in node.writes})
    if endpoint == "voucher_archive":
        ref = bank.voucher(str(fields.get("payment.dispatched", "")))
        receipt = bank.archive(ref)
        return _ok_writes(node, **{"voucher.id": ref, "archive.receipt_no": receipt})
    if endpoint == "disburse":
        bank.debit(account, amount)
        return _ok_writes(node, **{"payment.reference": bank.dispatch(account, amount)})
    if endpoint == "smart_settle":
        bank.debit(account, amount)
        ref = bank.dispatch(account, amount)
        return _ok_writes(
            node,
            **{"payment.reference": ref, "archive.tx_hash": bank.archive(ref)},
        )
    raise AgentFailure(f"unknown endpoint: {endpoint!r}")


def _risk_control_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    resources = ctx.resources or ScenarioResources()
    control = node.param("control", "checkpoint")
    if control == "aml_screen":
        party = str(ctx.fields.get(node.param("party_field", "request.counterparty"), ""))
        if party in resources.blacklist:
            raise EscalationRequired(f"counterparty listed: {party}")
        cert_field = node.param("cert_field") or next(iter(sorted(node.writes)), None)
        out = _ok_writes(node)
        if cert_field:
            out[cert_field] = f"aml-clear-{hashlib.sha256(party.encode()).hexdigest()[:8]}"
        return out
    if control == "purpose_verification":
        purpose = str(ctx.fields.get(node.param("purpose_field", "request.purpose"), ""))
        if resources.allowed_purposes and purpose not in resources.allowed_purposes:
            raise EscalationRequired(f"unrecognized purpose: {purpose}")
        return _ok_writes(node)
    return _ok_writes(node)


def _human_review_adapter(node: NodeSpec, ctx: AgentContext) -> dict[str, Any]:
    raise EscalationRequired(f"node {node.id} requires human review")


def standard_registry(resources: ScenarioResources) -> AgentRegistry:
    registry = AgentRegistry()
    registry.bind(AgentKind.DOCUMENT, _document_adapter)
    registry.bind(AgentKind.REASONING, _reasoning_adapter)
    registry.bind(AgentKind.AUTHORIZATION, _authorization_adapter)
    registry.bind(AgentKind.RETRIEVAL, _retrieval_adapter)
    registry.bind(AgentKind.RAG, _rag_adapter)
    registry.bind(AgentKind.WEB_SEARCH, _web_search_adapter)
    registry.bind(AgentKind.DATA_ANALYST, _data_analyst_adapter)
    registry.bind(AgentKind.API, _api_adapter, exclusive=True)
    registry.bind(AgentKind.RISK_CONTROL, _risk_control_adapter)
    registry.bind(AgentKind.HUMAN_REVIEW, _human_review_adapter)
    return registry
