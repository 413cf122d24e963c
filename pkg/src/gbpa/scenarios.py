"""The two built-in case studies: an interbank wire transfer and an expense
reimbursement, each as a serial baseline spec plus the optimizer config that
restructures it.

All durations are milliseconds. The baselines are deliberately sequential;
everything parallel in the optimized forms is derived, not declared.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Any

from .agents import (
    LimitTable,
    MockBank,
    ScenarioResources,
    load_blacklist,
    load_limits,
    load_ruleset,
)
from .events import EventLog
from .process_spec import ProcessSpec, parse_spec

_SEC = 1000
_MIN = 60 * _SEC
_HOUR = 60 * _MIN

BLACKLIST_TEXT = """\
# Counterparties barred from settlement.
Shadow Imports LLC
Volkov Partners
"""

ACCOUNTS = {
    "acct-001": "50000",
    "acct-123": "8000",
    "corp-payroll": "250000",
}

LIMITS = {
    "payments_officer": "10000",
    "manager": "25000",
    "finance_controller": "50000",
    "dual": "10000",
}

ALLOWED_PURPOSES = ("invoice-payment", "payroll", "supplier-payment")

_BLACKLIST_ENTRIES = ["Shadow Imports LLC", "Volkov Partners"]

RULESETS: dict[str, dict[str, Any]] = {
    "counterparty_screen": {
        "id": "counterparty_screen",
        "rules": [
            {"id": "CPTY-001", "field": "request.counterparty", "check": "not_in",
             "value": _BLACKLIST_ENTRIES, "code": "listed_counterparty"},
        ],
    },
    "identity_format": {
        "id": "identity_format",
        "rules": [
            {"id": "ID-001", "field": "request.customer_id", "check": "pattern",
             "value": r"cust-\d+", "code": "bad_customer_id"},
        ],
    },
    "aml_review": {
        "id": "aml_review",
        "rules": [
            {"id": "AML-001", "field": "request.amount", "check": "lte",
             "value": "10000", "code": "aml_limit"},
        ],
    },
    "wire_compliance": {
        "id": "wire_compliance",
        "rules": [
            {"id": "CPTY-001", "field": "request.counterparty", "check": "not_in",
             "value": _BLACKLIST_ENTRIES, "code": "listed_counterparty"},
            {"id": "AML-001", "field": "request.amount", "check": "lte",
             "value": "10000", "code": "aml_limit"},
        ],
    },
    "wire_screen_full": {
        "id": "wire_screen_full",
        "rules": [
            {"id": "CPTY-001", "field": "request.counterparty", "check": "not_in",
             "value": _BLACKLIST_ENTRIES, "code": "listed_counterparty"},
            {"id": "ID-001", "field": "request.customer_id", "check": "pattern",
             "value": r"cust-\d+", "code": "bad_customer_id"},
            {"id": "AML-001", "field": "request.amount", "check": "lte",
             "value": "10000", "code": "aml_limit"},
        ],
    },
    # The manual baseline applies no automated validation at all.
    "reimbursement_baseline": {"id": "reimbursement_baseline", "rules": []},
    "reimbursement_auto": {
        "id": "reimbursement_auto",
        "rules": [
            {"id": "TAX-001", "field": "claim.tax_id", "check": "present",
             "code": "missing_tax_id"},
            {"id": "TAX-002", "field": "claim.tax_id", "check": "pattern",
             "value": r"TX-\d{6}", "code": "bad_tax_id"},
            {"id": "LIM-001", "field": "claim.amount", "check": "lte",
             "value": "5000", "code": "over_limit"},
            {"id": "DATE-001", "field": "claim.date", "check": "lte",
             "value": "2025-12-31", "code": "future_date"},
            {"id": "CCY-001", "field": "claim.currency", "check": "in",
             "value": ["USD", "EUR"], "code": "wrong_currency"},
        ],
    },
}


@dataclass(frozen=True)
class CorpusPlan:
    """Synthetic document corpus used to score validation quality: which
    defect classes exist, how many of each, and which rulesets to compare."""

    size: int
    defects: tuple[tuple[str, int], ...]
    baseline_ruleset: str
    optimized_ruleset: str


@dataclass(frozen=True)
class Scenario:
    name: str
    title: str
    baseline_doc: dict[str, Any]
    optimizer_doc: dict[str, Any]
    run_inputs: dict[str, Any]
    corpus: CorpusPlan
    event_log_size: int

    def baseline_spec(self) -> ProcessSpec:
        return parse_spec(self.baseline_doc)


def build_resources(event_log: EventLog | None = None) -> ScenarioResources:
    """Shared resource bundle: bank, rulesets, limits, screening lists."""
    return ScenarioResources(
        bank=MockBank({k: Decimal(v) for k, v in ACCOUNTS.items()}),
        rulesets={name: load_ruleset(doc) for name, doc in RULESETS.items()},
        limits=load_limits(LIMITS),
        blacklist=load_blacklist(BLACKLIST_TEXT),
        event_log=event_log or EventLog(()),
        search_corpus=(
            ("Settlement cut-off times", "wire settlement cut-off is 17:00 UTC"),
            ("AML screening procedure", "counterparty screening against the barred list"),
            ("Expense policy", "reimbursement claims require a tax id and receipt"),
        ),
        allowed_purposes=frozenset(ALLOWED_PURPOSES),
    )


WIRE_REQUEST_TEXT = (
    "amount: 2500\n"
    "currency: USD\n"
    "src_account: acct-001\n"
    "dst_account: acct-900\n"
    "counterparty: Globex Trading\n"
    "customer_id: cust-17\n"
    "purpose: invoice-payment"
)


def wire_scenario() -> Scenario:
    baseline = {
        "id": "wire-transfer-baseline",
        "version": "1",
        "nodes": [
            {
                "id": "intake_request", "agent_kind": "document",
                "reads": ["form.request_text"],
                "writes": [
                    "request.amount", "request.src_account", "request.dst_account",
                    "request.counterparty", "request.customer_id", "request.purpose",
                ],
                "duration": 60 * _SEC,
                "params": {
                    "source": "form.request_text",
                    "schema": {
                        "request.amount": "amount",
                        "request.src_account": "src_account",
                        "request.dst_account": "dst_account",
                        "request.counterparty": "counterparty",
                        "request.customer_id": "customer_id",
                        "request.purpose": "purpose",
                    },
                },
            },
            {
                "id": "blacklist_screen_a", "agent_kind": "reasoning",
                "reads": ["request.counterparty"], "writes": ["screen.blacklist_ok"],
                "duration": 15 * _SEC, "merge_key": "blacklist",
                "params": {"ruleset": "counterparty_screen"},
            },
            {
                # Identical screening re-run later in the chain.
                "id": "blacklist_screen_b", "agent_kind": "reasoning",
                "reads": ["request.counterparty"], "writes": ["screen.recheck_ok"],
                "duration": 15 * _SEC, "merge_key": "blacklist",
                "params": {"ruleset": "counterparty_screen"},
            },
            {
                "id": "account_verification", "agent_kind": "api",
                "reads": ["request.src_account"], "writes": ["account.active"],
                "duration": 15 * _SEC,
                "params": {"endpoint": "verify_account",
                           "account_field": "request.src_account"},
            },
            {
                "id": "balance_check", "agent_kind": "api",
                "reads": ["account.active", "request.amount"],
                "writes": ["account.funds_ok"],
                "duration": 15 * _SEC,
                "params": {"endpoint": "check_balance",
                           "account_field": "request.src_account",
                           "amount_field": "request.amount"},
            },
            {
                "id": "identity_check_a", "agent_kind": "reasoning",
                "reads": ["request.customer_id"], "writes": ["identity.verified"],
                "duration": 45 * _SEC, "merge_key": "identity",
                "params": {"ruleset": "identity_format"},
            },
            {
                "id": "identity_check_b", "agent_kind": "reasoning",
                "reads": ["request.customer_id"], "writes": ["identity.recheck_ok"],
                "duration": 30 * _SEC, "merge_key": "identity",
                "params": {"ruleset": "identity_format"},
            },
            {
                "id": "compliance_review", "agent_kind": "reasoning",
                "reads": ["screen.blacklist_ok", "request.amount"],
                "writes": ["screen.aml_clear"],
                "duration": 130 * _SEC,
                "params": {"ruleset": "aml_review"},
            },
            {
                "id": "limit_authorization", "agent_kind": "authorization",
                "reads": ["request.amount", "identity.verified"],
                "writes": ["auth.approved"],
                "duration": 305 * _SEC,
                "params": {"amount_field": "request.amount",
                           "role": "payments_officer"},
            },
            {
                "id": "transaction_processing", "agent_kind": "api",
                "reads": ["auth.approved", "screen.aml_clear", "account.funds_ok",
                          "request.src_account", "request.amount"],
                "writes": ["payment.debited"],
                "duration": 90 * _SEC, "effectful": True,
                "params": {"endpoint": "debit",
                           "account_field": "request.src_account",
                           "amount_field": "request.amount"},
            },
            {
                "id": "correspondent_dispatch", "agent_kind": "api",
                "reads": ["payment.debited", "request.dst_account"],
                "writes": ["payment.dispatched"],
                "duration": 60 * _SEC, "effectful": True,
                "params": {"endpoint": "dispatch",
                           "amount_field": "request.amount"},
            },
            {
                "id": "voucher_generation", "agent_kind": "api",
                "reads": ["payment.dispatched", "request.amount"],
                "writes": ["voucher.id"],
                "duration": 60 * _SEC,
                "params": {"endpoint": "voucher",
                           "ref_field": "payment.dispatched"},
            },
            {
                "id": "record_archival", "agent_kind": "api",
                "reads": ["voucher.id"], "writes": ["archive.receipt_no"],
                "duration": 60 * _SEC,
                "params": {"endpoint": "archive"},
            },
        ],
        "edges": [
            ["intake_request", "blacklist_screen_a"],
            ["blacklist_screen_a", "blacklist_screen_b"],
            ["blacklist_screen_b", "account_verification"],
            ["account_verification", "balance_check"],
            ["balance_check", "identity_check_a"],
            ["identity_check_a", "identity_check_b"],
            ["identity_check_b", "compliance_review"],
            ["compliance_review", "limit_authorization"],
            ["limit_authorization", "transaction_processing"],
            ["transaction_processing", "correspondent_dispatch"],
            ["correspondent_dispatch", "voucher_generation"],
            ["voucher_generation", "record_archival"],
        ],
        "metadata": {"inputs": ["form.request_text"]},
    }
    optimizer = {
        "consolidations": [
            {
                "id": "account_review", "agent_kind": "api",
                "members": ["account_verification", "balance_check"],
                "duration": 30 * _SEC,
                "params": {"endpoint": "account_review",
                           "account_field": "request.src_account",
                           "amount_field": "request.amount"},
            },
            {
                "id": "compliance_screening", "agent_kind": "reasoning",
                "members": ["blacklist_screen_a", "compliance_review"],
                "duration": 150 * _SEC,
                "params": {"ruleset": "wire_compliance"},
            },
            {
                "id": "identity_verification", "agent_kind": "reasoning",
                "members": ["identity_check_a"],
                "duration": 60 * _SEC,
                "params": {"ruleset": "identity_format"},
            },
            {
                # Same node, tighter service target once checks are parallel.
                "id": "limit_authorization", "agent_kind": "authorization",
                "members": ["limit_authorization"],
                "duration": 60 * _SEC,
                "params": {"amount_field": "request.amount",
                           "role": "payments_officer"},
            },
            {
                "id": "payment_execution", "agent_kind": "api",
                "members": ["transaction_processing", "correspondent_dispatch"],
                "duration": 150 * _SEC,
                "params": {"endpoint": "payment",
                           "account_field": "request.src_account",
                           "amount_field": "request.amount"},
            },
            {
                "id": "voucher_archive", "agent_kind": "api",
                "members": ["voucher_generation", "record_archival"],
                "duration": 120 * _SEC,
                "params": {"endpoint": "voucher_archive"},
            },
        ],
        "risk_policies": [
            {
                "name": "aml_screening",
                "trigger": {"agent_kind": "document"},
                "placement": "after",
                "template": {
                    "id": "aml_screen",
                    "reads": ["request.counterparty", "request.amount"],
                    "writes": ["screen.aml_certificate"],
                    "duration": 30 * _SEC,
                    "params": {"control": "aml_screen",
                               "party_field": "request.counterparty",
                               "cert_field": "screen.aml_certificate"},
                },
            },
            {
                "name": "purpose_verification",
                "trigger": {"effectful": True},
                "placement": "before",
                "template": {
                    "id": "purpose_verification",
                    "reads": ["request.purpose", "screen.aml_certificate"],
                    "writes": ["purpose.confirmed"],
                    "duration": 45 * _SEC,
                    "params": {"control": "purpose_verification",
                               "purpose_field": "request.purpose"},
                },
            },
        ],
    }
    return Scenario(
        name="wire_transfer",
        title="Interbank wire transfer",
        baseline_doc=baseline,
        optimizer_doc=optimizer,
        run_inputs={"form.request_text": WIRE_REQUEST_TEXT},
        corpus=CorpusPlan(
            size=607,
            defects=(
                ("listed_counterparty", 9),
                ("bad_customer_id", 5),
                ("aml_limit", 2),
                ("unknown_anomaly", 3),
            ),
            baseline_ruleset="wire_screen_full",
            optimized_ruleset="wire_screen_full",
        ),
        event_log_size=607,
    )


REIMBURSEMENT_RECEIPT_TEXT = (
    "amount: 1840\n"
    "currency: USD\n"
    "employee: emp-204\n"
    "category: travel\n"
    "tax_id: TX-482915\n"
    "receipt_id: rcpt-7741\n"
    "date: 2025-11-04"
)


def reimbursement_scenario() -> Scenario:
    baseline = {
        "id": "reimbursement-baseline",
        "version": "1",
        "nodes": [
            {
                "id": "claim_submission", "agent_kind": "document",
                "reads": ["form.receipt_text"],
                "writes": ["claim.amount", "claim.employee", "claim.category",
                           "claim.tax_id", "claim.receipt_id", "claim.date"],
                "duration": 5 * _MIN,
                "params": {
                    "source": "form.receipt_text",
                    "schema": {
                        "claim.amount": "amount",
                        "claim.employee": "employee",
                        "claim.category": "category",
                        "claim.tax_id": "tax_id",
                        "claim.receipt_id": "receipt_id",
                        "claim.date": "date",
                    },
                },
            },
            {
                "id": "invoice_validation", "agent_kind": "reasoning",
                "reads": ["claim.amount", "claim.tax_id", "claim.receipt_id",
                          "claim.date"],
                "writes": ["validation.ok", "validation.flags"],
                "duration": 8 * _MIN, "risk_control": True,
                "params": {"ruleset": "reimbursement_baseline",
                           "flags_field": "validation.flags"},
            },
            {
                "id": "manager_approval", "agent_kind": "authorization",
                "reads": ["claim.amount", "claim.employee", "claim.category"],
                "writes": ["approval.manager"],
                "duration": 16 * _HOUR, "merge_key": "approval",
                "params": {"amount_field": "claim.amount", "role": "manager"},
            },
            {
                "id": "finance_approval", "agent_kind": "authorization",
                "reads": ["claim.amount", "claim.employee", "claim.category"],
                "writes": ["approval.finance"],
                "duration": 8 * _HOUR, "merge_key": "approval",
                "params": {"amount_field": "claim.amount",
                           "role": "finance_controller"},
            },
            {
                "id": "payment_disbursement", "agent_kind": "api",
                "reads": ["approval.manager", "approval.finance", "validation.ok",
                          "claim.amount", "claim.employee"],
                "writes": ["payment.paid", "payment.reference"],
                "duration": 2 * _MIN, "effectful": True,
                "params": {"endpoint": "disburse",
                           "account_field": "form.payout_account",
                           "amount_field": "claim.amount"},
            },
        ],
        "edges": [
            ["claim_submission", "invoice_validation"],
            ["invoice_validation", "manager_approval"],
            ["manager_approval", "finance_approval"],
            ["finance_approval", "payment_disbursement"],
        ],
        "metadata": {
            "inputs": ["form.amount", "form.category", "form.employee",
                       "form.payout_account", "form.receipt_text"],
        },
    }
    optimizer = {
        "consolidations": [
            {
                "id": "pre_audit", "agent_kind": "reasoning",
                "members": ["claim_submission", "invoice_validation"],
                "duration": 30 * _MIN, "risk_control": True,
                "writes": ["claim.amount", "claim.employee", "claim.category",
                           "claim.tax_id", "claim.receipt_id", "claim.date",
                           "claim.currency", "validation.ok", "validation.flags"],
                "params": {
                    "ruleset": "reimbursement_auto",
                    "flags_field": "validation.flags",
                    "source": "form.receipt_text",
                    "schema": {
                        "claim.amount": "amount",
                        "claim.currency": "currency",
                        "claim.employee": "employee",
                        "claim.category": "category",
                        "claim.tax_id": "tax_id",
                        "claim.receipt_id": "receipt_id",
                        "claim.date": "date",
                    },
                },
            },
            {
                "id": "dual_approval", "agent_kind": "authorization",
                "members": ["finance_approval"],
                "duration": 4 * _HOUR, "risk_control": True,
                "reads": ["form.amount", "form.category", "form.employee"],
                "params": {"amount_field": "form.amount", "role": "dual"},
            },
            {
                "id": "smart_contract_payment", "agent_kind": "api",
                "members": ["payment_disbursement"],
                "duration": 15 * _MIN, "risk_control": True,
                "writes": ["payment.paid", "payment.reference", "archive.tx_hash"],
                "params": {"endpoint": "smart_settle",
                           "account_field": "form.payout_account",
                           "amount_field": "form.amount"},
            },
        ],
        "risk_policies": [
            {
                "name": "pre_transfer_audit",
                "trigger": {"effectful": True},
                "placement": "before",
                "template": {
                    "id": "transfer_audit",
                    "reads": ["validation.ok"],
                    "writes": ["audit.cleared"],
                    "duration": 5 * _MIN,
                    "params": {"control": "checkpoint"},
                },
            },
            {
                "name": "post_transfer_archive",
                "trigger": {"effectful": True},
                "placement": "after",
                "template": {
                    "id": "transfer_archive",
                    "reads": ["payment.reference"],
                    "writes": ["archive.audit_copy"],
                    "duration": 5 * _MIN,
                    "params": {"control": "checkpoint"},
                },
            },
        ],
    }
    return Scenario(
        name="reimbursement",
        title="Expense reimbursement",
        baseline_doc=baseline,
        optimizer_doc=optimizer,
        run_inputs={
            "form.receipt_text": REIMBURSEMENT_RECEIPT_TEXT,
            "form.amount": "1840",
            "form.employee": "emp-204",
            "form.category": "travel",
            "form.payout_account": "corp-payroll",
        },
        corpus=CorpusPlan(
            size=1000,
            defects=(
                ("missing_tax_id", 30),
                ("bad_tax_id", 28),
                ("over_limit", 25),
                ("future_date", 20),
                ("wrong_currency", 15),
                ("unknown_anomaly", 8),
            ),
            baseline_ruleset="reimbursement_baseline",
            optimized_ruleset="reimbursement_auto",
        ),
        event_log_size=250,
    )


_SCENARIOS = {
    "wire_transfer": wire_scenario,
    "reimbursement": reimbursement_scenario,
}


def scenario_names() -> list[str]:
    return sorted(_SCENARIOS)


def get_scenario(name: str) -> Scenario:
    if name not in _SCENARIOS:
        raise KeyError(f"unknown scenario: {name}; have {', '.join(scenario_names())}")
    return _SCENARIOS[name]()
