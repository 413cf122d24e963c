"""Seeded synthetic data: historical event logs, document corpora with known
defect mixes, and on-disk scenario asset bundles.

Everything here is a pure function of (scenario, seed): regenerating with
the same seed yields byte-identical assets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from random import Random
from typing import Any

from .agents import RuleSet, check_fields, load_ruleset
from .errors import ScenarioAssetsMissingError
from .events import (
    Actor,
    Event5W3H1R,
    EventLog,
    Outcome,
    Quantity,
    ResultStatus,
    canonical_json,
    event_from_document,
    parse_timestamp,
)
from .scenarios import RULESETS, Scenario

_BASE_TS = parse_timestamp("2025-01-06T09:00:00.000Z")

# The reference event every narrative test leans on; always first in the
# wire log regardless of seed.
PINNED_FIRST_EVENT = Event5W3H1R(
    who=Actor("cust-17", "customer"),
    what="CurrentAccount.Balance",
    why="deposit",
    when_ms=_BASE_TS,
    how="fund_transfer",
    where="core-banking",
    how_much=Quantity(Decimal("100"), "USD"),
    how_long_ms=0,
    result=Outcome(ResultStatus.SUCCESS),
)

_OPS = (
    ("deposit", "fund_transfer", "CurrentAccount.Balance"),
    ("withdrawal", "atm", "CurrentAccount.Balance"),
    ("transfer", "fund_transfer", "SavingsAccount.Balance"),
    ("fee_collection", "batch_job", "CurrentAccount.Balance"),
)


def wire_event_log(seed: int = 42, size: int = 607) -> EventLog:
    rng = Random(f"wire-events:{seed}")
    events = [PINNED_FIRST_EVENT]
    ts = _BASE_TS
    for i in range(size - 1):
        ts += rng.randrange(30_000, 900_000)
        why, how, what = _OPS[rng.randrange(len(_OPS))]
        status = ResultStatus.FAILURE if rng.random() < 0.03 else ResultStatus.SUCCESS
        events.append(Event5W3H1R(
            who=Actor(f"cust-{rng.randrange(1, 41)}", "customer"),
            what=what,
            why=why,
            when_ms=ts,
            how=how,
            where="core-banking",
            how_much=Quantity(Decimal(rng.randrange(10, 5000)), "USD"),
            how_long_ms=0 if rng.random() < 0.8 else rng.randrange(5, 2000),
            result=Outcome(status),
            attributes=(("channel", rng.choice(["branch", "online", "mobile"])),),
        ))
    return EventLog(tuple(events), source=f"wire-events:{seed}")


def reimbursement_event_log(seed: int = 42, size: int = 250) -> EventLog:
    rng = Random(f"reimbursement-events:{seed}")
    events = []
    ts = _BASE_TS
    for i in range(size):
        ts += rng.randrange(600_000, 7_200_000)
        status = ResultStatus.FAILURE if rng.random() < 0.05 else ResultStatus.SUCCESS
        events.append(Event5W3H1R(
            who=Actor(f"emp-{rng.randrange(100, 400)}", "employee"),
            what="ExpenseLedger.Balance",
            why="reimbursement",
            when_ms=ts,
            how="expense_portal",
            where="erp",
            how_much=Quantity(Decimal(rng.randrange(20, 4000)), "USD"),
            how_long_ms=0,
            result=Outcome(status),
            attributes=(("category", rng.choice(
                ["travel", "meals", "supplies", "training"]
            )),),
        ))
    return EventLog(tuple(events), source=f"reimbursement-events:{seed}")


def event_log_for(scenario: Scenario, seed: int = 42) -> EventLog:
    if scenario.name == "wire_transfer":
        return wire_event_log(seed, scenario.event_log_size)
    return reimbursement_event_log(seed, scenario.event_log_size)


# --- document corpora ----------------------------------------------------

def _clean_reimbursement(rng: Random, i: int) -> dict[str, Any]:
    return {
        "claim.amount": str(rng.randrange(25, 4900)),
        "claim.currency": rng.choice(["USD", "EUR"]),
        "claim.employee": f"emp-{rng.randrange(100, 400)}",
        "claim.category": rng.choice(["travel", "meals", "supplies"]),
        "claim.tax_id": f"TX-{rng.randrange(100000, 999999)}",
        "claim.receipt_id": f"rcpt-{i:05d}",
        "claim.date": f"2025-{rng.randrange(1, 12):02d}-{rng.randrange(1, 29):02d}",
    }


def _clean_wire(rng: Random, i: int) -> dict[str, Any]:
    return {
        "request.amount": str(rng.randrange(50, 9500)),
        "request.counterparty": rng.choice(
            ["Globex Trading", "Initech GmbH", "Stark Supply Co", "Wayne Logistics"]
        ),
        "request.customer_id": f"cust-{rng.randrange(1, 200)}",
    }


def _apply_defect(fields: dict[str, Any], defect: str, rng: Random) -> None:
    if defect == "missing_tax_id":
        fields["claim.tax_id"] = ""
    elif defect == "bad_tax_id":
        fields["claim.tax_id"] = rng.choice(["TX-12AB", "TAX-99", "TX-12345"])
    elif defect == "over_limit":
        fields["claim.amount"] = str(rng.randrange(5001, 20000))
    elif defect == "future_date":
        fields["claim.date"] = f"2026-{rng.randrange(1, 12):02d}-15"
    elif defect == "wrong_currency":
        fields["claim.currency"] = rng.choice(["BTC", "XAU", "ZZZ"])
    elif defect == "listed_counterparty":
        fields["request.counterparty"] = rng.choice(
            ["Shadow Imports LLC", "Volkov Partners"]
        )
    elif defect == "bad_customer_id":
        fields["request.customer_id"] = rng.choice(["client-77", "CUST17", "c-9"])
    elif defect == "aml_limit":
        fields["request.amount"] = str(rng.randrange(10001, 90000))
    elif defect == "unknown_anomaly":
        pass  # looks clean; nothing rule-detectable about it
    else:
        raise ValueError(f"unknown defect class: {defect}")


def invoice_corpus(scenario: Scenario, seed: int = 42) -> list[dict[str, Any]]:
    """size records, each {"fields": ..., "defect": code-or-None}, with the
    scenario's exact defect counts shuffled through the corpus."""
    plan = scenario.corpus
    rng = Random(f"corpus:{scenario.name}:{seed}")
    labels: list[str | None] = []
    for code, count in plan.defects:
        labels.extend([code] * count)
    labels.extend([None] * (plan.size - len(labels)))
    rng.shuffle(labels)
    clean = _clean_wire if scenario.name == "wire_transfer" else _clean_reimbursement
    records = []
    for i, label in enumerate(labels):
        fields = clean(rng, i)
        if label is not None:
            _apply_defect(fields, label, rng)
        records.append({"fields": fields, "defect": label})
    return records


@dataclass(frozen=True)
class CorpusEvaluation:
    total: int
    defective: int
    caught: int
    error_rate: Fraction

    @property
    def missed(self) -> int:
        return self.defective - self.caught


def evaluate_corpus(records: list[dict[str, Any]], ruleset: RuleSet) -> CorpusEvaluation:
    """Error rate: share of the corpus whose defect slips past the checks."""
    defective = caught = 0
    for record in records:
        if record["defect"] is None:
            continue
        defective += 1
        if not check_fields(record["fields"], ruleset).passed:
            caught += 1
    total = len(records)
    missed = defective - caught
    return CorpusEvaluation(
        total=total,
        defective=defective,
        caught=caught,
        error_rate=Fraction(missed, total) if total else Fraction(0),
    )


def corpus_error_rates(scenario: Scenario, seed: int = 42) -> tuple[Fraction, Fraction]:
    """(baseline, optimized) error rates for the scenario's corpus."""
    records = invoice_corpus(scenario, seed)
    plan = scenario.corpus
    before = evaluate_corpus(records, load_ruleset(RULESETS[plan.baseline_ruleset]))
    after = evaluate_corpus(records, load_ruleset(RULESETS[plan.optimized_ruleset]))
    return before.error_rate, after.error_rate


# --- on-disk asset bundles ----------------------------------------------

ASSET_FILES = (
    "baseline.json",
    "optimizer.json",
    "inputs.json",
    "events.jsonl",
    "corpus.jsonl",
)


def write_scenario_assets(scenario: Scenario, directory: str | Path, seed: int = 42) -> Path:
    """Materialize everything a run needs under directory/<scenario name>."""
    root = Path(directory) / scenario.name
    root.mkdir(parents=True, exist_ok=True)
    (root / "baseline.json").write_text(
        json.dumps(scenario.baseline_doc, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (root / "optimizer.json").write_text(
        json.dumps(scenario.optimizer_doc, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (root / "inputs.json").write_text(
        json.dumps(scenario.run_inputs, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    log = event_log_for(scenario, seed)
    (root / "events.jsonl").write_text(
        "".join(canonical_json(e) + "\n" for e in log), encoding="utf-8"
    )
    records = invoice_corpus(scenario, seed)
    (root / "corpus.jsonl").write_text(
        "".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
            for r in records
        ),
        encoding="utf-8",
    )
    return root


def load_asset_events(path: str | Path) -> EventLog:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(event_from_document(json.loads(line)))
    return EventLog(tuple(events), source=str(path))


def require_assets(directory: str | Path, scenario_name: str) -> Path:
    root = Path(directory) / scenario_name
    missing = [name for name in ASSET_FILES if not (root / name).exists()]
    if missing:
        raise ScenarioAssetsMissingError(
            f"scenario {scenario_name} assets missing under {root}: "
            + ", ".join(missing)
        )
    return root
