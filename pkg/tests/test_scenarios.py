"""The two case studies: frozen structure, timings, and corpus quality."""
from __future__ import annotations

from fractions import Fraction

import pytest

from gbpa.engine import build_graph, execute
from gbpa.events import render_narrative
from gbpa.fixtures import (
    PINNED_FIRST_EVENT,
    corpus_error_rates,
    event_log_for,
    invoice_corpus,
    write_scenario_assets,
)
from gbpa.optimizer import OptimizerConfig, estimate_makespan, merge_redundant, optimize
from gbpa.scenarios import build_resources, get_scenario, scenario_names


def test_scenario_registry():
    assert scenario_names() == ["reimbursement", "wire_transfer"]
    with pytest.raises(KeyError, match="unknown scenario"):
        get_scenario("mortgage")


# --- wire transfer --------------------------------------------------------

WIRE = get_scenario("wire_transfer")
WIRE_REPORT = optimize(WIRE.baseline_spec(), OptimizerConfig.from_doc(WIRE.optimizer_doc))


def test_wire_baseline_is_a_13_node_chain():
    spec = WIRE.baseline_spec()
    assert len(spec.nodes) == 13
    assert len(spec.edges) == 12
    assert build_graph(spec).stages == tuple((n,) for n in spec.node_ids)
    assert estimate_makespan(spec) == 900_000
    assert sum(n.risk_control for n in spec.nodes) == 0


def test_wire_merges_both_duplicate_screens():
    merged, records = merge_redundant(WIRE.baseline_spec())
    assert [(r.survivor, r.absorbed) for r in records] == [
        ("blacklist_screen_a", ("blacklist_screen_b",)),
        ("identity_check_a", ("identity_check_b",)),
    ]
    assert len(merged.nodes) == 11


def test_wire_optimized_layout():
    after = WIRE_REPORT.after
    assert len(after.nodes) == 9
    assert build_graph(after).stages == (
        ("intake_request",),
        ("account_review", "aml_screen", "compliance_screening",
         "identity_verification"),
        ("limit_authorization", "purpose_verification"),
        ("payment_execution",),
        ("voucher_archive",),
    )
    assert WIRE_REPORT.inserted == ("aml_screen", "purpose_verification")
    assert sum(n.risk_control for n in after.nodes) == 2


def test_wire_makespan_and_wait_estimates():
    assert WIRE_REPORT.makespan_before_ms == 900_000
    assert WIRE_REPORT.makespan_after_ms == 540_000
    assert WIRE_REPORT.wait_before_ms == 490_000
    assert WIRE_REPORT.wait_after_ms == 210_000


def test_wire_runs_complete_with_payment_artifacts():
    resources = build_resources(event_log_for(WIRE))
    base = execute(WIRE.baseline_spec(), WIRE.run_inputs, seed=42,
                   resources=resources)
    assert base.run_id == "run-f09096574124"
    assert base.makespan_ms == 900_000
    assert base.fields["archive.receipt_no"]
    fresh = build_resources(event_log_for(WIRE))
    optimized = execute(WIRE_REPORT.after, WIRE.run_inputs, seed=42,
                        resources=fresh)
    assert optimized.makespan_ms == 540_000
    assert optimized.fields["screen.aml_certificate"]
    assert optimized.fields["purpose.confirmed"]


def test_wire_corpus_rates_match_defect_plan():
    before, after = corpus_error_rates(WIRE)
    # 19 defective documents; only the 3 unlabeled anomalies slip through.
    assert before == after == Fraction(3, 607)


# --- reimbursement --------------------------------------------------------

REIMB = get_scenario("reimbursement")
REIMB_REPORT = optimize(
    REIMB.baseline_spec(), OptimizerConfig.from_doc(REIMB.optimizer_doc))


def test_reimbursement_baseline_shape():
    spec = REIMB.baseline_spec()
    assert len(spec.nodes) == 5
    assert estimate_makespan(spec) == 87_300_000
    assert sum(n.risk_control for n in spec.nodes) == 1


def test_reimbursement_merges_the_approval_pair():
    _, records = merge_redundant(REIMB.baseline_spec())
    assert [(r.survivor, r.absorbed) for r in records] == [
        ("finance_approval", ("manager_approval",)),
    ]


def test_reimbursement_optimized_layout():
    after = REIMB_REPORT.after
    assert after.node_ids == ["pre_audit", "dual_approval", "smart_contract_payment"]
    assert build_graph(after).stages == (
        ("dual_approval", "pre_audit"),
        ("smart_contract_payment",),
    )
    # Guards ride in with the consolidations, so the policy pass adds none.
    assert REIMB_REPORT.inserted == ()
    assert sum(n.risk_control for n in after.nodes) == 3


def test_reimbursement_makespan_and_wait_estimates():
    assert REIMB_REPORT.makespan_before_ms == 87_300_000
    assert REIMB_REPORT.makespan_after_ms == 15_300_000
    assert REIMB_REPORT.wait_before_ms == 58_560_000
    assert REIMB_REPORT.wait_after_ms == 0


def test_reimbursement_runs_complete():
    base = execute(REIMB.baseline_spec(), REIMB.run_inputs, seed=42,
                   resources=build_resources(event_log_for(REIMB)))
    assert base.run_id == "run-4ce8572d0004"
    assert base.makespan_ms == 87_300_000
    assert base.fields["payment.reference"]
    optimized = execute(REIMB_REPORT.after, REIMB.run_inputs, seed=42,
                        resources=build_resources(event_log_for(REIMB)))
    assert optimized.makespan_ms == 15_300_000
    assert optimized.fields["archive.tx_hash"]


def test_reimbursement_corpus_rates():
    before, after = corpus_error_rates(REIMB)
    assert before == Fraction(126, 1000)
    assert after == Fraction(8, 1000)


# --- synthetic data -------------------------------------------------------

def test_event_logs_are_sized_and_pinned():
    wire_log = event_log_for(WIRE)
    assert len(wire_log) == 607
    first = next(iter(wire_log))
    assert first == PINNED_FIRST_EVENT
    assert render_narrative(first) == (
        "customer cust-17 performed deposit via fund_transfer, updating "
        "CurrentAccount.Balance, in real-time, result: success 100 USD"
    )
    assert len(event_log_for(REIMB)) == 250


def test_corpus_defect_counts_match_plan():
    for scenario in (WIRE, REIMB):
        records = invoice_corpus(scenario)
        assert len(records) == scenario.corpus.size
        by_code: dict[str | None, int] = {}
        for record in records:
            by_code[record["defect"]] = by_code.get(record["defect"], 0) + 1
        for code, count in scenario.corpus.defects:
            assert by_code[code] == count, code


def test_assets_regenerate_byte_identically(tmp_path):
    first = write_scenario_assets(WIRE, tmp_path / "one")
    second = write_scenario_assets(WIRE, tmp_path / "two")
    for name in ("baseline.json", "optimizer.json", "inputs.json",
                 "events.jsonl", "corpus.jsonl"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
