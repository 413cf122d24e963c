"""Simulation harness: run a scenario baseline and its optimized form under
virtual time, score both, and render the before/after comparison.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, TextIO

from .agents import load_ruleset
from .clock import SimulatedClock
from .engine import RunResult, derive_run_id, execute
from .errors import ScenarioMismatchError
from .fixtures import (
    corpus_error_rates,
    evaluate_corpus,
    event_log_for,
    invoice_corpus,
    load_asset_events,
    require_assets,
)
from .optimizer import OptimizationReport, OptimizerConfig, optimize
from .process_spec import AgentKind, Lognormal, ProcessSpec, parse_spec
from .scenarios import RULESETS, Scenario, build_resources, get_scenario


# A desk day is 9.6 hours: a 48 hour week over five days. Durations past a
# single day render in desk days, not wall days.
_BUSINESS_DAY_MS = int(9.6 * 3600 * 1000)


def _trim(value: float, places: int) -> str:
    text = f"{value:.{places}f}"
    return text.rstrip("0").rstrip(".") if "." in text else text


def format_duration_ms(ms: float) -> str:
    minutes = ms / 60_000
    if minutes < 60:
        return f"{_trim(minutes, 1)} min"
    hours = minutes / 60
    if hours <= 24:
        return f"{_trim(hours, 2)} hrs"
    return f"{_trim(ms / _BUSINESS_DAY_MS, 1)} days"


def format_percent_change(before: float, after: float) -> str:
    """Signed whole-percent change, halves rounded away from zero."""
    if before == 0:
        return "0%"
    change = (after - before) / before * 100.0
    n = int(Decimal(str(change)).quantize(Decimal("1"), rounding=ROUND_HALF_UP))
    return f"{n:+d}%" if n else "0%"


def format_rate(rate: Fraction) -> str:
    return f"{float(rate) * 100:.1f}%"


def _approval_ms(spec: ProcessSpec) -> float:
    total = 0.0
    for node in spec.nodes:
        if node.agent_kind == AgentKind.AUTHORIZATION:
            if isinstance(node.duration, Lognormal):
                continue
            total += node.duration
    return total


@dataclass(frozen=True)
class SimulationResult:
    scenario: Scenario
    seed: int
    report: OptimizationReport
    baseline_run: RunResult
    optimized_run: RunResult
    error_rate_before: Fraction
    error_rate_after: Fraction

    @property
    def approval_before_ms(self) -> float:
        return _approval_ms(self.report.before)

    @property
    def approval_after_ms(self) -> float:
        return _approval_ms(self.report.after)


def _all_fixed_durations(spec: ProcessSpec) -> bool:
    return all(not isinstance(n.duration, Lognormal) for n in spec.nodes)


def run_scenario(
    scenario: Scenario | str,
    seed: int = 42,
    assets_dir: str | Path | None = None,
    audit_sink=None,
) -> SimulationResult:
    """Execute baseline and optimized runs under virtual clocks.

    With assets_dir, all inputs come from the bundle on disk (missing files
    are an error); otherwise assets are generated in memory from the seed.
    """
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)

    if assets_dir is not None:
        root = require_assets(assets_dir, scenario.name)
        baseline_doc = json.loads((root / "baseline.json").read_text(encoding="utf-8"))
        optimizer_doc = json.loads((root / "optimizer.json").read_text(encoding="utf-8"))
        inputs = json.loads((root / "inputs.json").read_text(encoding="utf-8"))
        event_log = load_asset_events(root / "events.jsonl")
        corpus = [
            json.loads(line)
            for line in (root / "corpus.jsonl").read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        plan = scenario.corpus
        rate_before = evaluate_corpus(
            corpus, load_ruleset(RULESETS[plan.baseline_ruleset])
        ).error_rate
        rate_after = evaluate_corpus(
            corpus, load_ruleset(RULESETS[plan.optimized_ruleset])
        ).error_rate
    else:
        baseline_doc = scenario.baseline_doc
        optimizer_doc = scenario.optimizer_doc
        inputs = scenario.run_inputs
        event_log = event_log_for(scenario, seed)
        rate_before, rate_after = corpus_error_rates(scenario, seed)

    spec = parse_spec(baseline_doc)
    config = OptimizerConfig.from_doc(optimizer_doc)
    report = optimize(spec, config)

    baseline_run = execute(
        spec, inputs, seed=seed,
        resources=build_resources(event_log), clock=SimulatedClock(),
        audit_sink=audit_sink,
    )
    # The optimized spec keeps the baseline's id, so salt the derived run id;
    # otherwise the two trails collide in a shared audit sink.
    optimized_run = execute(
        report.after, inputs, seed=seed,
        run_id=derive_run_id(f"{spec.id}:optimized", seed),
        resources=build_resources(event_log), clock=SimulatedClock(),
        audit_sink=audit_sink,
    )

    # With fixed durations the engine must land exactly on the estimate;
    # anything else means scheduler and scorer have diverged.
    if _all_fixed_durations(spec) and baseline_run.makespan_ms != int(report.makespan_before_ms):
        raise ScenarioMismatchError(
            f"baseline run took {baseline_run.makespan_ms} ms, "
            f"estimate was {report.makespan_before_ms}"
        )
    if _all_fixed_durations(report.after) and optimized_run.makespan_ms != int(report.makespan_after_ms):
        raise ScenarioMismatchError(
            f"optimized run took {optimized_run.makespan_ms} ms, "
            f"estimate was {report.makespan_after_ms}"
        )

    return SimulationResult(
        scenario=scenario,
        seed=seed,
        report=report,
        baseline_run=baseline_run,
        optimized_run=optimized_run,
        error_rate_before=rate_before,
        error_rate_after=rate_after,
    )


def compare(result: SimulationResult) -> str:
    """The before/after table plus wait and approval footers."""
    report = result.report
    diff = report.diff
    clusters = diff.clusters_after

    rows = [
        ("End-to-End Time",
         format_duration_ms(result.baseline_run.makespan_ms),
         format_duration_ms(result.optimized_run.makespan_ms),
         format_percent_change(result.baseline_run.makespan_ms,
                               result.optimized_run.makespan_ms)),
        ("Process Nodes", str(diff.nodes_before), str(diff.nodes_after),
         format_percent_change(diff.nodes_before, diff.nodes_after)),
        ("Risk Control Stages", str(diff.risk_before), str(diff.risk_after),
         f"{diff.risk_after - diff.risk_before:+d}"),
        ("Parallel Clusters", str(diff.clusters_before), str(diff.clusters_after),
         f"{clusters - diff.clusters_before:+d} "
         f"({clusters} group{'s' if clusters != 1 else ''} in parallel)"),
        ("Error Rate", format_rate(result.error_rate_before),
         format_rate(result.error_rate_after),
         format_percent_change(float(result.error_rate_before),
                               float(result.error_rate_after))),
    ]
    widths = [
        max(len("Metric"), max(len(r[0]) for r in rows)),
        max(len("Baseline"), max(len(r[1]) for r in rows)),
        max(len("Optimized"), max(len(r[2]) for r in rows)),
    ]
    lines = [
        f"Scenario: {result.scenario.title} (seed {result.seed})",
        f"{'Metric':<{widths[0]}}  {'Baseline':<{widths[1]}}  "
        f"{'Optimized':<{widths[2]}}  Change",
    ]
    for name, before, after, change in rows:
        lines.append(
            f"{name:<{widths[0]}}  {before:<{widths[1]}}  "
            f"{after:<{widths[2]}}  {change}"
        )
    lines.append(
        "Inter-node wait: "
        f"{format_duration_ms(report.wait_before_ms)} -> "
        f"{format_duration_ms(report.wait_after_ms)} "
        f"({format_percent_change(report.wait_before_ms, report.wait_after_ms)})"
    )
    if result.approval_before_ms:
        lines.append(
            "Approval turnaround: "
            f"{format_duration_ms(result.approval_before_ms)} -> "
            f"{format_duration_ms(result.approval_after_ms)} "
            f"({format_percent_change(result.approval_before_ms, result.approval_after_ms)})"
        )
    return "\n".join(lines)


def to_json(result: SimulationResult) -> dict[str, Any]:
    report = result.report
    diff = report.diff
    return {
        "scenario": result.scenario.name,
        "title": result.scenario.title,
        "seed": result.seed,
        "baseline": {
            "run_id": result.baseline_run.run_id,
            "status": result.baseline_run.status.value,
            "makespan_ms": result.baseline_run.makespan_ms,
            "nodes": diff.nodes_before,
            "risk_nodes": diff.risk_before,
            "parallel_clusters": diff.clusters_before,
            "error_rate": str(result.error_rate_before),
            "wait_ms": report.wait_before_ms,
            "approval_ms": result.approval_before_ms,
        },
        "optimized": {
            "run_id": result.optimized_run.run_id,
            "status": result.optimized_run.status.value,
            "makespan_ms": result.optimized_run.makespan_ms,
            "nodes": diff.nodes_after,
            "risk_nodes": diff.risk_after,
            "parallel_clusters": diff.clusters_after,
            "error_rate": str(result.error_rate_after),
            "wait_ms": report.wait_after_ms,
            "approval_ms": result.approval_after_ms,
        },
        "changes": {
            "end_to_end": format_percent_change(
                result.baseline_run.makespan_ms, result.optimized_run.makespan_ms
            ),
            "nodes": format_percent_change(diff.nodes_before, diff.nodes_after),
            "error_rate": format_percent_change(
                float(result.error_rate_before), float(result.error_rate_after)
            ),
            "wait": format_percent_change(report.wait_before_ms, report.wait_after_ms),
            "approval": format_percent_change(
                result.approval_before_ms, result.approval_after_ms
            ),
        },
        "merged_nodes": diff.merged_nodes,
        "inserted_risk_controls": list(report.inserted),
    }


class JsonlAuditWriter:
    """Append audit records to a JSONL file as they are emitted."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh: TextIO = open(self.path, "a", encoding="utf-8")

    def __call__(self, record: dict[str, Any]) -> None:
        self._fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()
