"""Reconstruct run state purely from audit trail records.

This module deliberately does not import the engine. It reads the
{run, seq, ts, kind, node, payload} records and rebuilds fields, node
outcomes, and tickets from them alone, so it can double as an integrity
check on the trail and as the restart path for the service.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


@dataclass
class ReplayedNode:
    status: str = "pending"
    attempts: int = 0
    start_ms: int | None = None
    finish_ms: int | None = None
    writes: dict[str, Any] = field(default_factory=dict)
    error: str = ""
    via_fallback: str | None = None


@dataclass
class ReplayedTicket:
    id: str
    run_id: str
    node_id: str
    reason: str
    state: str = "open"
    decision: str | None = None
    value: dict[str, Any] | None = None
    opened_seq: int = 0


@dataclass
class ReplayedRun:
    run_id: str
    spec_id: str = ""
    seed: int = 0
    status: str = "running"
    inputs: dict[str, Any] = field(default_factory=dict)
    inject: dict[str, Any] = field(default_factory=dict)
    fields: dict[str, Any] = field(default_factory=dict)
    nodes: dict[str, ReplayedNode] = field(default_factory=dict)
    tickets: dict[str, ReplayedTicket] = field(default_factory=dict)
    seq: int = 0
    started_ms: int = 0
    finished_ms: int | None = None
    records: list[dict[str, Any]] = field(default_factory=list)

    @property
    def makespan_ms(self) -> int:
        if self.finished_ms is None:
            return 0
        return max(0, self.finished_ms - self.started_ms)

    def open_ticket_ids(self) -> list[str]:
        return sorted(t.id for t in self.tickets.values() if t.state == "open")


def _node(run: ReplayedRun, node_id: str) -> ReplayedNode:
    if node_id not in run.nodes:
        run.nodes[node_id] = ReplayedNode()
    return run.nodes[node_id]


def replay_records(records: Iterable[Mapping[str, Any]]) -> ReplayedRun:
    """Interpret one run's trail. Seq must increase strictly; records from a
    second run are rejected."""
    run: ReplayedRun | None = None
    for record in records:
        if run is None:
            run = ReplayedRun(run_id=str(record["run"]))
        elif record["run"] != run.run_id:
            raise ValueError(
                f"trail mixes runs: {run.run_id} and {record['run']}"
            )
        seq = int(record["seq"])
        if seq <= run.seq:
            raise ValueError(
                f"audit seq not strictly increasing: {seq} after {run.seq}"
            )
        run.seq = seq
        run.records.append(dict(record))
        ts = int(record["ts"])
        kind = record["kind"]
        node_id = record.get("node")
        payload = record.get("payload") or {}

        if kind == "run_started":
            run.spec_id = str(payload.get("spec", ""))
            run.seed = int(payload.get("seed", 0))
            run.inputs = dict(payload.get("inputs", {}))
            run.inject = dict(payload.get("inject", {}))
            run.fields = dict(run.inputs)
            run.started_ms = ts
            run.status = "running"
        elif kind == "node_started":
            rec = _node(run, node_id)
            if rec.start_ms is None:
                rec.start_ms = ts
        elif kind == "attempt_failed":
            rec = _node(run, node_id)
            rec.attempts = max(rec.attempts, int(payload.get("attempt", 0)))
            rec.error = str(payload.get("error", ""))
        elif kind == "fallback_invoked":
            rec = _node(run, str(payload.get("fallback")))
            rec.attempts = max(rec.attempts, int(payload.get("attempt", 0)))
        elif kind == "node_succeeded":
            rec = _node(run, node_id)
            rec.status = "succeeded"
            rec.attempts = int(payload.get("attempts", rec.attempts or 1))
            rec.writes = dict(payload.get("writes", {}))
            rec.error = ""
            rec.via_fallback = payload.get("fallback")
            elapsed = int(payload.get("elapsed_ms", 0))
            rec.finish_ms = (rec.start_ms or ts) + elapsed
            run.fields.update(rec.writes)
        elif kind == "node_skipped":
            rec = _node(run, node_id)
            rec.status = "skipped"
            rec.writes = dict(payload.get("writes", {}))
            rec.finish_ms = ts
            run.fields.update(rec.writes)
        elif kind == "ticket_opened":
            ticket = ReplayedTicket(
                id=str(payload["ticket"]),
                run_id=run.run_id,
                node_id=str(node_id),
                reason=str(payload.get("reason", "")),
                opened_seq=seq,
            )
            run.tickets[ticket.id] = ticket
            rec = _node(run, node_id)
            rec.status = "escalated"
            rec.error = ticket.reason
            rec.attempts = max(rec.attempts, int(payload.get("attempts", 0)))
        elif kind == "ticket_resolved":
            tid = str(payload["ticket"])
            if tid in run.tickets:
                ticket = run.tickets[tid]
                ticket.state = "resolved"
                ticket.decision = payload.get("decision")
                raw_value = payload.get("value")
                ticket.value = dict(raw_value) if isinstance(raw_value, dict) else None
            if payload.get("decision") == "retry":
                rec = _node(run, node_id)
                rec.status = "pending"
                rec.error = ""
            if payload.get("decision") == "abort":
                rec = _node(run, node_id)
                rec.status = "failed"
        elif kind == "run_suspended":
            run.status = "suspended"
        elif kind == "run_resumed":
            run.status = "running"
        elif kind == "run_succeeded":
            run.status = "succeeded"
            run.finished_ms = ts
        elif kind == "run_aborted":
            run.status = "aborted"
            run.finished_ms = ts
        # Unknown kinds are skipped so old readers survive new writers.
    if run is None:
        raise ValueError("empty audit trail")
    return run


def replay_trail(lines: Iterable[str]) -> dict[str, ReplayedRun]:
    """Group a JSONL trail by run and replay each run independently."""
    grouped: dict[str, list[dict[str, Any]]] = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        grouped.setdefault(str(record["run"]), []).append(record)
    return {run_id: replay_records(records) for run_id, records in grouped.items()}


def load_trail(path) -> dict[str, ReplayedRun]:
    with open(path, "r", encoding="utf-8") as fh:
        return replay_trail(fh)
