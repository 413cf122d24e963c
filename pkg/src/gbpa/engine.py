"""Run coordinator: stage-barrier scheduling with retries, fallbacks, and
human escalation tickets.

Nodes are layered into stages from the spec's edges (plus declared ordering
constraints); stage k starts only when stage k-1 has fully completed. Every
run appends to an audit trail of {run, seq, ts, kind, node, payload} records
with strictly increasing seq, detailed enough that an independent reader can
reconstruct the run.
"""
from __future__ import annotations

import hashlib
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from random import Random
from typing import Any, Callable, Mapping

from . import dag
from .agents import AgentContext, AgentRegistry, ScenarioResources, standard_registry
from .clock import Clock, SimulatedClock
from .errors import (
    AgentError,
    AgentFailure,
    AlreadyResolvedError,
    CycleDetectedError,
    EndpointDownError,
    EscalationRequired,
    MissingInputError,
    RunAbortedError,
    TicketNotFoundError,
    WriteConflictError,
)
from .process_spec import Lognormal, NodeSpec, ProcessSpec


class NodeStatus(str, Enum):
    PENDING = "pending"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    ESCALATED = "escalated"
    SKIPPED = "skipped"


class RunStatus(str, Enum):
    RUNNING = "running"
    SUSPENDED = "suspended"
    SUCCEEDED = "succeeded"
    ABORTED = "aborted"


class TicketState(str, Enum):
    OPEN = "open"
    RESOLVED = "resolved"


class Decision(str, Enum):
    RETRY = "retry"
    SKIP_WITH_VALUE = "skip_with_value"
    ABORT = "abort"


_TERMINAL = (NodeStatus.SUCCEEDED, NodeStatus.SKIPPED)


def jsonable(value: Any) -> Any:
    """Coerce a value into plain JSON types. Decimals and fractions become
    strings so nothing is lost to float rounding."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (Decimal, Fraction)):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return str(value)


@dataclass(frozen=True)
class ExecutionGraph:
    """Stage layering of a spec, with same-stage write conflicts rejected."""

    spec: ProcessSpec
    stages: tuple[tuple[str, ...], ...]


def build_graph(spec: ProcessSpec) -> ExecutionGraph:
    edges = list(dict.fromkeys(tuple(spec.edges) + tuple(spec.constraint_pairs)))
    cycle = dag.find_cycle(spec.node_ids, edges)
    if cycle is not None:
        raise CycleDetectedError(cycle)
    # Isolated fallback targets are standby capacity: dispatched only as a
    # substitute for their primary, never as a stage member of their own.
    touched = {n for pair in edges for n in pair}
    standby = {
        p.fallback_node
        for _, p in spec.fallback
        if p.fallback_node and p.fallback_node not in touched
    }
    active = [n for n in spec.node_ids if n not in standby]
    stages = tuple(tuple(stage) for stage in dag.stages(active, edges))
    for stage in stages:
        seen: dict[str, str] = {}
        for node_id in stage:
            for path in spec.node(node_id).writes:
                if path in seen:
                    raise WriteConflictError(
                        f"nodes {seen[path]} and {node_id} both write {path} in one stage"
                    )
                seen[path] = node_id
    return ExecutionGraph(spec=spec, stages=stages)


@dataclass
class Ticket:
    id: str
    run_id: str
    node_id: str
    reason: str
    state: TicketState = TicketState.OPEN
    decision: Decision | None = None
    value: dict[str, Any] | None = None
    opened_seq: int = 0


@dataclass
class _NodeRecord:
    status: NodeStatus = NodeStatus.PENDING
    attempts: int = 0
    start_ms: int | None = None
    finish_ms: int | None = None
    writes: dict[str, Any] = field(default_factory=dict)
    error: str = ""
    via_fallback: str | None = None


@dataclass(frozen=True)
class NodeView:
    id: str
    status: NodeStatus
    attempts: int
    start_ms: int | None
    finish_ms: int | None
    error: str
    via_fallback: str | None


@dataclass(frozen=True)
class RunResult:
    run_id: str
    spec_id: str
    status: RunStatus
    fields: dict[str, Any]
    nodes: tuple[NodeView, ...]
    tickets: tuple[Ticket, ...]
    makespan_ms: int
    seed: int
    audit: tuple[dict[str, Any], ...]

    def node(self, node_id: str) -> NodeView:
        for view in self.nodes:
            if view.id == node_id:
                return view
        raise KeyError(node_id)

    @property
    def open_tickets(self) -> tuple[Ticket, ...]:
        return tuple(t for t in self.tickets if t.state == TicketState.OPEN)


@dataclass
class RunState:
    run_id: str
    spec: ProcessSpec
    graph: ExecutionGraph
    seed: int
    inputs: dict[str, Any]
    inject: dict[str, Any]
    resources: ScenarioResources | None = None
    status: RunStatus = RunStatus.RUNNING
    stage_index: int = 0
    fields: dict[str, Any] = field(default_factory=dict)
    nodes: dict[str, _NodeRecord] = field(default_factory=dict)
    tickets: dict[str, Ticket] = field(default_factory=dict)
    seq: int = 0
    started_ms: int = 0
    finished_ms: int | None = None
    audit_records: list[dict[str, Any]] = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock)


def derive_run_id(spec_id: str, seed: int) -> str:
    digest = hashlib.sha256(f"{spec_id}:{seed}".encode()).hexdigest()
    return f"run-{digest[:12]}"


AuditSink = Callable[[dict[str, Any]], None]


class RunCoordinator:
    """Owns active runs: starts them, walks the stages, opens and resolves
    escalation tickets, and emits the audit trail."""

    def __init__(
        self,
        registry: AgentRegistry | None = None,
        resources: ScenarioResources | None = None,
        *,
        clock: Clock | None = None,
        audit_sink: AuditSink | None = None,
        threaded: bool = False,
        max_workers: int = 8,
    ):
        self.resources = resources or ScenarioResources()
        self.registry = registry or standard_registry(self.resources)
        self.clock = clock or SimulatedClock()
        self.audit_sink = audit_sink
        self.threaded = threaded
        self.max_workers = max_workers
        self._runs: dict[str, RunState] = {}
        self._emit_lock = threading.RLock()
        self._effect_lock = threading.Lock()

    # -- public surface --------------------------------------------------

    def start(
        self,
        spec: ProcessSpec,
        inputs: Mapping[str, Any] | None = None,
        *,
        seed: int = 0,
        run_id: str | None = None,
        resources: ScenarioResources | None = None,
    ) -> RunResult:
        inputs = dict(inputs or {})
        inject = dict(inputs.pop("inject", {}) or {})
        run_id = run_id or derive_run_id(spec.id, seed)
        if run_id in self._runs:
            raise ValueError(f"run already exists: {run_id}")
        st = RunState(
            run_id=run_id,
            spec=spec,
            graph=build_graph(spec),
            seed=seed,
            inputs=inputs,
            inject=inject,
            resources=resources,
            started_ms=self.clock.now_ms(),
        )
        st.fields.update(inputs)
        st.nodes = {node_id: _NodeRecord() for node_id in spec.node_ids}
        self._runs[run_id] = st
        self._emit(st, "run_started", payload={
            "spec": spec.id,
            "version": spec.version,
            "seed": seed,
            "inputs": inputs,
            "inject": inject,
        })
        with st.lock:
            return self._advance(st)

    def adopt(
        self,
        spec: ProcessSpec,
        replayed: "Any",
        resources: ScenarioResources | None = None,
    ) -> RunResult:
        """Rebuild an in-flight run from a replayed audit trail so it can
        continue after a restart."""
        st = RunState(
            run_id=replayed.run_id,
            spec=spec,
            graph=build_graph(spec),
            seed=replayed.seed,
            inputs=dict(replayed.inputs),
            inject=dict(replayed.inject),
            resources=resources,
            status=RunStatus(replayed.status),
            fields=dict(replayed.fields),
            seq=replayed.seq,
            started_ms=replayed.started_ms,
            finished_ms=replayed.finished_ms,
        )
        st.audit_records = [dict(r) for r in replayed.records]
        st.nodes = {node_id: _NodeRecord() for node_id in spec.node_ids}
        for node_id, snap in replayed.nodes.items():
            if node_id in st.nodes:
                rec = st.nodes[node_id]
                rec.status = NodeStatus(snap.status)
                rec.attempts = snap.attempts
                rec.start_ms = snap.start_ms
                rec.finish_ms = snap.finish_ms
                rec.writes = dict(snap.writes)
                rec.error = snap.error
        for t in replayed.tickets.values():
            st.tickets[t.id] = Ticket(
                id=t.id,
                run_id=t.run_id,
                node_id=t.node_id,
                reason=t.reason,
                state=TicketState(t.state),
                decision=Decision(t.decision) if t.decision else None,
                value=dict(t.value) if t.value is not None else None,
                opened_seq=t.opened_seq,
            )
        st.stage_index = self._first_unfinished_stage(st)
        self._runs[st.run_id] = st
        return self.result(st.run_id)

    def has_run(self, run_id: str) -> bool:
        return run_id in self._runs

    def run_ids(self) -> list[str]:
        return list(self._runs)

    def graph_stages(self, run_id: str) -> tuple[tuple[str, ...], ...]:
        return self._state(run_id).graph.stages

    def result(self, run_id: str) -> RunResult:
        st = self._state(run_id)
        now = self.clock.now_ms()
        finished = st.finished_ms if st.finished_ms is not None else now
        fields = dict(st.fields)
        if st.stage_index < len(st.graph.stages):
            # A suspended snapshot shows what the current stage has already
            # produced, even though the barrier has not folded it yet; no
            # later node can have read these values.
            for node_id in st.graph.stages[st.stage_index]:
                fields.update(st.nodes[node_id].writes)
        return RunResult(
            run_id=st.run_id,
            spec_id=st.spec.id,
            status=st.status,
            fields=fields,
            nodes=tuple(
                NodeView(
                    id=node_id,
                    status=rec.status,
                    attempts=rec.attempts,
                    start_ms=rec.start_ms,
                    finish_ms=rec.finish_ms,
                    error=rec.error,
                    via_fallback=rec.via_fallback,
                )
                for node_id, rec in st.nodes.items()
            ),
            tickets=tuple(st.tickets.values()),
            makespan_ms=max(0, finished - st.started_ms),
            seed=st.seed,
            audit=tuple(dict(r) for r in st.audit_records),
        )

    def tickets(self, state: TicketState | str | None = None) -> list[Ticket]:
        wanted = TicketState(state) if state is not None else None
        out = []
        for st in self._runs.values():
            for t in st.tickets.values():
                if wanted is None or t.state == wanted:
                    out.append(t)
        return out

    def ticket(self, ticket_id: str) -> Ticket:
        for st in self._runs.values():
            if ticket_id in st.tickets:
                return st.tickets[ticket_id]
        raise TicketNotFoundError(f"no such ticket: {ticket_id}")

    def resolve(
        self,
        ticket_id: str,
        decision: Decision | str,
        value: Mapping[str, Any] | None = None,
    ) -> RunResult:
        ticket = self.ticket(ticket_id)
        st = self._state(ticket.run_id)
        with st.lock:
            if ticket.state == TicketState.RESOLVED:
                raise AlreadyResolvedError(
                    f"ticket {ticket_id} already resolved: {ticket.decision}"
                )
            decision = Decision(decision)
            ticket.state = TicketState.RESOLVED
            ticket.decision = decision
            ticket.value = dict(value) if value is not None else None
            self._emit(st, "ticket_resolved", ticket.node_id, {
                "ticket": ticket.id,
                "decision": decision.value,
                "value": jsonable(ticket.value),
            })
            node = st.spec.node(ticket.node_id)
            rec = st.nodes[ticket.node_id]
            if decision == Decision.ABORT:
                rec.status = NodeStatus.FAILED
                self._abort(st, f"aborted by decision on {ticket.id}")
            if decision == Decision.SKIP_WITH_VALUE:
                writes = {path: None for path in node.writes}
                for k, v in (ticket.value or {}).items():
                    if k in node.writes:
                        writes[k] = jsonable(v)
                rec.status = NodeStatus.SKIPPED
                rec.writes = writes
                rec.finish_ms = self.clock.now_ms()
                self._emit(st, "node_skipped", node.id, {"writes": writes})
            if decision == Decision.RETRY:
                rec.status = NodeStatus.PENDING
                rec.error = ""
            if st.status == RunStatus.SUSPENDED and not self._stage_blocked(st):
                st.status = RunStatus.RUNNING
                self._emit(st, "run_resumed")
                return self._advance(st)
            return self.result(st.run_id)

    # -- internals -------------------------------------------------------

    def _state(self, run_id: str) -> RunState:
        if run_id not in self._runs:
            raise KeyError(f"no such run: {run_id}")
        return self._runs[run_id]

    def _first_unfinished_stage(self, st: RunState) -> int:
        for idx, stage in enumerate(st.graph.stages):
            if any(st.nodes[n].status not in _TERMINAL for n in stage):
                return idx
        return len(st.graph.stages)

    def _stage_blocked(self, st: RunState) -> bool:
        if st.stage_index >= len(st.graph.stages):
            return False
        stage = st.graph.stages[st.stage_index]
        open_nodes = {t.node_id for t in st.tickets.values() if t.state == TicketState.OPEN}
        return any(n in open_nodes for n in stage)

    def _emit(self, st: RunState, kind: str, node: str | None = None,
              payload: Mapping[str, Any] | None = None) -> None:
        with self._emit_lock:
            st.seq += 1
            record = {
                "run": st.run_id,
                "seq": st.seq,
                "ts": self.clock.now_ms(),
                "kind": kind,
                "node": node,
                "payload": jsonable(payload or {}),
            }
            st.audit_records.append(record)
            if self.audit_sink is not None:
                self.audit_sink(record)

    def _advance(self, st: RunState) -> RunResult:
        while True:
            if st.stage_index >= len(st.graph.stages):
                if st.status != RunStatus.SUCCEEDED:
                    st.status = RunStatus.SUCCEEDED
                    st.finished_ms = self.clock.now_ms()
                    self._emit(st, "run_succeeded", payload={
                        "makespan_ms": st.finished_ms - st.started_ms,
                    })
                return self.result(st.run_id)
            stage = st.graph.stages[st.stage_index]
            todo = [st.spec.node(n) for n in stage if st.nodes[n].status == NodeStatus.PENDING]
            if self.threaded and len(todo) > 1:
                with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                    futures = [
                        pool.submit(self._run_node, st, node, st.stage_index)
                        for node in todo
                    ]
                    for f in futures:
                        f.result()
            else:
                for node in todo:
                    self._run_node(st, node, st.stage_index)

            records = [st.nodes[n] for n in stage]
            failed = [n for n, rec in zip(stage, records) if rec.status == NodeStatus.FAILED]
            if failed:
                self._abort(st, f"node failed with no escalation path: {failed[0]}")
            if self._stage_blocked(st):
                st.status = RunStatus.SUSPENDED
                open_ids = sorted(
                    t.id for t in st.tickets.values() if t.state == TicketState.OPEN
                )
                self._emit(st, "run_suspended", payload={"open_tickets": open_ids})
                return self.result(st.run_id)
            # Barrier: fold this stage's writes, then move time to the
            # latest finish inside the stage.
            for node_id in stage:
                st.fields.update(st.nodes[node_id].writes)
            finishes = [r.finish_ms for r in records if r.finish_ms is not None]
            if finishes and self.clock.simulated:
                self.clock.advance_to(max(max(finishes), self.clock.now_ms()))
            st.stage_index += 1

    def _abort(self, st: RunState, reason: str) -> None:
        st.status = RunStatus.ABORTED
        st.finished_ms = self.clock.now_ms()
        self._emit(st, "run_aborted", payload={"reason": reason})
        raise RunAbortedError(reason, result=self.result(st.run_id))

    def _attempt_duration_ms(self, st: RunState, node: NodeSpec, attempt: int) -> int:
        model = node.duration
        if isinstance(model, Lognormal):
            rng = Random(f"{st.seed}:{node.id}:{attempt}:duration")
            return max(0, round(rng.lognormvariate(model.mu, model.sigma)))
        return int(model)

    def _attempt(self, st: RunState, node: NodeSpec, attempt: int) -> dict[str, Any]:
        inject = st.inject.get(node.id, {})
        if inject.get("endpoint_down"):
            raise EndpointDownError(f"injected outage at {node.id}")
        if attempt <= int(inject.get("fail_attempts", 0)):
            raise AgentFailure(f"injected failure (attempt {attempt})")
        missing = sorted(path for path in node.reads if path not in st.fields)
        if missing:
            raise MissingInputError(
                f"node {node.id} is missing inputs: {', '.join(missing)}"
            )
        adapter, exclusive = self.registry.adapter(node.agent_kind)
        ctx = AgentContext(
            fields=dict(st.fields),
            rng=Random(f"{st.seed}:{node.id}:{attempt}"),
            attempt=attempt,
            resources=st.resources or self.resources,
        )
        if exclusive and self.threaded:
            # Side-effectful adapters never overlap in wall-clock mode.
            with self._effect_lock:
                return adapter(node, ctx)
        return adapter(node, ctx)

    def _run_node(self, st: RunState, node: NodeSpec, stage_idx: int) -> None:
        policy = st.spec.policy_for(node.id)
        rec = st.nodes[node.id]
        if rec.start_ms is None:
            rec.start_ms = self.clock.now_ms()
        # Elapsed is measured from first dispatch so trail readers can
        # recompute the finish as start + elapsed under either clock.
        start = rec.start_ms
        elapsed = 0
        self._emit(st, "node_started", node.id, {
            "stage": stage_idx,
            "attempt": rec.attempts + 1,
        })
        budget = policy.retries + 1
        for i in range(budget):
            attempt = rec.attempts + 1
            rec.attempts = attempt
            if self.clock.simulated:
                elapsed += self._attempt_duration_ms(st, node, attempt)
            try:
                writes = self._attempt(st, node, attempt)
            except (EscalationRequired, MissingInputError) as exc:
                self._open_ticket(st, node, rec, str(exc))
                return
            except AgentFailure as exc:
                rec.error = str(exc)
                self._emit(st, "attempt_failed", node.id, {
                    "attempt": attempt,
                    "error": str(exc),
                    "code": exc.code,
                })
                if i < budget - 1:
                    continue
                self._exhausted(st, node, policy, rec, elapsed, start)
                return
            except AgentError as exc:
                # Retrying will not heal a bad role table or non-numeric
                # data; a human still can, via skip or abort.
                self._open_ticket(st, node, rec, str(exc))
                return
            self._succeed(st, node, rec, writes, elapsed, start)
            return

    def _succeed(self, st, node: NodeSpec, rec: _NodeRecord, writes: Mapping[str, Any],
                 elapsed: int, start: int, via_fallback: str | None = None) -> None:
        rec.status = NodeStatus.SUCCEEDED
        rec.writes = {k: jsonable(v) for k, v in writes.items()}
        rec.error = ""
        rec.via_fallback = via_fallback
        rec.finish_ms = start + elapsed if self.clock.simulated else self.clock.now_ms()
        payload = {
            "writes": rec.writes,
            "attempts": rec.attempts,
            "elapsed_ms": rec.finish_ms - start,
        }
        if via_fallback:
            payload["fallback"] = via_fallback
        self._emit(st, "node_succeeded", node.id, payload)

    def _exhausted(self, st, node: NodeSpec, policy, rec: _NodeRecord,
                   elapsed: int, start: int) -> None:
        if policy.fallback_node:
            fb = st.spec.node(policy.fallback_node)
            fb_rec = st.nodes[fb.id]
            fb_rec.attempts += 1
            self._emit(st, "fallback_invoked", node.id, {
                "fallback": fb.id,
                "attempt": fb_rec.attempts,
            })
            if self.clock.simulated:
                elapsed += self._attempt_duration_ms(st, fb, fb_rec.attempts)
            try:
                writes = self._attempt(st, fb, fb_rec.attempts)
            except (EscalationRequired, AgentFailure, MissingInputError) as exc:
                self._emit(st, "attempt_failed", fb.id, {
                    "attempt": fb_rec.attempts,
                    "error": str(exc),
                    "code": getattr(exc, "code", "error"),
                })
            else:
                self._succeed(st, node, rec, writes, elapsed, start, via_fallback=fb.id)
                return
        if policy.escalate:
            self._open_ticket(st, node, rec, rec.error or "attempts exhausted")
            return
        rec.status = NodeStatus.FAILED

    def _open_ticket(self, st: RunState, node: NodeSpec, rec: _NodeRecord, reason: str) -> None:
        rec.status = NodeStatus.ESCALATED
        rec.error = reason
        # Same-stage nodes may escalate from pool threads at once; keep the
        # count-and-insert atomic with the emitted record.
        with self._emit_lock:
            prior = sum(1 for t in st.tickets.values() if t.node_id == node.id)
            ticket = Ticket(
                id=f"tkt-{st.run_id}-{node.id}-{prior + 1}",
                run_id=st.run_id,
                node_id=node.id,
                reason=reason,
                opened_seq=st.seq + 1,
            )
            st.tickets[ticket.id] = ticket
            self._emit(st, "ticket_opened", node.id, {
                "ticket": ticket.id,
                "reason": reason,
                "attempts": rec.attempts,
            })


def execute(
    spec: ProcessSpec,
    inputs: Mapping[str, Any] | None = None,
    *,
    seed: int = 0,
    run_id: str | None = None,
    registry: AgentRegistry | None = None,
    resources: ScenarioResources | None = None,
    clock: Clock | None = None,
    audit_sink: AuditSink | None = None,
    threaded: bool = False,
) -> RunResult:
    """One-shot execution. Returns the result even when the run suspends on
    open tickets; raises RunAbortedError if it aborts outright."""
    coordinator = RunCoordinator(
        registry, resources, clock=clock or SimulatedClock(),
        audit_sink=audit_sink, threaded=threaded,
    )
    return coordinator.start(spec, inputs, seed=seed, run_id=run_id)
