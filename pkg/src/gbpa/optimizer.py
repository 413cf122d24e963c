"""Workflow optimization pipeline.

Given a (typically serial) process spec, mine the true data dependencies,
merge redundant nodes, apply configured consolidations, re-derive a minimal
edge set so independent work can run in parallel, and insert risk-control
checkpoints where policy demands them. The pipeline also scores specs:
expected makespan under stage barriers, and total inter-node wait.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from . import dag
from .errors import CorrelationKeyMissingError, MissingDurationError, SpecError
from .process_spec import (
    AgentKind,
    Lognormal,
    NodeSpec,
    ProcessSpec,
    SpecDiff,
    diff_specs,
    parse_spec,
    serialize_spec,
)


@dataclass(frozen=True)
class MinedDependency:
    src: str
    dst: str
    witness: str

    def pair(self) -> tuple[str, str]:
        return (self.src, self.dst)


def infer_dependencies(spec: ProcessSpec) -> tuple[MinedDependency, ...]:
    """True predecessors of each node: writers of fields it reads, plus any
    declared ordering constraints (witness "constraint")."""
    writers: dict[str, list[str]] = {}
    for node in spec.nodes:
        for path in node.writes:
            writers.setdefault(path, []).append(node.id)
    mined: dict[tuple[str, str], str] = {}
    for node in spec.nodes:
        for path in sorted(node.reads):
            for writer in writers.get(path, ()):
                if writer != node.id and (writer, node.id) not in mined:
                    mined[(writer, node.id)] = path
    for a, b in spec.constraint_pairs:
        if a != b and (a, b) not in mined:
            mined[(a, b)] = "constraint"
    return tuple(
        MinedDependency(src, dst, witness)
        for (src, dst), witness in sorted(mined.items())
    )


@dataclass(frozen=True)
class MergeRecord:
    survivor: str
    absorbed: tuple[str, ...]
    merge_key: str


def _remap_pairs(
    pairs: Iterable[tuple[str, str]], mapping: Mapping[str, str]
) -> list[list[str]]:
    out: list[tuple[str, str]] = []
    for a, b in pairs:
        a2, b2 = mapping.get(a, a), mapping.get(b, b)
        if a2 != b2 and (a2, b2) not in out:
            out.append((a2, b2))
    return [list(p) for p in out]


def _rebuild(
    spec: ProcessSpec,
    nodes: Sequence[NodeSpec],
    mapping: Mapping[str, str],
    edges: Iterable[tuple[str, str]] | None = None,
    drop_edges_on_cycle: bool = False,
) -> ProcessSpec:
    meta = spec.meta
    constraints = meta.get("constraints", ())
    meta = {**meta, "constraints": _remap_pairs(constraints, mapping)}
    if not meta["constraints"]:
        meta.pop("constraints")
    live_ids = {n.id for n in nodes}
    fallback = []
    for nid, p in spec.fallback:
        nid = mapping.get(nid, nid)
        target = mapping.get(p.fallback_node, p.fallback_node) if p.fallback_node else None
        if nid in live_ids and (target is None or target in live_ids):
            fallback.append((nid, replace(p, fallback_node=target)))
    doc = serialize_spec(replace(
        spec,
        nodes=tuple(nodes),
        edges=(),
        fallback=tuple(fallback),
        metadata=tuple(sorted(meta.items())),
    ))
    raw_edges = edges if edges is not None else spec.edges
    doc["edges"] = [
        pair for pair in _remap_pairs(raw_edges, mapping)
        if pair[0] in live_ids and pair[1] in live_ids
    ]
    if drop_edges_on_cycle and dag.find_cycle(
        sorted(live_ids), [tuple(p) for p in doc["edges"]]
    ) is not None:
        # Absorbing nodes that spanned others has wrecked the declared
        # ordering; leave it for parallelize() to re-derive from the data.
        doc["edges"] = []
    return parse_spec(doc)


def merge_redundant(spec: ProcessSpec) -> tuple[ProcessSpec, tuple[MergeRecord, ...]]:
    """Merge nodes that declare the same merge key and do the same work
    (same agent kind, same reads). The lexicographically smallest id
    survives, writes are unioned, and the longest member sets the duration.

    Lookalike nodes (same kind, reads, and writes) with no merge key are an
    error: nothing distinguishes them, so the spec must say which are one.
    """
    groups: dict[tuple[str, AgentKind, frozenset[str]], list[NodeSpec]] = {}
    for node in spec.nodes:
        if node.merge_key:
            groups.setdefault((node.merge_key, node.agent_kind, node.reads), []).append(node)

    lookalikes: dict[tuple[AgentKind, frozenset[str], frozenset[str]], list[str]] = {}
    for node in spec.nodes:
        if not node.merge_key:
            lookalikes.setdefault(
                (node.agent_kind, node.reads, node.writes), []
            ).append(node.id)
    for (kind, _, _), ids in lookalikes.items():
        if len(ids) > 1:
            raise CorrelationKeyMissingError(
                f"indistinguishable {kind.value} nodes without a merge key: "
                + ", ".join(sorted(ids))
            )

    mapping: dict[str, str] = {}
    records = []
    merged_nodes: dict[str, NodeSpec] = {}
    for (key, _, _), members in sorted(groups.items(), key=lambda kv: kv[0][0]):
        if len(members) < 2:
            continue
        members = sorted(members, key=lambda n: n.id)
        survivor = members[0]
        writes = frozenset().union(*(m.writes for m in members))
        duration = max(
            (m.duration for m in members),
            key=lambda d: _expected_ms_model(d),
        )
        merged_nodes[survivor.id] = replace(survivor, writes=writes, duration=duration)
        for absorbed in members[1:]:
            mapping[absorbed.id] = survivor.id
        records.append(MergeRecord(
            survivor=survivor.id,
            absorbed=tuple(m.id for m in members[1:]),
            merge_key=key,
        ))
    if not records:
        return spec, ()
    nodes = [
        merged_nodes.get(n.id, n) for n in spec.nodes if n.id not in mapping
    ]
    return _rebuild(spec, nodes, mapping, drop_edges_on_cycle=True), tuple(records)


@dataclass(frozen=True)
class ConsolidationGroup:
    """Config-declared cross-kind consolidation: members collapse into one
    node with declared kind, duration, and optional read/write overrides."""

    id: str
    agent_kind: AgentKind
    members: tuple[str, ...]
    duration: int | None = None
    reads: tuple[str, ...] | None = None
    writes: tuple[str, ...] | None = None
    risk_control: bool | None = None
    effectful: bool | None = None
    params: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "ConsolidationGroup":
        return cls(
            id=str(doc["id"]),
            agent_kind=AgentKind(doc["agent_kind"]),
            members=tuple(doc["members"]),
            duration=None if doc.get("duration") is None else int(doc["duration"]),
            reads=None if doc.get("reads") is None else tuple(doc["reads"]),
            writes=None if doc.get("writes") is None else tuple(doc["writes"]),
            risk_control=doc.get("risk_control"),
            effectful=doc.get("effectful"),
            params=tuple(sorted((doc.get("params") or {}).items())),
        )


def apply_consolidations(
    spec: ProcessSpec, groups: Sequence[ConsolidationGroup]
) -> tuple[ProcessSpec, tuple[str, ...]]:
    """Collapse each group's surviving members into one declared node.

    Default reads are the members' reads minus fields the group itself
    produces; default writes are the union; default duration is the sum.
    Groups whose members are all gone already are skipped.
    """
    nodes = list(spec.nodes)
    by_id = {n.id: n for n in nodes}
    mapping: dict[str, str] = {}
    applied = []
    for group in groups:
        members = [by_id[m] for m in group.members if m in by_id]
        if not members:
            continue
        member_reads = frozenset().union(*(m.reads for m in members))
        member_writes = frozenset().union(*(m.writes for m in members))
        reads = (
            frozenset(group.reads) if group.reads is not None
            else member_reads - member_writes
        )
        writes = frozenset(group.writes) if group.writes is not None else member_writes
        duration = (
            group.duration if group.duration is not None
            else sum(int(_expected_ms_model(m.duration)) for m in members)
        )
        risk = (
            group.risk_control if group.risk_control is not None
            else any(m.risk_control for m in members)
        )
        effectful = (
            group.effectful if group.effectful is not None
            else any(m.effectful for m in members)
        )
        new_node = NodeSpec(
            id=group.id,
            agent_kind=group.agent_kind,
            reads=reads,
            writes=writes,
            duration=duration,
            effectful=effectful,
            risk_control=risk,
            merge_key=None,
            params=group.params,
        )
        # The new node takes the first member's position.
        first_index = min(nodes.index(m) for m in members)
        nodes = [n for n in nodes if n.id not in {m.id for m in members}]
        nodes.insert(min(first_index, len(nodes)), new_node)
        by_id = {n.id: n for n in nodes}
        for m in members:
            if m.id != group.id:
                mapping[m.id] = group.id
        applied.append(group.id)
    if not applied:
        return spec, ()
    return _rebuild(spec, nodes, mapping, drop_edges_on_cycle=True), tuple(applied)


def parallelize(spec: ProcessSpec) -> ProcessSpec:
    """Replace the edge set with the transitive reduction of the mined
    dependencies, so anything not truly ordered can share a stage."""
    deps = [d.pair() for d in infer_dependencies(spec)]
    reduced = dag.transitive_reduction(spec.node_ids, deps)
    return _rebuild(spec, spec.nodes, {}, edges=sorted(reduced))


@dataclass(frozen=True)
class RiskTrigger:
    """Matches nodes that still lack a guard; risk controls never trigger
    on other risk controls, which keeps insertion idempotent."""

    agent_kind: AgentKind | None = None
    effectful: bool | None = None
    node_id: str | None = None

    def matches(self, node: NodeSpec) -> bool:
        if node.risk_control:
            return False
        if self.agent_kind is not None and node.agent_kind != self.agent_kind:
            return False
        if self.effectful is not None and node.effectful != self.effectful:
            return False
        if self.node_id is not None and node.id != self.node_id:
            return False
        return True


@dataclass(frozen=True)
class RiskPolicy:
    name: str
    trigger: RiskTrigger
    template: NodeSpec
    placement: str = "before"

    def __post_init__(self):
        if self.placement not in ("before", "after"):
            raise ValueError(f"placement must be before/after: {self.placement}")

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "RiskPolicy":
        trig = doc.get("trigger") or {}
        template = doc["template"]
        return cls(
            name=str(doc["name"]),
            trigger=RiskTrigger(
                agent_kind=(
                    AgentKind(trig["agent_kind"]) if trig.get("agent_kind") else None
                ),
                effectful=trig.get("effectful"),
                node_id=trig.get("node_id"),
            ),
            template=NodeSpec(
                id=str(template["id"]),
                agent_kind=AgentKind(template.get("agent_kind", "risk_control")),
                reads=frozenset(template.get("reads", ())),
                writes=frozenset(template.get("writes", ())),
                duration=int(template.get("duration", 0)),
                risk_control=True,
                params=tuple(sorted((template.get("params") or {}).items())),
            ),
            placement=str(doc.get("placement", "before")),
        )


def insert_risk_controls(
    spec: ProcessSpec, policies: Sequence[RiskPolicy]
) -> tuple[ProcessSpec, tuple[str, ...]]:
    """Insert checkpoint nodes demanded by policy around matching nodes.

    A target already guarded (risk-control predecessor for "before",
    successor for "after") is left alone, so re-running insertion on its own
    output changes nothing.
    """
    nodes = list(spec.nodes)
    edges = list(spec.edges)
    constraints = [tuple(p) for p in spec.constraint_pairs]
    inserted: list[str] = []
    adj = dag.adjacency([n.id for n in nodes], edges)
    preds = dag.predecessors([n.id for n in nodes], edges)
    risk_ids = {n.id for n in nodes if n.risk_control}

    for policy in policies:
        for target in list(nodes):
            if not policy.trigger.matches(target):
                continue
            if policy.placement == "before" and set(preds.get(target.id, ())) & risk_ids:
                continue
            if policy.placement == "after" and set(adj.get(target.id, ())) & risk_ids:
                continue
            suffix = sum(1 for i in inserted if i.startswith(policy.template.id))
            new_id = policy.template.id if suffix == 0 else f"{policy.template.id}_{suffix + 1}"
            control = replace(policy.template, id=new_id)
            nodes.append(control)
            inserted.append(new_id)
            risk_ids.add(new_id)
            if policy.placement == "before":
                edges.append((new_id, target.id))
                constraints.append((new_id, target.id))
            else:
                edges.append((target.id, new_id))
                constraints.append((target.id, new_id))
            # Wire the control's reads to their writers so it can run.
            writers = {
                path: n.id for n in nodes for path in n.writes if n.id != new_id
            }
            for path in sorted(control.reads):
                if path in writers:
                    edges.append((writers[path], new_id))
            adj = dag.adjacency([n.id for n in nodes], edges)
            preds = dag.predecessors([n.id for n in nodes], edges)

    if not inserted:
        return spec, ()
    ids = [n.id for n in nodes]
    reduced = dag.transitive_reduction(ids, list(dict.fromkeys(edges)))
    meta = spec.meta
    merged_constraints = list(dict.fromkeys(constraints))
    out = _rebuild(
        replace(spec, metadata=tuple(sorted(
            {**meta, "constraints": [list(p) for p in merged_constraints]}.items()
        ))),
        nodes, {}, edges=sorted(reduced),
    )
    return out, tuple(inserted)


# --- scoring -------------------------------------------------------------

def _expected_ms_model(model: int | Lognormal) -> float:
    if isinstance(model, Lognormal):
        return math.exp(model.mu + model.sigma ** 2 / 2.0)
    return float(model)


def expected_duration_ms(node: NodeSpec, strict: bool = False) -> float:
    value = _expected_ms_model(node.duration)
    if strict and not isinstance(node.duration, Lognormal) and node.duration == 0:
        raise MissingDurationError(node.id)
    return value


def _barrier_schedule(spec: ProcessSpec) -> tuple[dict[str, float], dict[str, float], float]:
    """Stage-barrier schedule under the spec's own edges and constraints.
    Returns (start, finish) per node and the total makespan."""
    edges = list(dict.fromkeys(tuple(spec.edges) + tuple(spec.constraint_pairs)))
    layered = dag.stages(spec.node_ids, edges)
    by_id = {n.id: n for n in spec.nodes}
    start: dict[str, float] = {}
    finish: dict[str, float] = {}
    t = 0.0
    for stage in layered:
        longest = 0.0
        for node_id in stage:
            d = expected_duration_ms(by_id[node_id])
            start[node_id] = t
            finish[node_id] = t + d
            longest = max(longest, d)
        t += longest
    return start, finish, t


def estimate_makespan(spec: ProcessSpec, strict: bool = False) -> float:
    """Expected end-to-end time: the sum of stage maxima."""
    if strict:
        for node in spec.nodes:
            expected_duration_ms(node, strict=True)
    _, _, total = _barrier_schedule(spec)
    return total


def inter_node_wait(spec: ProcessSpec) -> float:
    """Total time nodes sit ready but unstarted: for each node, stage start
    minus the latest finish among its mined dependencies."""
    start, finish, _ = _barrier_schedule(spec)
    preds: dict[str, list[str]] = {}
    for dep in infer_dependencies(spec):
        preds.setdefault(dep.dst, []).append(dep.src)
    total = 0.0
    for node_id in spec.node_ids:
        readiness = max((finish[p] for p in preds.get(node_id, ())), default=0.0)
        total += max(0.0, start[node_id] - readiness)
    return total


# --- pipeline ------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    consolidations: tuple[ConsolidationGroup, ...] = ()
    risk_policies: tuple[RiskPolicy, ...] = ()

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "OptimizerConfig":
        return cls(
            consolidations=tuple(
                ConsolidationGroup.from_doc(g) for g in doc.get("consolidations", ())
            ),
            risk_policies=tuple(
                RiskPolicy.from_doc(p) for p in doc.get("risk_policies", ())
            ),
        )


@dataclass(frozen=True)
class OptimizationReport:
    before: ProcessSpec
    after: ProcessSpec
    diff: SpecDiff
    mined: tuple[MinedDependency, ...]
    merges: tuple[MergeRecord, ...]
    consolidated: tuple[str, ...]
    inserted: tuple[str, ...]
    makespan_before_ms: float
    makespan_after_ms: float
    wait_before_ms: float
    wait_after_ms: float

    @property
    def makespan_reduction(self) -> float:
        if self.makespan_before_ms == 0:
            return 0.0
        return 1.0 - self.makespan_after_ms / self.makespan_before_ms

    @property
    def wait_reduction(self) -> float:
        if self.wait_before_ms == 0:
            return 0.0
        return 1.0 - self.wait_after_ms / self.wait_before_ms


def optimize(spec: ProcessSpec, config: OptimizerConfig | None = None) -> OptimizationReport:
    """Full pipeline: mine deps, merge, consolidate, parallelize, insert
    risk controls, and score the result against the input."""
    config = config or OptimizerConfig()
    mined = infer_dependencies(spec)
    merged, merges = merge_redundant(spec)
    consolidated_spec, consolidated = apply_consolidations(merged, config.consolidations)
    parallel = parallelize(consolidated_spec)
    final, inserted = insert_risk_controls(parallel, config.risk_policies)
    return OptimizationReport(
        before=spec,
        after=final,
        diff=diff_specs(spec, final),
        mined=mined,
        merges=merges,
        consolidated=consolidated,
        inserted=inserted,
        makespan_before_ms=estimate_makespan(spec),
        makespan_after_ms=estimate_makespan(final),
        wait_before_ms=inter_node_wait(spec),
        wait_after_ms=inter_node_wait(final),
    )
