"""Random DAG and spec builders shared by the property suites.

All builders take an explicit Random so suites stay reproducible; the node
ids sort in index order, which keeps failures easy to read.
"""
from __future__ import annotations

from random import Random

from gbpa import dag
from gbpa.process_spec import AgentKind, Lognormal, NodeSpec, ProcessSpec


def random_dag(rng: Random, n: int) -> tuple[list[str], list[tuple[str, str]]]:
    """Random acyclic graph: edges only point from lower to higher index."""
    ids = [f"n{i:02d}" for i in range(n)]
    density = rng.uniform(0.05, 0.5)
    edges = []
    for j in range(1, n):
        for i in range(j):
            if rng.random() < density:
                edges.append((ids[i], ids[j]))
    return ids, edges


def random_runnable_spec(rng: Random, n: int) -> ProcessSpec:
    """Spec the engine can run to completion: every read is produced by a
    graph ancestor, and shared write paths only occur along an edge (so the
    writers always land in different stages)."""
    ids, edges = random_dag(rng, n)
    anc = dag.ancestors(ids, edges)
    writes: dict[str, set[str]] = {i: {f"out.{i}"} for i in ids}
    for src, dst in rng.sample(edges, min(len(edges), n // 4)):
        shared = f"shared.{src}.{dst}"
        writes[src].add(shared)
        writes[dst].add(shared)
    nodes = []
    for node_id in ids:
        upstream = sorted(p for a in anc[node_id] for p in writes[a])
        reads = rng.sample(upstream, min(len(upstream), rng.randrange(0, 3)))
        if rng.random() < 0.3:
            duration: int | Lognormal = Lognormal(rng.uniform(0, 3), rng.uniform(0.1, 1.0))
        else:
            duration = rng.randrange(0, 5000)
        nodes.append(NodeSpec(
            id=node_id,
            agent_kind=AgentKind.REASONING,
            reads=frozenset(reads),
            writes=frozenset(writes[node_id]),
            duration=duration,
        ))
    return ProcessSpec(
        id=f"random-{rng.randrange(10**6)}",
        version="1",
        nodes=tuple(nodes),
        edges=tuple(edges),
    )


def random_serial_spec(rng: Random, n: int) -> ProcessSpec:
    """Serial chain with mergeable lookalikes and occasional effects; the
    baseline shape the optimizer's preservation guarantees are stated over.

    A "re-check" node repeats an earlier keyed node's work (same kind, reads,
    and merge key) under its own output path, the way redundant screenings
    recur in handbook-derived processes."""
    nodes = []
    edges = []
    kinds = [AgentKind.DOCUMENT, AgentKind.REASONING, AgentKind.RETRIEVAL,
             AgentKind.API, AgentKind.AUTHORIZATION]
    keyed: list[NodeSpec] = []
    for i in range(n):
        node_id = f"s{i:02d}"
        recheck = keyed and rng.random() < 0.25
        if recheck:
            twin = rng.choice(keyed)
            kind, reads = twin.agent_kind, twin.reads
            effectful, merge_key = twin.effectful, twin.merge_key
        else:
            effectful = rng.random() < 0.2
            kind = AgentKind.API if effectful else rng.choice(kinds)
            reads = frozenset() if i == 0 else frozenset({f"val.{i - 1}"})
            merge_key = f"group{rng.randrange(3)}" if rng.random() < 0.3 else None
        node = NodeSpec(
            id=node_id,
            agent_kind=kind,
            reads=reads,
            writes=frozenset({f"val.{i}"}),
            duration=rng.randrange(1000, 60000),
            effectful=effectful,
            merge_key=merge_key,
        )
        nodes.append(node)
        if merge_key and not recheck:
            keyed.append(node)
        if i:
            edges.append((f"s{i - 1:02d}", node_id))
    return ProcessSpec(
        id=f"serial-{rng.randrange(10**6)}",
        version="1",
        nodes=tuple(nodes),
        edges=tuple(edges),
    )


def brute_force_depths(
    ids: list[str], edges: list[tuple[str, str]]
) -> dict[str, int]:
    """Longest-path depth by enumerating every simple path that ends at each
    node. Deliberately naive; only sane for small n."""
    preds: dict[str, list[str]] = {i: [] for i in ids}
    for src, dst in edges:
        preds[dst].append(src)

    def paths_ending_at(node: str) -> list[list[str]]:
        out = [[node]]
        for p in preds[node]:
            for path in paths_ending_at(p):
                out.append(path + [node])
        return out

    return {i: max(len(p) for p in paths_ending_at(i)) - 1 for i in ids}
