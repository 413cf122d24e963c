"""Small directed-acyclic-graph toolkit used by specs, the engine, and the optimizer.

Graphs are passed around as (nodes, edges) where nodes is an iterable of ids and
edges an iterable of (src, dst) pairs. Stage layering is longest-path depth:
stage(v) = 0 for sources, else 1 + max stage over predecessors.
"""
from __future__ import annotations

from collections import defaultdict, deque
from typing import Hashable, Iterable, Sequence, TypeVar

N = TypeVar("N", bound=Hashable)


def adjacency(nodes: Iterable[N], edges: Iterable[tuple[N, N]]) -> dict[N, list[N]]:
    adj: dict[N, list[N]] = {n: [] for n in nodes}
    for src, dst in edges:
        adj[src].append(dst)
    return adj


def predecessors(nodes: Iterable[N], edges: Iterable[tuple[N, N]]) -> dict[N, list[N]]:
    preds: dict[N, list[N]] = {n: [] for n in nodes}
    for src, dst in edges:
        preds[dst].append(src)
    return preds


def find_cycle(nodes: Sequence[N], edges: Iterable[tuple[N, N]]) -> list[N] | None:
    """Return one cycle as a node list, or None if the graph is acyclic."""
    adj = adjacency(nodes, edges)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in adj}
    stack: list[N] = []

    def visit(start: N) -> list[N] | None:
        # Iterative DFS keeping the grey path on an explicit stack.
        frames: list[tuple[N, int]] = [(start, 0)]
        while frames:
            node, i = frames[-1]
            if i == 0:
                color[node] = GREY
                stack.append(node)
            if i < len(adj[node]):
                frames[-1] = (node, i + 1)
                nxt = adj[node][i]
                if color[nxt] == GREY:
                    return stack[stack.index(nxt):]
                if color[nxt] == WHITE:
                    frames.append((nxt, 0))
            else:
                color[node] = BLACK
                stack.pop()
                frames.pop()
        return None

    for n in adj:
        if color[n] == WHITE:
            cycle = visit(n)
            if cycle is not None:
                return cycle
    return None


def topological_order(nodes: Sequence[N], edges: Iterable[tuple[N, N]]) -> list[N]:
    """Kahn's algorithm; ties broken by insertion order of `nodes`."""
    order_index = {n: i for i, n in enumerate(nodes)}
    adj = adjacency(nodes, edges)
    indeg = {n: 0 for n in nodes}
    for src, dst in edges:
        indeg[dst] += 1
    ready = deque(sorted((n for n in nodes if indeg[n] == 0), key=order_index.__getitem__))
    out: list[N] = []
    while ready:
        n = ready.popleft()
        out.append(n)
        freed = []
        for m in adj[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                freed.append(m)
        for m in sorted(freed, key=order_index.__getitem__):
            ready.append(m)
    if len(out) != len(nodes):
        raise ValueError("graph has a cycle")
    return out


def longest_path_depths(nodes: Sequence[N], edges: Iterable[tuple[N, N]]) -> dict[N, int]:
    edges = list(edges)
    preds = predecessors(nodes, edges)
    depth: dict[N, int] = {}
    for n in topological_order(nodes, edges):
        depth[n] = 0 if not preds[n] else 1 + max(depth[p] for p in preds[n])
    return depth


def stages(nodes: Sequence[N], edges: Iterable[tuple[N, N]]) -> list[list[N]]:
    """Stage layering by longest-path depth; lexicographic order within a stage."""
    depth = longest_path_depths(nodes, edges)
    if not depth:
        return []
    out: list[list[N]] = [[] for _ in range(max(depth.values()) + 1)]
    for n in nodes:
        out[depth[n]].append(n)
    for layer in out:
        layer.sort()
    return out


def transitive_reduction(
    nodes: Sequence[N], edges: Iterable[tuple[N, N]]
) -> set[tuple[N, N]]:
    """Minimal edge set with the same reachability. Input must be acyclic."""
    edge_set = {(s, d) for s, d in edges}
    adj = adjacency(nodes, edge_set)
    reach: dict[N, set[N]] = {}
    for n in reversed(topological_order(nodes, edge_set)):
        r: set[N] = set()
        for m in adj[n]:
            r.add(m)
            r |= reach[m]
        reach[n] = r
    keep = set()
    for src, dst in edge_set:
        # Redundant iff some other successor of src already reaches dst.
        if not any(dst in reach[m] for m in adj[src] if m != dst):
            keep.add((src, dst))
    return keep


def reachable_from_sources(nodes: Sequence[N], edges: Iterable[tuple[N, N]]) -> set[N]:
    edges = list(edges)
    preds = predecessors(nodes, edges)
    adj = adjacency(nodes, edges)
    roots = [n for n in nodes if not preds[n]]
    seen: set[N] = set()
    frontier = list(roots)
    while frontier:
        n = frontier.pop()
        if n in seen:
            continue
        seen.add(n)
        frontier.extend(adj[n])
    return seen


def ancestors(nodes: Sequence[N], edges: Iterable[tuple[N, N]]) -> dict[N, set[N]]:
    edges = list(edges)
    preds = predecessors(nodes, edges)
    anc: dict[N, set[N]] = {}
    for n in topological_order(nodes, edges):
        a: set[N] = set()
        for p in preds[n]:
            a.add(p)
            a |= anc[p]
        anc[n] = a
    return anc


def has_path(
    nodes: Sequence[N], edges: Iterable[tuple[N, N]], src: N, dst: N
) -> bool:
    adj = adjacency(nodes, edges)
    seen: set[N] = set()
    frontier = [src]
    while frontier:
        n = frontier.pop()
        if n == dst:
            return True
        if n in seen:
            continue
        seen.add(n)
        frontier.extend(adj[n])
    return False
