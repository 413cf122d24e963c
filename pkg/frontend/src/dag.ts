/**
 * Stage-column layout for a run snapshot.
 *
 * Pure functions of the GET /runs/{id} document: stages become columns,
 * nodes become cards. Columns holding two or more nodes are the run's
 * parallel clusters.
 */
import type { NodeDoc, NodeStatus, RunSnapshot } from "./types.js";

export interface NodeCard {
  id: string;
  status: NodeStatus;
  attempts: number;
  viaFallback: boolean;
  error: string | null;
  elapsedMs: number | null;
}

export interface StageColumn {
  index: number;
  nodes: NodeCard[];
}

function card(doc: NodeDoc): NodeCard {
  const elapsed =
    doc.start_ms !== null && doc.finish_ms !== null
      ? doc.finish_ms - doc.start_ms
      : null;
  return {
    id: doc.id,
    status: doc.status,
    attempts: doc.attempts,
    viaFallback: doc.via_fallback,
    error: doc.error,
    elapsedMs: elapsed,
  };
}

export function stageColumns(run: RunSnapshot): StageColumn[] {
  const byId = new Map(run.nodes.map((n) => [n.id, n]));
  return run.stages.map((ids, index) => ({
    index,
    nodes: ids.flatMap((id) => {
      const doc = byId.get(id);
      return doc ? [card(doc)] : [];
    }),
  }));
}

/** Nodes absent from every stage: standby agents that only run as fallbacks. */
export function standbyCards(run: RunSnapshot): NodeCard[] {
  const staged = new Set(run.stages.flat());
  return run.nodes.filter((n) => !staged.has(n.id)).map(card);
}

export function parallelClusters(run: RunSnapshot): number {
  return run.stages.filter((ids) => ids.length >= 2).length;
}

export function isTerminal(run: RunSnapshot): boolean {
  return run.status === "succeeded" || run.status === "aborted";
}

const STATUS_CLASSES: Record<NodeStatus, string> = {
  pending: "node-pending",
  succeeded: "node-succeeded",
  failed: "node-failed",
  escalated: "node-escalated",
  skipped: "node-skipped",
};

export function statusClass(status: NodeStatus): string {
  return STATUS_CLASSES[status] ?? "node-pending";
}
