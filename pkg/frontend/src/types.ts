/**
 * Shapes of the service's JSON responses.
 *
 * These mirror the documents the run service emits; the console never
 * invents fields of its own on top of them.
 */

export type RunStatus = "running" | "suspended" | "succeeded" | "aborted";

export type NodeStatus =
  | "pending"
  | "succeeded"
  | "failed"
  | "escalated"
  | "skipped";

export type TicketStateName = "open" | "resolved";

export type DecisionName = "retry" | "skip_with_value" | "abort";

export interface TicketDoc {
  id: string;
  run: string;
  node: string;
  reason: string;
  state: TicketStateName;
  decision: DecisionName | null;
  value: Record<string, unknown> | null;
  opened_seq: number;
  /** Decisions the server will accept; empty once resolved. */
  options: DecisionName[];
}

export interface NodeDoc {
  id: string;
  status: NodeStatus;
  attempts: number;
  start_ms: number | null;
  finish_ms: number | null;
  error: string | null;
  via_fallback: boolean;
}

export interface RunSnapshot {
  run_id: string;
  spec_id: string;
  status: RunStatus;
  seed: number;
  makespan_ms: number | null;
  stages: string[][];
  nodes: NodeDoc[];
  tickets: TicketDoc[];
  fields: Record<string, unknown>;
}

export interface RunListItem {
  run_id: string;
  spec_id: string;
  status: RunStatus;
  open_tickets: number;
}

export interface ErrorBody {
  code: number;
  detail: string;
}
