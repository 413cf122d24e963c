/** Canned service documents for unit tests. */
import type { NodeDoc, RunSnapshot, TicketDoc } from "../src/types.js";

export function nodeDoc(id: string, over: Partial<NodeDoc> = {}): NodeDoc {
  return {
    id,
    status: "succeeded",
    attempts: 1,
    start_ms: 0,
    finish_ms: 1000,
    error: null,
    via_fallback: false,
    ...over,
  };
}

export function snapshot(over: Partial<RunSnapshot> = {}): RunSnapshot {
  return {
    run_id: "run-000000000001",
    spec_id: "fixture",
    status: "succeeded",
    seed: 0,
    makespan_ms: 3000,
    stages: [["a"], ["b"], ["c"]],
    nodes: [nodeDoc("a"), nodeDoc("b"), nodeDoc("c")],
    tickets: [],
    fields: { "out.a": true, "out.b": true, "out.c": true },
    ...over,
  };
}

export function ticketDoc(over: Partial<TicketDoc> = {}): TicketDoc {
  return {
    id: "tkt-1",
    run: "run-000000000001",
    node: "b",
    reason: "agent failed after 3 attempts",
    state: "open",
    decision: null,
    value: null,
    opened_seq: 10,
    options: ["retry", "skip_with_value", "abort"],
    ...over,
  };
}
