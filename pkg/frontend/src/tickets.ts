/**
 * Client-side state for the escalation queue.
 *
 * The server's ticket documents are the truth; this layer only adds what
 * the server cannot know: when this console first saw a ticket (for the
 * age display), the operator's unsubmitted form draft, and the submission
 * guard that makes a decision leave this client exactly once.
 */
import { ApiError, type ServiceClient } from "./api.js";
import type { DecisionName, RunSnapshot, TicketDoc } from "./types.js";

export interface TicketRecord {
  doc: TicketDoc;
  /** Local wall-clock time when this console first observed the ticket. */
  firstSeenAt: number;
  /** A request is in flight; further submits are ignored until it lands. */
  submitting: boolean;
  /** Set after a 200 or 409: the decision left this client, never resend. */
  locked: boolean;
  /** Last submission failure, shown inline on the card. */
  error: string | null;
  draftDecision: DecisionName | null;
  draftComment: string;
}

export type SubmitOutcome =
  | { kind: "resolved"; run: RunSnapshot }
  | { kind: "conflict" }
  | { kind: "rejected"; detail: string; status?: number }
  | { kind: "ignored" };

/**
 * Turn the form's comment box into the decision payload.
 *
 * skip_with_value needs replacement field values, so the comment must be
 * a JSON object; for retry and abort a free-text comment rides along
 * under a "comment" key and shows up on the resolved ticket.
 */
export function decisionValue(
  decision: DecisionName,
  comment: string,
): Record<string, unknown> | null {
  const text = comment.trim();
  if (decision === "skip_with_value") {
    let parsed: unknown;
    try {
      parsed = JSON.parse(text === "" ? "{}" : text);
    } catch {
      throw new Error("skip_with_value needs a JSON object of replacement values");
    }
    if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
      throw new Error("skip_with_value needs a JSON object of replacement values");
    }
    return parsed as Record<string, unknown>;
  }
  return text === "" ? null : { comment: text };
}

export class TicketQueue {
  private records = new Map<string, TicketRecord>();

  /** Fold a fresh poll into the queue. Server documents always win. */
  ingest(docs: TicketDoc[], now: number): void {
    const seen = new Set<string>();
    for (const doc of docs) {
      seen.add(doc.id);
      const existing = this.records.get(doc.id);
      if (existing) {
        existing.doc = doc;
        if (doc.state === "resolved") existing.locked = true;
      } else {
        this.records.set(doc.id, {
          doc,
          firstSeenAt: now,
          submitting: false,
          locked: doc.state === "resolved",
          error: null,
          draftDecision: doc.options[0] ?? null,
          draftComment: "",
        });
      }
    }
    for (const id of [...this.records.keys()]) {
      if (!seen.has(id)) this.records.delete(id);
    }
  }

  get(id: string): TicketRecord | undefined {
    return this.records.get(id);
  }

  open(): TicketRecord[] {
    return this.byState("open");
  }

  resolved(): TicketRecord[] {
    return this.byState("resolved");
  }

  private byState(state: string): TicketRecord[] {
    return [...this.records.values()]
      .filter((r) => r.doc.state === state)
      .sort((a, b) => a.doc.opened_seq - b.doc.opened_seq);
  }

  ageMs(id: string, now: number): number {
    const record = this.records.get(id);
    return record ? Math.max(0, now - record.firstSeenAt) : 0;
  }

  /**
   * Send one decision for one ticket.
   *
   * Guards make this idempotent from the operator's point of view: while
   * a request is in flight or after the server accepted one (200) or
   * reported one already taken (409), further calls are no-ops.
   */
  async submit(
    client: ServiceClient,
    ticketId: string,
    decision: DecisionName,
    comment: string,
  ): Promise<SubmitOutcome> {
    const record = this.records.get(ticketId);
    if (!record) return { kind: "rejected", detail: `unknown ticket: ${ticketId}` };
    if (record.submitting || record.locked) return { kind: "ignored" };
    if (!record.doc.options.includes(decision)) {
      record.error = `server does not offer ${decision} for this ticket`;
      return { kind: "rejected", detail: record.error };
    }

    let value: Record<string, unknown> | null;
    try {
      value = decisionValue(decision, comment);
    } catch (err) {
      record.error = (err as Error).message;
      return { kind: "rejected", detail: record.error };
    }

    record.submitting = true;
    record.error = null;
    try {
      const response = await client.decide(ticketId, decision, value);
      record.doc = response.ticket;
      record.locked = true;
      return { kind: "resolved", run: response.run };
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        record.locked = true;
        return { kind: "conflict" };
      }
      const detail = err instanceof ApiError ? err.detail : String(err);
      record.error = detail;
      return {
        kind: "rejected",
        detail,
        status: err instanceof ApiError ? err.status : undefined,
      };
    } finally {
      record.submitting = false;
    }
  }
}
