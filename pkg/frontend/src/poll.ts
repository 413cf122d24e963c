/**
 * The console's single polling loop.
 *
 * One cycle fetches tickets, the run list, and the selected run's
 * snapshot, then commits all of it at once; a failed cycle leaves the
 * previous views untouched (frozen behind a banner rather than torn).
 * At most one cycle is in flight at any time.
 */
import { ApiError, type ServiceClient } from "./api.js";
import { TicketQueue, type SubmitOutcome } from "./tickets.js";
import type { DecisionName, RunListItem, RunSnapshot } from "./types.js";

export const DEFAULT_POLL_INTERVAL_MS = 2000;

/** Consecutive failed polls before the views are flagged as stale. */
export const STALE_AFTER_MISSES = 3;

export interface ConsoleState {
  /** False once a poll dies at the network level (service unreachable). */
  connected: boolean;
  /** True after any 401; cleared by the next authorized response. */
  authFailed: boolean;
  missedPolls: number;
  stale: boolean;
  lastSyncAt: number | null;
  runs: RunListItem[];
  selectedRunId: string | null;
  selectedRun: RunSnapshot | null;
}

export interface PollerOptions {
  intervalMs?: number;
  onChange?: (state: ConsoleState) => void;
  now?: () => number;
}

export class Poller {
  readonly state: ConsoleState = {
    connected: true,
    authFailed: false,
    missedPolls: 0,
    stale: false,
    lastSyncAt: null,
    runs: [],
    selectedRunId: null,
    selectedRun: null,
  };

  private readonly client: ServiceClient;
  private readonly queue: TicketQueue;
  private readonly intervalMs: number;
  private readonly onChange?: (state: ConsoleState) => void;
  private readonly now: () => number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private followUp = false;

  constructor(client: ServiceClient, queue: TicketQueue, options: PollerOptions = {}) {
    this.client = client;
    this.queue = queue;
    this.intervalMs = options.intervalMs ?? DEFAULT_POLL_INTERVAL_MS;
    this.onChange = options.onChange;
    this.now = options.now ?? (() => Date.now());
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.tick();
    }, this.intervalMs);
    void this.tick();
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Refresh out of band (after a decision, a 409, or a run selection). */
  async pollNow(): Promise<void> {
    if (this.inFlight) {
      this.followUp = true;
      return;
    }
    await this.cycle();
  }

  selectRun(runId: string | null): void {
    this.state.selectedRunId = runId;
    if (runId === null) {
      this.state.selectedRun = null;
      this.emit();
      return;
    }
    void this.pollNow();
  }

  /**
   * Route an operator decision through the queue's one-shot guard and
   * fold the server's answer back into the views.
   */
  async submit(
    ticketId: string,
    decision: DecisionName,
    comment: string,
  ): Promise<SubmitOutcome> {
    const outcome = await this.queue.submit(this.client, ticketId, decision, comment);
    if (outcome.kind === "resolved") {
      if (outcome.run.run_id === this.state.selectedRunId) {
        this.state.selectedRun = outcome.run;
      }
      this.emit();
      void this.pollNow();
    } else if (outcome.kind === "conflict") {
      // Someone else decided first; pull the server's version of events.
      void this.pollNow();
    } else if (outcome.kind === "rejected") {
      if (outcome.status === 401) this.state.authFailed = true;
      this.emit();
    }
    return outcome;
  }

  private async tick(): Promise<void> {
    if (this.inFlight) return;
    await this.cycle();
  }

  private async cycle(): Promise<void> {
    this.inFlight = true;
    try {
      const tickets = await this.client.listTickets();
      const runs = await this.client.listRuns();
      const selected = this.state.selectedRunId
        ? await this.client.getRun(this.state.selectedRunId)
        : null;

      this.queue.ingest(tickets, this.now());
      this.state.runs = runs;
      this.state.selectedRun = selected;
      this.state.connected = true;
      this.state.authFailed = false;
      this.state.missedPolls = 0;
      this.state.stale = false;
      this.state.lastSyncAt = this.now();
    } catch (err) {
      this.state.missedPolls += 1;
      this.state.stale = this.state.missedPolls >= STALE_AFTER_MISSES;
      if (err instanceof ApiError) {
        if (err.status === 401) this.state.authFailed = true;
      } else {
        this.state.connected = false;
      }
    } finally {
      this.inFlight = false;
    }
    this.emit();
    if (this.followUp) {
      this.followUp = false;
      await this.cycle();
    }
  }

  private emit(): void {
    this.onChange?.(this.state);
  }
}
