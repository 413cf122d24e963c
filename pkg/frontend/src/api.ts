/**
 * Thin fetch client for the run service.
 *
 * Every method is a single documented API call; the console holds no
 * authority beyond what these endpoints grant.
 */
import type {
  DecisionName,
  RunListItem,
  RunSnapshot,
  TicketDoc,
  TicketStateName,
} from "./types.js";

export interface ConsoleConfig {
  baseUrl: string;
  token: string;
}

/** Non-2xx response, carrying the service's {code, detail} body. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  private readonly base: string;
  private readonly token: string;
  private readonly fetchImpl: FetchLike;

  constructor(config: ConsoleConfig, fetchImpl?: FetchLike) {
    this.base = config.baseUrl.replace(/\/+$/, "");
    this.token = config.token;
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    if (json) h["Content-Type"] = "application/json";
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: this.headers(body !== undefined) };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchImpl(`${this.base}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = (await resp.json()) as { detail?: unknown };
        if (typeof parsed.detail === "string") detail = parsed.detail;
      } catch {
        // body was not JSON; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  async listRuns(): Promise<RunListItem[]> {
    const doc = await this.request<{ runs: RunListItem[] }>("GET", "/runs");
    return doc.runs;
  }

  async getRun(runId: string): Promise<RunSnapshot> {
    return this.request<RunSnapshot>("GET", `/runs/${runId}`);
  }

  async listTickets(state?: TicketStateName): Promise<TicketDoc[]> {
    const query = state ? `?state=${state}` : "";
    const doc = await this.request<{ tickets: TicketDoc[] }>("GET", `/tickets${query}`);
    return doc.tickets;
  }

  async decide(
    ticketId: string,
    decision: DecisionName,
    value?: Record<string, unknown> | null,
  ): Promise<{ ticket: TicketDoc; run: RunSnapshot }> {
    return this.request("POST", `/tickets/${ticketId}/decision`, {
      decision,
      value: value ?? null,
    });
  }
}
