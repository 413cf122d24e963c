/**
 * End-to-end check against a live service process.
 *
 * Spawns the Python run service, forces an escalation in an optimized
 * wire-transfer run, and drives the same console code paths the browser
 * uses: the poller must surface the ticket within one 2 s interval, a
 * retry decision must resume the run, and the finished DAG view must
 * show the two parallel clusters.
 */
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ServiceClient } from "../../src/api.js";
import { parallelClusters, stageColumns } from "../../src/dag.js";
import { Poller } from "../../src/poll.js";
import { renderQueues, renderRunView } from "../../src/render.js";
import { TicketQueue } from "../../src/tickets.js";

const TOKEN = "console-e2e";
const PORT = 8700 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;
const HEADERS = {
  Authorization: `Bearer ${TOKEN}`,
  "Content-Type": "application/json",
};

let service: ChildProcess | null = null;
let dataDir = "";
let serviceLog = "";

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitUntil(
  predicate: () => boolean,
  timeoutMs: number,
  label: string,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${label}`);
    await sleep(50);
  }
}

async function createEscalatedRun(seed: number): Promise<Record<string, any>> {
  const resp = await fetch(`${BASE}/runs`, {
    method: "POST",
    headers: HEADERS,
    body: JSON.stringify({
      scenario: "wire_transfer",
      variant: "optimized",
      seed,
      inputs: { inject: { payment_execution: { fail_attempts: 4 } } },
    }),
  });
  expect(resp.status).toBe(202);
  return (await resp.json()) as Record<string, any>;
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "console-e2e-"));
  service = spawn(
    "python3",
    [
      "-m",
      "uvicorn",
      "gbpa.service:app_from_env",
      "--factory",
      "--host",
      "127.0.0.1",
      "--port",
      String(PORT),
      "--log-level",
      "warning",
    ],
    {
      env: { ...process.env, GBPA_DATA_DIR: dataDir, GBPA_TOKEN: TOKEN },
      stdio: ["ignore", "pipe", "pipe"],
    },
  );
  service.stdout?.on("data", (chunk) => (serviceLog += String(chunk)));
  service.stderr?.on("data", (chunk) => (serviceLog += String(chunk)));

  const deadline = Date.now() + 45_000;
  for (;;) {
    if (service.exitCode !== null) {
      throw new Error(`service exited early:\n${serviceLog}`);
    }
    try {
      const resp = await fetch(`${BASE}/runs`, { headers: HEADERS });
      if (resp.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service never came up:\n${serviceLog}`);
    }
    await sleep(250);
  }
}, 60_000);

afterAll(() => {
  service?.kill();
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("console against a live service", () => {
  it(
    "surfaces the forced escalation within 2 s, resumes on retry, and shows both parallel clusters",
    async () => {
      const created = await createEscalatedRun(7);
      const createdAt = Date.now();
      expect(created.status).toBe("suspended");
      const runId = created.run_id as string;

      const queue = new TicketQueue();
      const poller = new Poller(
        new ServiceClient({ baseUrl: BASE, token: TOKEN }),
        queue,
      );
      poller.start();
      try {
        await waitUntil(
          () => queue.open().some((r) => r.doc.run === runId),
          2_000,
          "ticket to reach the console",
        );
        expect(Date.now() - createdAt).toBeLessThanOrEqual(2_000);

        const record = queue.open().find((r) => r.doc.run === runId)!;
        expect(record.doc.node).toBe("payment_execution");
        expect(record.doc.options).toContain("retry");

        const outcome = await poller.submit(
          record.doc.id,
          "retry",
          "operator confirmed funds; resuming",
        );
        expect(outcome.kind).toBe("resolved");

        poller.selectRun(runId);
        await waitUntil(
          () => poller.state.selectedRun?.status === "succeeded",
          10_000,
          "run to finish after retry",
        );

        const run = poller.state.selectedRun!;
        expect(parallelClusters(run)).toBe(2);
        expect(stageColumns(run).map((c) => c.nodes.length)).toEqual([1, 4, 2, 1, 1]);
        const attempts = Object.fromEntries(run.nodes.map((n) => [n.id, n.attempts]));
        expect(attempts["payment_execution"]).toBe(5);

        const view = renderRunView(run);
        expect(view.split('class="stage-column"').length - 1).toBe(5);
        expect(view).toContain("result-panel");

        await waitUntil(
          () => queue.resolved().some((r) => r.doc.id === record.doc.id),
          5_000,
          "ticket to land in the resolved pane",
        );
        const panes = renderQueues(queue, Date.now());
        expect(panes).toContain("operator confirmed funds; resuming");
      } finally {
        poller.stop();
      }
    },
    60_000,
  );

  it(
    "aborts with a comment that stays visible in the resolved pane",
    async () => {
      const created = await createEscalatedRun(13);
      const runId = created.run_id as string;

      const queue = new TicketQueue();
      const poller = new Poller(
        new ServiceClient({ baseUrl: BASE, token: TOKEN }),
        queue,
      );
      poller.start();
      try {
        await waitUntil(
          () => queue.open().some((r) => r.doc.run === runId),
          5_000,
          "abort-run ticket",
        );
        const record = queue.open().find((r) => r.doc.run === runId)!;

        const outcome = await poller.submit(
          record.doc.id,
          "abort",
          "duplicate wire request",
        );
        expect(outcome.kind).toBe("resolved");
        if (outcome.kind === "resolved") {
          expect(outcome.run.status).toBe("aborted");
        }

        // One decision per ticket: a second attempt must not leave the client.
        const again = await poller.submit(record.doc.id, "retry", "");
        expect(again.kind).toBe("ignored");

        await waitUntil(
          () => queue.resolved().some((r) => r.doc.id === record.doc.id),
          5_000,
          "aborted ticket in resolved pane",
        );
        const panes = renderQueues(queue, Date.now());
        expect(panes).toContain("duplicate wire request");
        expect(panes).toContain("abort");
      } finally {
        poller.stop();
      }
    },
    60_000,
  );

  it(
    "raises the auth banner when the token is wrong",
    async () => {
      const poller = new Poller(
        new ServiceClient({ baseUrl: BASE, token: "wrong-token" }),
        new TicketQueue(),
      );
      await poller.pollNow();
      expect(poller.state.authFailed).toBe(true);
      expect(poller.state.connected).toBe(true);
    },
    30_000,
  );
});
