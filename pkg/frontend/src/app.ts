/**
 * Browser entry point: config form, event delegation, and repaint loop.
 * All rendering goes through the pure functions in render.ts; all server
 * traffic goes through the one Poller.
 */
import { ServiceClient } from "./api.js";
import { Poller } from "./poll.js";
import { renderBanners, renderQueues, renderRunList, renderRunView } from "./render.js";
import { TicketQueue } from "./tickets.js";
import type { DecisionName } from "./types.js";

let poller: Poller | null = null;
let queue: TicketQueue | null = null;

const lastHtml: Record<string, string> = {};

function setHtml(id: string, html: string): void {
  if (lastHtml[id] === html) return;
  const el = document.getElementById(id);
  if (!el) return;
  lastHtml[id] = html;
  el.innerHTML = html;
}

function repaint(): void {
  if (!poller || !queue) return;
  const state = poller.state;
  const now = Date.now();

  // A repaint may replace the element the operator is typing in; remember
  // where focus was and put it back afterwards.
  const active = document.activeElement as HTMLElement | null;
  const focusRole = active?.dataset?.role;
  const focusTicket = active?.dataset?.ticket;
  const selection =
    active instanceof HTMLTextAreaElement
      ? { start: active.selectionStart, end: active.selectionEnd }
      : null;

  setHtml("banners", renderBanners(state));
  setHtml("tickets", renderQueues(queue, now));
  setHtml("runs", renderRunList(state));
  setHtml(
    "run-view",
    state.selectedRun
      ? renderRunView(state.selectedRun)
      : `<p class="empty">Select a run to see its stages.</p>`,
  );

  if (focusRole && focusTicket) {
    const replacement = document.querySelector<HTMLElement>(
      `[data-role="${focusRole}"][data-ticket="${focusTicket}"]`,
    );
    if (replacement) {
      replacement.focus();
      if (selection && replacement instanceof HTMLTextAreaElement) {
        replacement.setSelectionRange(selection.start, selection.end);
      }
    }
  }
}

function connect(): void {
  const baseUrl = (document.getElementById("base-url") as HTMLInputElement).value.trim();
  const token = (document.getElementById("token") as HTMLInputElement).value.trim();
  if (!baseUrl) return;

  poller?.stop();
  Object.keys(lastHtml).forEach((k) => delete lastHtml[k]);
  queue = new TicketQueue();
  poller = new Poller(new ServiceClient({ baseUrl, token }), queue, {
    onChange: () => repaint(),
  });
  poller.start();
  document.getElementById("config")?.classList.add("connected");
}

function onClick(event: Event): void {
  const target = event.target as HTMLElement | null;
  if (!target || !poller || !queue) return;

  const submit = target.closest<HTMLElement>('[data-role="submit"]');
  if (submit?.dataset.ticket) {
    const record = queue.get(submit.dataset.ticket);
    if (record?.draftDecision) {
      void poller.submit(submit.dataset.ticket, record.draftDecision, record.draftComment);
      repaint();
    }
    return;
  }

  const row = target.closest<HTMLElement>("[data-run]");
  if (row?.dataset.run && row.classList.contains("run-row")) {
    const next = row.dataset.run === poller.state.selectedRunId ? null : row.dataset.run;
    poller.selectRun(next);
  }
}

function onInput(event: Event): void {
  const target = event.target as HTMLElement | null;
  if (!target || !queue) return;
  const ticketId = target.dataset.ticket;
  if (!ticketId) return;
  const record = queue.get(ticketId);
  if (!record) return;
  if (target.dataset.role === "comment" && target instanceof HTMLTextAreaElement) {
    record.draftComment = target.value;
  } else if (target.dataset.role === "decision" && target instanceof HTMLSelectElement) {
    record.draftDecision = target.value as DecisionName;
  }
}

document.getElementById("connect")?.addEventListener("click", () => connect());
document.addEventListener("click", onClick);
document.addEventListener("input", onInput);
document.addEventListener("change", onInput);

// Redraw ticket ages between polls without waiting for server data.
setInterval(() => repaint(), 5000);
