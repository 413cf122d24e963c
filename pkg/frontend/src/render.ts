/**
 * HTML renderers. Every function maps state to a markup string; the DOM
 * wiring lives in app.ts. Keeping these pure makes the views testable
 * without a browser.
 */
import { isTerminal, stageColumns, standbyCards, statusClass } from "./dag.js";
import type { ConsoleState } from "./poll.js";
import type { TicketQueue, TicketRecord } from "./tickets.js";
import type { RunSnapshot } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function formatAge(ms: number): string {
  const seconds = Math.floor(ms / 1000);
  if (seconds < 60) return `${seconds}s`;
  const minutes = Math.floor(seconds / 60);
  if (minutes < 60) return `${minutes}m ${seconds % 60}s`;
  return `${Math.floor(minutes / 60)}h ${minutes % 60}m`;
}

function formatElapsed(ms: number | null): string {
  if (ms === null) return "";
  return ms >= 1000 ? `${(ms / 1000).toFixed(1)}s` : `${ms}ms`;
}

export function renderBanners(state: ConsoleState): string {
  const banners: string[] = [];
  if (!state.connected) {
    banners.push(`<div class="banner banner-down">Service unreachable; showing last known data.</div>`);
  }
  if (state.authFailed) {
    banners.push(`<div class="banner banner-auth">Authorization failed (401); check the bearer token.</div>`);
  }
  if (state.stale) {
    banners.push(`<div class="banner banner-stale">Data is stale: ${state.missedPolls} polls missed.</div>`);
  }
  return banners.join("\n");
}

/** One open-ticket card: identity, failure summary, age, decision form. */
export function renderTicketCard(record: TicketRecord, now: number): string {
  const doc = record.doc;
  const age = formatAge(Math.max(0, now - record.firstSeenAt));
  const disabled = record.submitting || record.locked || doc.options.length === 0;
  const options = doc.options
    .map((name) => {
      const selected = name === record.draftDecision ? " selected" : "";
      return `<option value="${escapeHtml(name)}"${selected}>${escapeHtml(name)}</option>`;
    })
    .join("");
  const error = record.error
    ? `<p class="ticket-error">${escapeHtml(record.error)}</p>`
    : "";
  return `<article class="ticket" data-ticket="${escapeHtml(doc.id)}">
  <header>
    <span class="ticket-id">${escapeHtml(doc.id)}</span>
    <span class="ticket-age" title="first seen by this console">${age}</span>
  </header>
  <p class="ticket-where">run <code>${escapeHtml(doc.run)}</code> · node <code>${escapeHtml(doc.node)}</code></p>
  <p class="ticket-reason">${escapeHtml(doc.reason)}</p>
  ${error}
  <div class="ticket-form">
    <select data-role="decision" data-ticket="${escapeHtml(doc.id)}"${disabled ? " disabled" : ""}>${options}</select>
    <textarea data-role="comment" data-ticket="${escapeHtml(doc.id)}" rows="2"
      placeholder="comment (JSON object for skip_with_value)"${disabled ? " disabled" : ""}>${escapeHtml(record.draftComment)}</textarea>
    <button data-role="submit" data-ticket="${escapeHtml(doc.id)}"${disabled ? " disabled" : ""}>
      ${record.submitting ? "sending…" : "submit decision"}
    </button>
  </div>
</article>`;
}

/** A resolved ticket keeps its decision and any comment on display. */
export function renderResolvedCard(record: TicketRecord): string {
  const doc = record.doc;
  const value =
    doc.value && Object.keys(doc.value).length > 0
      ? `<pre class="ticket-value">${escapeHtml(JSON.stringify(doc.value, null, 1))}</pre>`
      : "";
  return `<article class="ticket ticket-resolved" data-ticket="${escapeHtml(doc.id)}">
  <header>
    <span class="ticket-id">${escapeHtml(doc.id)}</span>
    <span class="ticket-decision">${escapeHtml(doc.decision ?? "?")}</span>
  </header>
  <p class="ticket-where">run <code>${escapeHtml(doc.run)}</code> · node <code>${escapeHtml(doc.node)}</code></p>
  <p class="ticket-reason">${escapeHtml(doc.reason)}</p>
  ${value}
</article>`;
}

export function renderQueues(queue: TicketQueue, now: number): string {
  const open = queue.open();
  const resolved = queue.resolved();
  const openHtml = open.length
    ? open.map((r) => renderTicketCard(r, now)).join("\n")
    : `<p class="empty">No open tickets.</p>`;
  const resolvedHtml = resolved.length
    ? resolved.map((r) => renderResolvedCard(r)).join("\n")
    : `<p class="empty">Nothing resolved yet.</p>`;
  return `<section class="pane">
  <h2>Open tickets <span class="count">${open.length}</span></h2>
  ${openHtml}
</section>
<section class="pane">
  <h2>Resolved</h2>
  ${resolvedHtml}
</section>`;
}

export function renderRunList(state: ConsoleState): string {
  if (state.runs.length === 0) return `<p class="empty">No runs yet.</p>`;
  const rows = state.runs
    .map((run) => {
      const active = run.run_id === state.selectedRunId ? " run-active" : "";
      const tickets = run.open_tickets > 0 ? ` · ${run.open_tickets} open` : "";
      return `<button class="run-row${active}" data-run="${escapeHtml(run.run_id)}">
  <code>${escapeHtml(run.run_id)}</code>
  <span class="run-status status-${escapeHtml(run.status)}">${escapeHtml(run.status)}</span>
  <span class="run-spec">${escapeHtml(run.spec_id)}${tickets}</span>
</button>`;
    })
    .join("\n");
  return rows;
}

/** Stage-column DAG plus, once the run is terminal, the result panel. */
export function renderRunView(run: RunSnapshot): string {
  const columns = stageColumns(run)
    .map((column) => {
      const cards = column.nodes
        .map((node) => {
          const fallback = node.viaFallback ? `<span class="via-fallback">fallback</span>` : "";
          const attempts = node.attempts > 1 ? ` ×${node.attempts}` : "";
          const elapsed = formatElapsed(node.elapsedMs);
          return `<div class="node-card ${statusClass(node.status)}" data-node="${escapeHtml(node.id)}">
  <span class="node-id">${escapeHtml(node.id)}</span>
  <span class="node-meta">${escapeHtml(node.status)}${attempts} ${elapsed}</span>
  ${fallback}
</div>`;
        })
        .join("\n");
      return `<div class="stage-column" data-stage="${column.index}">
  <div class="stage-label">stage ${column.index + 1}</div>
  ${cards}
</div>`;
    })
    .join("\n");

  const standby = standbyCards(run);
  const standbyHtml = standby.length
    ? `<div class="standby">standby: ${standby
        .map((n) => `<span class="${statusClass(n.status)}">${escapeHtml(n.id)}</span>`)
        .join(", ")}</div>`
    : "";

  let result = "";
  if (isTerminal(run)) {
    const rows = Object.entries(run.fields)
      .map(
        ([key, value]) =>
          `<tr><td>${escapeHtml(key)}</td><td>${escapeHtml(JSON.stringify(value))}</td></tr>`,
      )
      .join("\n");
    const makespan = run.makespan_ms !== null ? `${run.makespan_ms} ms` : "n/a";
    result = `<div class="result-panel">
  <h3>Result · ${escapeHtml(run.status)} · makespan ${makespan}</h3>
  <table>${rows}</table>
</div>`;
  }

  return `<div class="run-view" data-run="${escapeHtml(run.run_id)}">
  <h2><code>${escapeHtml(run.run_id)}</code> <span class="run-status status-${escapeHtml(run.status)}">${escapeHtml(run.status)}</span></h2>
  <div class="dag">${columns}</div>
  ${standbyHtml}
  ${result}
</div>`;
}
