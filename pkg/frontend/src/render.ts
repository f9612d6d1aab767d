/**
 * Pure HTML renderers. Every function maps API payloads to markup strings and
 * performs no arithmetic on the data: displayed numbers are the API values,
 * stringified verbatim.
 */

import type {
  ChartResponse,
  ReportRecord,
  SessionView,
  StatsResponse,
} from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** The exact text shown for an API number: no rounding, no reformatting. */
export function displayNumber(value: number): string {
  return String(value);
}

export function renderErrorBanner(message: string): string {
  return (
    `<div class="error-banner" role="alert">` +
    `<span class="error-message">${escapeHtml(message)}</span>` +
    `<button class="retry" data-action="retry">Retry</button>` +
    `</div>`
  );
}

export function renderEmptyState(what: string): string {
  return `<div class="empty-state">No ${escapeHtml(what)} in the selected range.</div>`;
}

function weatherBadge(weatherClass: string | null): string {
  const label = weatherClass ?? "unknown";
  return `<span class="badge badge-weather">${escapeHtml(label)}</span>`;
}

export function renderReportRow(record: ReportRecord): string {
  const badges = [
    `<span class="badge badge-violations">${displayNumber(record.counts.violations)} violations</span>`,
    `<span class="badge badge-conflicts">${displayNumber(record.counts.conflicts)} conflicts</span>`,
    weatherBadge(record.weather_class),
  ];
  if (record.partial) {
    badges.push(`<span class="badge badge-partial">partial hour</span>`);
  }
  return (
    `<li class="report-row" data-hour="${escapeHtml(record.hour_start)}">` +
    `<p class="report-text">${escapeHtml(record.text)}</p>` +
    `<div class="report-badges">${badges.join("")}</div>` +
    `</li>`
  );
}

export function renderReportList(records: ReportRecord[]): string {
  if (records.length === 0) {
    return renderEmptyState("reports");
  }
  return `<ul class="report-list">${records.map(renderReportRow).join("")}</ul>`;
}

export function renderBarChart(chart: ChartResponse, unit = "%"): string {
  const max = chart.values.reduce((a, b) => Math.max(a, b), 0);
  const bars = chart.labels
    .map((label, i) => {
      const value = chart.values[i] ?? 0;
      const width = max > 0 ? (value / max) * 100 : 0;
      return (
        `<div class="bar-row">` +
        `<span class="bar-label">${escapeHtml(label)}</span>` +
        `<span class="bar" style="width: ${width.toFixed(1)}%"></span>` +
        `<span class="bar-value">${displayNumber(value)}${unit}</span>` +
        `</div>`
      );
    })
    .join("");
  return (
    `<figure class="chart">` +
    `<figcaption>${escapeHtml(chart.title)}</figcaption>` +
    `<div class="bars">${bars}</div>` +
    `</figure>`
  );
}

export function renderStatsSummary(stats: StatsResponse): string {
  return (
    `<dl class="stats-summary">` +
    `<dt>Pedestrians</dt><dd>${displayNumber(stats.total_pedestrians)}</dd>` +
    `<dt>Crossing violations</dt><dd>${displayNumber(stats.total_violations)}</dd>` +
    `<dt>Conflicts</dt><dd>${displayNumber(stats.total_conflicts)}</dd>` +
    `</dl>`
  );
}

export function renderChatHistory(session: SessionView): string {
  if (session.messages.length === 0) {
    return `<div class="chat-empty">Ask a question about the selected reports.</div>`;
  }
  const bubbles = session.messages
    .map((message) => {
      const provenance =
        message.role === "assistant" && message.provenance
          ? `<span class="badge badge-provenance">${escapeHtml(message.provenance)}</span>`
          : "";
      return (
        `<div class="chat-message chat-${escapeHtml(message.role)}">` +
        `<p>${escapeHtml(message.content)}</p>` +
        provenance +
        `</div>`
      );
    })
    .join("");
  return `<div class="chat-history">${bubbles}</div>`;
}
