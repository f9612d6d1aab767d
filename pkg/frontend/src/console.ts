/**
 * Console controller: holds the selected range, fetches API data, and exposes
 * rendered views. The selected range drives reports, charts, and the chat
 * session alike, so the conversation always refers to the visible data.
 */

import { ApiClient, ApiError, type SessionView, type TimeRange } from "./api.js";
import {
  renderBarChart,
  renderChatHistory,
  renderErrorBanner,
  renderReportList,
  renderStatsSummary,
} from "./render.js";

export type ViewResult =
  | { kind: "ok"; html: string }
  | { kind: "error"; html: string; status: number };

function errorView(err: unknown): ViewResult {
  if (err instanceof ApiError) {
    return { kind: "error", html: renderErrorBanner(err.detail), status: err.status };
  }
  const message = err instanceof Error ? err.message : "unexpected failure";
  return { kind: "error", html: renderErrorBanner(message), status: 0 };
}

export class ConsoleController {
  private range: TimeRange = {};
  private sessionId: string | null = null;
  private chatInFlight = false;

  constructor(private readonly api: ApiClient) {}

  /** Changing the range invalidates the session pinned to the old range. */
  setRange(range: TimeRange): void {
    this.range = { ...range };
    this.sessionId = null;
  }

  getRange(): TimeRange {
    return { ...this.range };
  }

  async loadReports(): Promise<ViewResult> {
    try {
      const records = await this.api.reports(this.range);
      return { kind: "ok", html: renderReportList(records) };
    } catch (err) {
      return errorView(err);
    }
  }

  async loadStatsSummary(): Promise<ViewResult> {
    try {
      const stats = await this.api.stats(this.range);
      return { kind: "ok", html: renderStatsSummary(stats) };
    } catch (err) {
      return errorView(err);
    }
  }

  async loadChart(
    name: "violations-by-crosswalk" | "day-night" | "weather",
  ): Promise<ViewResult> {
    try {
      const chart = await this.api.chart(name, this.range);
      return { kind: "ok", html: renderBarChart(chart) };
    } catch (err) {
      return errorView(err);
    }
  }

  private async ensureSession(): Promise<string> {
    if (this.sessionId === null) {
      const created = await this.api.createSession(this.range);
      this.sessionId = created.session_id;
    }
    return this.sessionId;
  }

  /**
   * Send one analyst question. Blank questions are rejected locally without a
   * request; only one chat request may be in flight per session.
   */
  async ask(question: string): Promise<ViewResult> {
    if (!question.trim()) {
      return {
        kind: "error",
        html: renderErrorBanner("Enter a question before sending."),
        status: 0,
      };
    }
    if (this.chatInFlight) {
      return {
        kind: "error",
        html: renderErrorBanner("A question is already being answered."),
        status: 0,
      };
    }
    this.chatInFlight = true;
    try {
      const sessionId = await this.ensureSession();
      await this.api.sendMessage(sessionId, question);
      return this.loadChat();
    } catch (err) {
      return errorView(err);
    } finally {
      this.chatInFlight = false;
    }
  }

  async loadChat(): Promise<ViewResult> {
    try {
      if (this.sessionId === null) {
        const empty: SessionView = {
          session_id: "",
          range_start: this.range.from ?? null,
          range_end: this.range.to ?? null,
          intersection: this.range.intersection ?? null,
          messages: [],
        };
        return { kind: "ok", html: renderChatHistory(empty) };
      }
      const session = await this.api.session(this.sessionId);
      return { kind: "ok", html: renderChatHistory(session) };
    } catch (err) {
      return errorView(err);
    }
  }
}

export { ApiClient, ApiError };
