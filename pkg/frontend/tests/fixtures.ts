/** Canned API payloads and a scriptable fetch stub for the console tests. */

import type {
  ChartResponse,
  FetchLike,
  ReportRecord,
  SessionView,
  StatsResponse,
} from "../src/api.js";

export function makeReport(hour: number, overrides: Partial<ReportRecord> = {}): ReportRecord {
  const start = `2024-06-02T${String(8 + hour).padStart(2, "0")}:00:00`;
  const end = `2024-06-02T${String(9 + hour).padStart(2, "0")}:00:00`;
  return {
    intersection_id: "central-florida-alafaya",
    hour_start: start,
    hour_end: end,
    weather_class: "NONE",
    counts: { pedestrians: 15, violations: 0, conflicts: 0 },
    per_crosswalk: {
      A: { crossings: 15, violations: 0 },
      B: { crossings: 0, violations: 0 },
    },
    day: { day_violations: 0, night_violations: 0 },
    partial: false,
    text:
      "On June 2, 2024, between 08:00 am and 09:00 am, at Central Florida Blvd " +
      "and N Alafaya Trail, Orlando, FL, clear weather, 15 pedestrians crossed " +
      "with 0 crossing violations and 0 pedestrian-vehicle conflicts.",
    source: "template",
    ...overrides,
  };
}

export const FIFTEEN_REPORTS: ReportRecord[] = Array.from({ length: 15 }, (_, i) =>
  makeReport(i),
);

export const STATS_FIXTURE: StatsResponse = {
  total_pedestrians: 116,
  total_violations: 15,
  total_conflicts: 17,
  per_crosswalk: {
    A: { crossings: 11, violations: 2, violation_pct: 18.2 },
    B: { crossings: 18, violations: 13, violation_pct: 72.2 },
  },
  day_pct: 24,
  night_pct: 76,
  violations_by_weather: { NONE: 9, LIGHT: 4, MODERATE: 2 },
  weather_pct: { NONE: 60, LIGHT: 26.7, MODERATE: 13.3 },
  hourly: FIFTEEN_REPORTS.map((r) => ({
    hour_start: r.hour_start,
    pedestrians: r.counts.pedestrians,
    violations: r.counts.violations,
    conflicts: r.counts.conflicts,
  })),
};

export const CROSSWALK_CHART: ChartResponse = {
  title: "Crossing violation percentage by crosswalk",
  labels: ["A", "B"],
  values: [18.2, 72.2],
};

export const DAY_NIGHT_CHART: ChartResponse = {
  title: "Crossing violations by time of day",
  labels: ["day", "night"],
  values: [24, 76],
};

interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/**
 * Scriptable fetch: routes are matched by "METHOD pathname" prefix; every
 * request is recorded so tests can assert exactly what went over the wire.
 */
export class FakeBackend {
  readonly requests: RecordedRequest[] = [];
  private readonly routes = new Map<string, (req: RecordedRequest) => { status: number; body: unknown }>();

  route(key: string, handler: (req: RecordedRequest) => { status: number; body: unknown }): void {
    this.routes.set(key, handler);
  }

  json(key: string, body: unknown, status = 200): void {
    this.route(key, () => ({ status, body }));
  }

  requestsFor(key: string): RecordedRequest[] {
    return this.requests.filter((r) => `${r.method} ${new URL(r.url).pathname}` === key);
  }

  fetch: FetchLike = (url, init) => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : null;
    const request: RecordedRequest = { url, method, body };
    this.requests.push(request);
    const key = `${method} ${new URL(url).pathname}`;
    const handler = this.routes.get(key);
    if (!handler) {
      return Promise.resolve(jsonResponse(404, { detail: `no route for ${key}` }));
    }
    const { status, body: responseBody } = handler(request);
    return Promise.resolve(jsonResponse(status, responseBody));
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Stateful chat backend: one session at a time, echoing a rule-based answer. */
export function wireChatBackend(backend: FakeBackend, provenance = "rule-based"): void {
  let counter = 0;
  const sessions = new Map<string, SessionView>();

  backend.route("POST /sessions", (req) => {
    counter += 1;
    const id = `session-${counter}`;
    const body = req.body as { from: string | null; to: string | null; intersection: string | null };
    sessions.set(id, {
      session_id: id,
      range_start: body.from,
      range_end: body.to,
      intersection: body.intersection,
      messages: [],
    });
    return { status: 200, body: { session_id: id } };
  });

  for (let i = 1; i <= 4; i += 1) {
    const id = `session-${i}`;
    backend.route(`POST /sessions/${id}/messages`, (req) => {
      const session = sessions.get(id);
      if (!session) return { status: 404, body: { detail: `unknown session ${id}` } };
      const question = (req.body as { question: string }).question;
      const answer = `Summary for: ${question}`;
      session.messages.push(
        { role: "user", content: question, timestamp: "2024-06-03T09:00:00" },
        { role: "assistant", content: answer, timestamp: "2024-06-03T09:00:01", provenance },
      );
      return { status: 200, body: { answer, provenance } };
    });
    backend.route(`GET /sessions/${id}`, () => {
      const session = sessions.get(id);
      if (!session) return { status: 404, body: { detail: `unknown session ${id}` } };
      return { status: 200, body: session };
    });
  }
}
