/**
 * Typed client for the monitoring service HTTP API.
 *
 * All numbers rendered anywhere in the console originate from these response
 * payloads; the console never recomputes a statistic client-side.
 */

export interface ReportRecord {
  intersection_id: string;
  hour_start: string;
  hour_end: string;
  weather_class: string | null;
  counts: { pedestrians: number; violations: number; conflicts: number };
  per_crosswalk: Record<string, { crossings: number; violations: number }>;
  day: { day_violations: number; night_violations: number };
  partial: boolean;
  text: string;
  source: string;
}

export interface CrosswalkStats {
  crossings: number;
  violations: number;
  violation_pct: number;
}

export interface StatsResponse {
  total_pedestrians: number;
  total_violations: number;
  total_conflicts: number;
  per_crosswalk: Record<string, CrosswalkStats>;
  day_pct: number;
  night_pct: number;
  violations_by_weather: Record<string, number>;
  weather_pct: Record<string, number>;
  hourly: Array<{
    hour_start: string;
    pedestrians: number;
    violations: number;
    conflicts: number;
  }>;
}

export interface ChartResponse {
  title: string;
  labels: string[];
  values: number[];
}

export interface MessageResponse {
  answer: string;
  provenance: "model" | "rule-based";
}

export interface SessionView {
  session_id: string;
  range_start: string | null;
  range_end: string | null;
  intersection: string | null;
  messages: Array<{
    role: string;
    content: string;
    timestamp: string;
    provenance?: string;
  }>;
}

export interface TimeRange {
  from?: string;
  to?: string;
  intersection?: string;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`API error ${status}: ${detail}`);
  }
}

function rangeQuery(range: TimeRange): string {
  const params = new URLSearchParams();
  if (range.from) params.set("from", range.from);
  if (range.to) params.set("to", range.to);
  if (range.intersection) params.set("intersection", range.intersection);
  const qs = params.toString();
  return qs ? `?${qs}` : "";
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : "network failure");
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // keep the status text when the error body is not JSON
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; reports: number }> {
    return this.request("/healthz");
  }

  reports(range: TimeRange): Promise<ReportRecord[]> {
    return this.request(`/reports${rangeQuery(range)}`);
  }

  stats(range: TimeRange): Promise<StatsResponse> {
    return this.request(`/stats${rangeQuery(range)}`);
  }

  chart(
    name: "violations-by-crosswalk" | "day-night" | "weather",
    range: TimeRange,
  ): Promise<ChartResponse> {
    return this.request(`/charts/${name}${rangeQuery(range)}`);
  }

  createSession(range: TimeRange): Promise<{ session_id: string }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        from: range.from ?? null,
        to: range.to ?? null,
        intersection: range.intersection ?? null,
      }),
    });
  }

  sendMessage(sessionId: string, question: string): Promise<MessageResponse> {
    return this.request(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ question }),
    });
  }

  session(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${sessionId}`);
  }
}
