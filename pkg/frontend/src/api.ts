// Thin typed client over the regkg service endpoints.

import type {
  HealthPayload,
  QueryResponse,
  SectionPayload,
  StatsPayload,
  SubgraphPayload,
} from "./types.js";

export class ServiceError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ServiceError";
  }
}

export interface ClientOptions {
  baseUrl: string;
  apiToken?: string;
  fetchImpl?: typeof fetch;
}

export class ServiceClient {
  private readonly baseUrl: string;
  private readonly apiToken?: string;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.apiToken = options.apiToken;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  private headers(json = false): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.apiToken) headers["Authorization"] = `Bearer ${this.apiToken}`;
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ServiceError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  healthz(): Promise<HealthPayload> {
    return this.request<HealthPayload>("/healthz");
  }

  query(question: string, k = 5, hops = 0): Promise<QueryResponse> {
    return this.request<QueryResponse>("/query", {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ question, k, hops, mode: "extractive" }),
    });
  }

  subgraph(seeds: string[], hops = 1): Promise<SubgraphPayload> {
    const params = new URLSearchParams();
    for (const seed of seeds) params.append("seed", seed);
    params.set("hops", String(hops));
    return this.request<SubgraphPayload>(`/subgraph?${params.toString()}`, {
      headers: this.headers(),
    });
  }

  section(id: string): Promise<SectionPayload> {
    const encoded = id.split("/").map(encodeURIComponent).join("/");
    return this.request<SectionPayload>(`/section/${encoded}`, { headers: this.headers() });
  }

  stats(mode: "with" | "without"): Promise<StatsPayload> {
    return this.request<StatsPayload>(`/stats?mode=${mode}`, { headers: this.headers() });
  }

  sectionUrl(id: string): string {
    const encoded = id.split("/").map(encodeURIComponent).join("/");
    return `${this.baseUrl}/section/${encoded}`;
  }
}
