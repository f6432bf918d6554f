/**
 * Thin typed client for the ranking service's REST API. All traffic the
 * UI generates goes through this module; nothing else talks to the
 * network.
 */

export type SortMode = "date" | "personal";

export type EventKind = "abstract_expand" | "pdf_open";

export interface Paper {
  id: string;
  title: string;
  abstract: string;
  submitted: string;
  authors: string[];
  categories: string[];
  /** Present only in personally sorted listings. */
  score?: number;
}

export interface ListingResponse {
  papers: Paper[];
  total: number;
}

export interface ListingQuery {
  sort?: SortMode;
  /** Inclusive ISO dates; a single day is from === to. */
  from?: string;
  to?: string;
  categories?: readonly string[];
  limit?: number;
  offset?: number;
}

export interface OutgoingEvent {
  paper_id: string;
  kind: EventKind;
  timestamp: string;
}

export interface EventAck {
  status: "created" | "duplicate-ignored";
  id?: number;
}

export interface CategoriesResponse {
  /** Categories the account follows. */
  categories: string[];
  /** Every category the service knows about. */
  available: string[];
}

/** The subset of the fetch Response surface the client relies on. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  statusText: string;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<ResponseLike>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/**
 * Formats a timestamp as ISO-8601 with an explicit +00:00 offset. The
 * service rejects the bare "Z" suffix, so never send Date.toISOString()
 * output as-is.
 */
export function isoTimestamp(at: Date): string {
  return at.toISOString().replace(/Z$/, "+00:00");
}

export class ApiClient {
  private token: string | null = null;

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  get authenticated(): boolean {
    return this.token !== null;
  }

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token !== null) headers["Authorization"] = `Bearer ${this.token}`;
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let detail = res.statusText || `HTTP ${res.status}`;
      try {
        const data = (await res.json()) as { detail?: unknown };
        if (typeof data?.detail === "string") detail = data.detail;
      } catch {
        // keep the status text when the error body is not JSON
      }
      throw new ApiError(res.status, detail);
    }
    return res.json();
  }

  async register(name: string, password: string): Promise<void> {
    await this.request("POST", "/v1/users", { name, password });
  }

  /** Logs in and remembers the bearer token for subsequent calls. */
  async login(name: string, password: string): Promise<void> {
    const out = (await this.request("POST", "/v1/sessions", { name, password })) as {
      token: string;
    };
    this.token = out.token;
  }

  async categories(): Promise<CategoriesResponse> {
    return (await this.request("GET", "/v1/users/me/categories")) as CategoriesResponse;
  }

  async setCategories(categories: readonly string[]): Promise<string[]> {
    const out = (await this.request("PUT", "/v1/users/me/categories", {
      categories: [...categories],
    })) as { categories: string[] };
    return out.categories;
  }

  async listPapers(query: ListingQuery = {}): Promise<ListingResponse> {
    const params = new URLSearchParams();
    if (query.sort !== undefined) params.set("sort", query.sort);
    if (query.from !== undefined) params.set("from", query.from);
    if (query.to !== undefined) params.set("to", query.to);
    if (query.categories !== undefined) params.set("categories", query.categories.join(","));
    if (query.limit !== undefined) params.set("limit", String(query.limit));
    if (query.offset !== undefined) params.set("offset", String(query.offset));
    const qs = params.toString();
    return (await this.request("GET", `/v1/papers${qs ? `?${qs}` : ""}`)) as ListingResponse;
  }

  async postEvent(event: OutgoingEvent): Promise<EventAck> {
    return (await this.request("POST", "/v1/events", event)) as EventAck;
  }

  async related(paperId: string, n?: number): Promise<Paper[]> {
    const qs = n !== undefined ? `?n=${n}` : "";
    const out = (await this.request(
      "GET",
      `/v1/papers/${encodeURIComponent(paperId)}/related${qs}`,
    )) as { papers: Paper[] };
    return out.papers;
  }
}
