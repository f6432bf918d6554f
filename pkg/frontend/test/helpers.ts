/**
 * In-memory stand-in for the ranking service, exposed as a fetch-like
 * function. It records every request, serves a fixed paper listing in
 * a fixed order, acknowledges events with the same per-UTC-day dedup
 * the real service applies, and can simulate being unreachable.
 */

import type { FetchLike, OutgoingEvent, Paper, ResponseLike } from "../src/api.js";

export interface ReceivedEvent extends OutgoingEvent {
  id: number;
}

export class MockServer {
  /** Events the server accepted and stored (dedup applied). */
  stored: ReceivedEvent[] = [];
  /** Every event POST body that reached the server, dup or not. */
  eventPosts: OutgoingEvent[] = [];
  /** Every listing request URL that reached the server. */
  listingUrls: URL[] = [];
  /** When false, every request rejects like a dead connection. */
  online = true;
  /** When true, listing requests answer 500. */
  failListings = false;
  papers: Paper[] = [];
  token = "test-token";

  private nextId = 1;
  private readonly dedup = new Set<string>();

  readonly fetchFn: FetchLike = (url, init) => this.handle(url, init);

  private async handle(url: string, init?: RequestInit): Promise<ResponseLike> {
    if (!this.online) throw new TypeError("network down");
    const parsed = new URL(url, "http://mock.test");
    const method = init?.method ?? "GET";
    const path = parsed.pathname;

    if (method === "POST" && path === "/v1/sessions") {
      return json(200, { token: this.token });
    }
    if (method === "POST" && path === "/v1/users") {
      return json(201, { name: "someone" });
    }
    if (method === "POST" && path === "/v1/events") {
      const body = JSON.parse(String(init?.body)) as OutgoingEvent;
      this.eventPosts.push(body);
      const day = body.timestamp.slice(0, 10);
      const key = `${body.kind}:${body.paper_id}:${day}`;
      if (this.dedup.has(key)) return json(200, { status: "duplicate-ignored" });
      this.dedup.add(key);
      const id = this.nextId++;
      this.stored.push({ ...body, id });
      return json(201, { status: "created", id });
    }
    if (method === "GET" && path === "/v1/papers") {
      this.listingUrls.push(parsed);
      if (this.failListings) return json(500, { detail: "listing backend down" });
      const withScores =
        parsed.searchParams.get("sort") === "personal"
          ? this.papers.map((p, i) => ({ ...p, score: p.score ?? -i }))
          : this.papers.map(({ score: _score, ...rest }) => rest);
      return json(200, { papers: withScores, total: this.papers.length });
    }
    if (method === "GET" && path === "/v1/users/me/categories") {
      return json(200, { categories: ["hep-ph"], available: ["astro-ph", "hep-ph"] });
    }
    return json(404, { detail: `no route for ${method} ${path}` });
  }
}

function json(status: number, body: unknown): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: `HTTP ${status}`,
    json: () => Promise.resolve(body),
  };
}

export function paperFixture(n = 6): Paper[] {
  // Deliberately not sorted by anything the client could recompute:
  // the rendered order must come from the server, not the client.
  return Array.from({ length: n }, (_, i) => ({
    id: `p${String(i).padStart(2, "0")}`,
    title: `Paper number ${i}`,
    abstract: `Abstract text for paper ${i}.`,
    submitted: "2026-08-10",
    authors: [`Author ${i}`, "Coauthor, B."],
    categories: [i % 2 === 0 ? "hep-ph" : "astro-ph"],
    score: [0.2, 0.9, 0.1, 0.7, 0.4, 0.8][i % 6],
  }));
}

/** Waits until queued microtasks and pending promises settle. */
export async function settle(rounds = 10): Promise<void> {
  for (let i = 0; i < rounds; i++) await Promise.resolve();
}
