/**
 * View-model for the listing page: the papers exactly as the server
 * returned them, the active date range and sort mode, which rows are
 * expanded, and a non-blocking error banner. The client never reorders
 * papers — ranking belongs to the server.
 */

import type { Paper, SortMode } from "./api.js";

/** Inclusive ISO date range; a single day has from === to. */
export interface DateRange {
  from: string;
  to: string;
}

export function singleDay(day: string): DateRange {
  return { from: day, to: day };
}

export interface ListingModel {
  sort: SortMode;
  range: DateRange;
  /** Exactly the server order. */
  papers: Paper[];
  total: number;
  expanded: ReadonlySet<string>;
  error: string | null;
}

export function initialModel(range: DateRange, sort: SortMode = "personal"): ListingModel {
  return { sort, range, papers: [], total: 0, expanded: new Set(), error: null };
}

/** Replaces the rows, keeping expansion state for ids still present. */
export function withListing(model: ListingModel, papers: Paper[], total: number): ListingModel {
  const ids = new Set(papers.map((p) => p.id));
  const expanded = new Set([...model.expanded].filter((id) => ids.has(id)));
  return { ...model, papers, total, expanded, error: null };
}

export function withError(model: ListingModel, message: string): ListingModel {
  return { ...model, error: message };
}

export function withSort(model: ListingModel, sort: SortMode): ListingModel {
  return { ...model, sort };
}

export function withRange(model: ListingModel, range: DateRange): ListingModel {
  return { ...model, range };
}

export function toggleExpanded(model: ListingModel, paperId: string): ListingModel {
  const expanded = new Set(model.expanded);
  if (expanded.has(paperId)) expanded.delete(paperId);
  else expanded.add(paperId);
  return { ...model, expanded };
}
