/**
 * Listing page: date-range picker, sort toggle, and one collapsed row
 * per paper (title + authors). Expanding a row reveals the abstract and
 * records an abstract_expand event; the PDF link records pdf_open and
 * then navigates. Events go through the queue, so a gesture costs at
 * most one POST and network failures never block reading.
 */

import { ApiClient, type Paper, type EventKind, type SortMode, isoTimestamp } from "./api.js";
import { EventQueue, gestureKey } from "./queue.js";
import {
  type DateRange,
  type ListingModel,
  toggleExpanded,
  withError,
  withListing,
  withRange,
  withSort,
} from "./model.js";

export interface ListingDeps {
  api: ApiClient;
  queue: EventQueue;
  /** Follows the PDF link; defaults to a full page navigation. */
  navigate?: (url: string) => void;
  /** Where a paper's PDF lives; defaults to /pdf/<id>. */
  pdfUrl?: (paper: Paper) => string;
  /** Clock for event timestamps. */
  now?: () => Date;
  /** Page size requested from the server. */
  pageSize?: number;
}

export class ListingController {
  model: ListingModel;
  private readonly navigate: (url: string) => void;
  private readonly pdfUrl: (paper: Paper) => string;
  private readonly now: () => Date;
  private readonly pageSize: number;

  constructor(
    private readonly root: HTMLElement,
    private readonly deps: ListingDeps,
    initial: ListingModel,
  ) {
    this.model = initial;
    this.navigate = deps.navigate ?? ((url) => window.location.assign(url));
    this.pdfUrl = deps.pdfUrl ?? ((paper) => `/pdf/${paper.id}`);
    this.now = deps.now ?? (() => new Date());
    this.pageSize = deps.pageSize ?? 200;
  }

  /** Re-fetches the listing for the current range and sort. */
  async refresh(): Promise<void> {
    try {
      const { papers, total } = await this.deps.api.listPapers({
        sort: this.model.sort,
        from: this.model.range.from,
        to: this.model.range.to,
        limit: this.pageSize,
      });
      this.model = withListing(this.model, papers, total);
    } catch (err) {
      this.model = withError(this.model, err instanceof Error ? err.message : String(err));
    }
    this.render();
  }

  /** Switches sort mode, keeping the reader's place in the list. */
  async setSort(sort: SortMode): Promise<void> {
    if (sort === this.model.sort) return;
    const anchor = this.anchorPaperId();
    this.model = withSort(this.model, sort);
    await this.refresh();
    if (anchor !== null) this.scrollToPaper(anchor);
  }

  async setRange(range: DateRange): Promise<void> {
    this.model = withRange(this.model, range);
    await this.refresh();
  }

  /**
   * Toggles a row. The first expansion of a paper records one
   * abstract_expand; collapsing and re-expanding does not repeat it.
   */
  expandRow(paperId: string): void {
    const expanding = !this.model.expanded.has(paperId);
    this.model = toggleExpanded(this.model, paperId);
    if (expanding) this.recordEvent("abstract_expand", paperId);
    this.render();
  }

  /** Records pdf_open, then leaves for the PDF without waiting. */
  openPdf(paper: Paper): void {
    this.recordEvent("pdf_open", paper.id);
    this.navigate(this.pdfUrl(paper));
  }

  private recordEvent(kind: EventKind, paperId: string): void {
    const at = this.now();
    const accepted = this.deps.queue.enqueue(gestureKey(kind, paperId, at), {
      paper_id: paperId,
      kind,
      timestamp: isoTimestamp(at),
    });
    if (accepted) void this.deps.queue.flush();
  }

  /** The first row at or below the current scroll position. */
  private anchorPaperId(): string | null {
    const rows = this.paperRows();
    const top = this.root.scrollTop;
    for (const row of rows) {
      if (row.offsetTop + row.offsetHeight > top) return row.dataset.id ?? null;
    }
    return rows[0]?.dataset.id ?? null;
  }

  private scrollToPaper(paperId: string): void {
    for (const row of this.paperRows()) {
      if (row.dataset.id === paperId) {
        row.scrollIntoView?.();
        return;
      }
    }
  }

  private paperRows(): HTMLElement[] {
    return [...this.root.querySelectorAll<HTMLElement>("li.paper")];
  }

  render(): void {
    const doc = this.root.ownerDocument;
    this.root.replaceChildren(
      this.renderControls(doc),
      this.renderErrorBanner(doc),
      this.renderPapers(doc),
    );
  }

  private renderControls(doc: Document): HTMLElement {
    const bar = doc.createElement("div");
    bar.className = "controls";

    const form = doc.createElement("form");
    form.className = "range-picker";
    const from = doc.createElement("input");
    from.type = "date";
    from.name = "from";
    from.value = this.model.range.from;
    const to = doc.createElement("input");
    to.type = "date";
    to.name = "to";
    to.value = this.model.range.to;
    const show = doc.createElement("button");
    show.type = "submit";
    show.textContent = "Show";
    form.append(from, to, show);
    form.addEventListener("submit", (e) => {
      e.preventDefault();
      if (from.value && to.value) void this.setRange({ from: from.value, to: to.value });
    });

    const sorts = doc.createElement("div");
    sorts.className = "sort-toggle";
    for (const [mode, label] of [
      ["date", "by date"],
      ["personal", "for you"],
    ] as const) {
      const btn = doc.createElement("button");
      btn.type = "button";
      btn.className = `sort-${mode}`;
      btn.textContent = label;
      btn.setAttribute("aria-pressed", String(this.model.sort === mode));
      btn.addEventListener("click", () => void this.setSort(mode));
      sorts.append(btn);
    }

    bar.append(form, sorts);
    return bar;
  }

  private renderErrorBanner(doc: Document): HTMLElement {
    const banner = doc.createElement("p");
    banner.className = "error-banner";
    if (this.model.error === null) banner.hidden = true;
    else banner.textContent = this.model.error;
    return banner;
  }

  private renderPapers(doc: Document): HTMLElement {
    const list = doc.createElement("ul");
    list.className = "papers";
    for (const paper of this.model.papers) {
      list.append(this.renderRow(doc, paper));
    }
    return list;
  }

  private renderRow(doc: Document, paper: Paper): HTMLElement {
    const row = doc.createElement("li");
    row.className = "paper";
    row.dataset.id = paper.id;

    const head = doc.createElement("div");
    head.className = "row-head";
    const title = doc.createElement("span");
    title.className = "title";
    title.textContent = paper.title;
    const authors = doc.createElement("span");
    authors.className = "authors";
    authors.textContent = paper.authors.join(", ");
    head.append(title, authors);

    if (paper.score !== undefined) {
      const score = doc.createElement("span");
      score.className = "score";
      score.textContent = paper.score.toFixed(3);
      head.append(score);
    }

    const pdf = doc.createElement("a");
    pdf.className = "pdf";
    pdf.href = this.pdfUrl(paper);
    pdf.textContent = "PDF";
    pdf.addEventListener("click", (e) => {
      e.preventDefault();
      e.stopPropagation();
      this.openPdf(paper);
    });
    head.append(pdf);

    head.addEventListener("click", () => this.expandRow(paper.id));

    const abstract = doc.createElement("p");
    abstract.className = "abstract";
    abstract.textContent = paper.abstract;
    abstract.hidden = !this.model.expanded.has(paper.id);

    row.append(head, abstract);
    return row;
  }
}
