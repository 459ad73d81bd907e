// Pure DOM construction from API payloads. Everything user-visible is set via
// textContent, so payload text is rendered verbatim and cannot inject markup.

import type { MethodPanelState } from "./state.js";
import type { ItemDetail, RecommendResponse, ResultItem } from "./types.js";
import { formatScore } from "./types.js";

const PASSAGE_PREVIEW_CHARS = 160;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderReformulation(response: RecommendResponse): HTMLElement {
  const container = el("div", "reformulation");
  const { reformulation } = response;
  if (reformulation.segments.length === 0) {
    container.appendChild(el("p", "reformulation-none", "no reformulation"));
    return container;
  }
  if (reformulation.elaborations.length > 0) {
    const list = el("dl", "elaborations");
    for (const elaboration of reformulation.elaborations) {
      list.appendChild(el("dt", "elaboration-title", elaboration.title));
      list.appendChild(el("dd", "elaboration-body", elaboration.body));
    }
    container.appendChild(list);
  } else {
    const list = el("ul", "segments");
    for (const segment of reformulation.segments) {
      list.appendChild(el("li", "segment", segment));
    }
    container.appendChild(list);
  }
  return container;
}

function renderEvidence(item: ResultItem): HTMLElement {
  // Contributing passages arrive ordered best-first; render them as-is.
  const table = el("table", "evidence");
  for (const passage of item.passages) {
    const row = el("tr", "evidence-row");
    row.dataset.passageId = passage.passage_id;
    row.appendChild(el("td", "evidence-score", formatScore(passage.score)));
    const cell = el("td", "evidence-text");
    if (passage.text.length > PASSAGE_PREVIEW_CHARS) {
      cell.appendChild(el("span", "evidence-preview", passage.text.slice(0, PASSAGE_PREVIEW_CHARS)));
      const expand = el("details", "evidence-more");
      expand.appendChild(el("summary", undefined, "…"));
      expand.appendChild(el("span", "evidence-rest", passage.text.slice(PASSAGE_PREVIEW_CHARS)));
      cell.appendChild(expand);
    } else {
      cell.textContent = passage.text;
    }
    row.appendChild(cell);
    table.appendChild(row);
  }
  return table;
}

export function renderResultItem(item: ResultItem): HTMLElement {
  const details = el("details", "result");
  details.dataset.itemId = item.item_id;
  const summary = el("summary", "result-summary");
  summary.appendChild(el("span", "result-rank", String(item.rank)));
  summary.appendChild(el("span", "result-name", item.name));
  summary.appendChild(el("span", "result-score", formatScore(item.score)));
  details.appendChild(summary);
  details.appendChild(renderEvidence(item));
  const fullView = el("button", "inspect-item", "all passages");
  fullView.dataset.itemId = item.item_id;
  details.appendChild(fullView);
  return details;
}

export function renderPanel(panel: MethodPanelState): HTMLElement {
  const section = el("section", "panel");
  section.dataset.method = panel.method;
  section.appendChild(el("h2", "panel-method", panel.method));
  if (panel.loading) {
    section.appendChild(el("p", "panel-loading", "loading…"));
    return section;
  }
  if (panel.error !== null) {
    section.appendChild(el("p", "panel-error", panel.error));
    return section;
  }
  if (panel.response === null) {
    return section;
  }
  section.appendChild(renderReformulation(panel.response));
  const list = el("ol", "results");
  for (const item of panel.response.results) {
    const entry = el("li");
    entry.appendChild(renderResultItem(item));
    list.appendChild(entry);
  }
  section.appendChild(list);
  return section;
}

export function renderPanels(panels: MethodPanelState[]): HTMLElement {
  const container = el("div", "panels");
  for (const panel of panels) {
    container.appendChild(renderPanel(panel));
  }
  return container;
}

/** Full-item drawer fetched from GET /api/items/{id}. */
export function renderItemDetail(item: ItemDetail): HTMLElement {
  const drawer = el("aside", "item-drawer");
  drawer.dataset.itemId = item.item_id;
  drawer.appendChild(el("h3", "item-drawer-name", item.name));
  const list = el("ul", "item-passages");
  for (const passage of item.passages) {
    const row = el("li", "item-passage", passage.text);
    row.dataset.passageId = passage.passage_id;
    list.appendChild(row);
  }
  drawer.appendChild(list);
  return drawer;
}
