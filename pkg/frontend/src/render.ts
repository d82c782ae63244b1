// DOM construction for the three panes: item list, response browser,
// explanation panel. Pure functions from payloads + state to elements;
// wiring callbacks are injected by main.ts.

import type { PanelState } from "./state.js";
import type {
  ExplanationPayload,
  ItemSummary,
  Label,
  ResponsesPage,
} from "./types.js";

export const LABEL_MARKS: Record<Label, string> = { 0: "✗", 1: "△", 2: "✓" };

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

export function renderItemList(
  items: ItemSummary[],
  selected: string | null,
  onSelect: (itemId: string) => void,
): HTMLElement {
  if (items.length === 0) {
    return el("div", { class: "empty-state" }, [
      "No items in this workspace yet. Run the pipeline (ingest, extract, featurize, train) and reload.",
    ]);
  }
  const list = el("ul", { class: "item-list" });
  for (const item of items) {
    const ready = item.has_model && item.has_features;
    const button = el("button", { class: item.item_id === selected ? "selected" : "" }, [
      `${item.item_id} (${item.response_count} responses, ${item.component_count} components` +
        `${ready ? "" : ", not scoreable yet"})`,
    ]);
    button.disabled = !ready;
    button.onclick = () => onSelect(item.item_id);
    list.append(el("li", {}, [button]));
  }
  return list;
}

export interface BrowserOptions {
  split: string;
  disagreementsOnly: boolean;
  onPage: (page: number) => void;
  onFilter: (split: string, disagreementsOnly: boolean) => void;
  onSelect: (responseId: string) => void;
  selected: string | null;
}

export function renderResponseBrowser(page: ResponsesPage, opts: BrowserOptions): HTMLElement {
  const container = el("div", { class: "browser" });

  const splitSelect = el("select");
  for (const value of ["", "train", "valid", "test", "unlabeled"]) {
    const option = el("option", { value }, [value || "all splits"]);
    if (value === opts.split) option.selected = true;
    splitSelect.append(option);
  }
  splitSelect.onchange = () => opts.onFilter(splitSelect.value, opts.disagreementsOnly);

  const disagree = el("input", { type: "checkbox", id: "disagree" });
  disagree.checked = opts.disagreementsOnly;
  disagree.onchange = () => opts.onFilter(opts.split, disagree.checked);

  container.append(
    el("div", { class: "filters" }, [
      splitSelect,
      disagree,
      el("label", { for: "disagree" }, ["disagreements only (|pred - gold| ≥ 1)"]),
    ]),
  );

  // the disagreement filter narrows the rows of the server page; paging
  // itself always matches the server's pagination
  let rows = page.responses;
  if (opts.disagreementsOnly) {
    rows = rows.filter(
      (r) =>
        r.gold_score !== null &&
        r.predicted_score !== null &&
        Math.abs(r.predicted_score - r.gold_score) >= 1,
    );
  }

  const table = el("table", { class: "responses" });
  table.append(
    el("tr", {}, ["response", "split", "gold", "predicted", ""].map((h) => el("th", {}, [h]))),
  );
  for (const row of rows) {
    const mismatch =
      row.gold_score !== null &&
      row.predicted_score !== null &&
      row.predicted_score !== row.gold_score;
    const open = el("button", {}, ["inspect"]);
    open.onclick = () => opts.onSelect(row.response_id);
    const tr = el("tr", { class: mismatch ? "mismatch" : "" }, [
      el("td", { class: row.response_id === opts.selected ? "selected" : "" }, [row.response_id]),
      el("td", {}, [row.split]),
      el("td", {}, [row.gold_score === null ? "-" : String(row.gold_score)]),
      el("td", {}, [row.predicted_score === null ? "-" : String(row.predicted_score)]),
      el("td", {}, [open]),
    ]);
    tr.title = row.text;
    table.append(tr);
  }
  container.append(table);

  const pager = el("div", { class: "pager" });
  const prev = el("button", {}, ["← prev"]);
  prev.disabled = page.page <= 1;
  prev.onclick = () => opts.onPage(page.page - 1);
  const next = el("button", {}, ["next →"]);
  next.disabled = page.page >= page.total_pages;
  next.onclick = () => opts.onPage(page.page + 1);
  pager.append(prev, ` page ${page.page} / ${page.total_pages} (${page.total} responses) `, next);
  container.append(pager);
  return container;
}

export interface PanelCallbacks {
  onToggle: (componentId: string) => void;
  onReset: () => void;
  onPersist: (author: string, note: string) => void;
}

export function renderExplanationPanel(state: PanelState, cb: PanelCallbacks): HTMLElement {
  const container = el("div", { class: "panel" });
  if (!state.view) {
    container.append(
      el("div", { class: "empty-state" }, [
        state.error ?? "Select a response to see its explanation.",
      ]),
    );
    return container;
  }
  const payload = state.view;

  const scoreLine = el("div", { class: "score-line" }, [
    el("span", { class: "score", id: "predicted-score" }, [String(payload.predicted_score)]),
    ` predicted score`,
    payload.gold_score === null ? "" : ` (gold: ${payload.gold_score})`,
    state.phase === "pending-whatif" ? el("em", {}, ["  what-if, not saved"]) : "",
    state.phase === "persisting" ? el("em", {}, ["  saving..."]) : "",
  ]);
  container.append(scoreLine);
  container.append(renderEtaGauge(payload));

  const list = el("div", { class: "components" });
  for (const row of payload.rows) {
    const pendingLabel = state.pending.get(row.component_id);
    const shown: Label = pendingLabel ?? row.label;
    const toggle = el(
      "button",
      { class: `mark label-${shown}`, "data-component": row.component_id },
      [LABEL_MARKS[shown]],
    );
    toggle.title = "click to cycle 0 → 1 → 2 → 0";
    toggle.onclick = () => cb.onToggle(row.component_id);
    list.append(
      el("div", { class: "component-row" }, [
        toggle,
        el("span", { class: "cid" }, [row.component_id]),
        el("span", { class: "ctext" }, [row.component_text]),
        el("span", { class: "contribution" }, [formatSigned(row.contribution)]),
        pendingLabel !== undefined ? el("em", { class: "badge" }, ["pending"]) : "",
        row.overridden ? el("em", { class: "badge" }, ["overridden"]) : "",
      ]),
    );
  }
  container.append(list);

  const hints = payload.counterfactuals.filter((c) => c.score_changed);
  if (hints.length > 0) {
    const hintList = el("ul", { class: "hints" });
    for (const hint of hints) {
      hintList.append(
        el("li", {}, [
          `if instead ${hint.component_id} were ${LABEL_MARKS[hint.alternative_label]} ` +
            `(label ${hint.alternative_label}), the score would be ${hint.new_score}`,
        ]),
      );
    }
    container.append(el("div", {}, [el("h3", {}, ["if instead…"]), hintList]));
  }

  const author = el("input", { type: "text", placeholder: "author", id: "author" });
  const note = el("input", { type: "text", placeholder: "note", id: "note" });
  const persist = el("button", { id: "persist" }, ["persist overrides"]);
  persist.disabled = state.pending.size === 0 || state.phase === "persisting";
  persist.onclick = () => cb.onPersist(author.value, note.value);
  const reset = el("button", { id: "reset" }, ["reset"]);
  reset.disabled = state.pending.size === 0 && state.phase !== "error";
  reset.onclick = () => cb.onReset();
  container.append(el("div", { class: "controls" }, [author, note, persist, reset]));

  if (state.error) {
    container.append(el("div", { class: "toast error", role: "alert" }, [state.error]));
  }
  return container;
}

function renderEtaGauge(payload: ExplanationPayload): HTMLElement {
  // presentation only: the gauge places the server's eta among the
  // server's thresholds on a linear axis; nothing is recomputed
  const thresholds = payload.thresholds;
  const points = [...thresholds, payload.eta];
  const lo = Math.min(...points) - 1;
  const hi = Math.max(...points) + 1;
  const position = (value: number) => (100 * (value - lo)) / (hi - lo);
  const gauge = el("div", { class: "gauge" });
  for (const t of thresholds) {
    gauge.append(
      el("div", {
        class: "threshold",
        style: `left: ${position(t).toFixed(2)}%`,
        title: `threshold ${t.toFixed(3)}`,
      }),
    );
  }
  gauge.append(
    el("div", {
      class: "eta-marker",
      style: `left: ${position(payload.eta).toFixed(2)}%`,
      title: `eta ${payload.eta.toFixed(3)}`,
    }),
  );
  return el("div", { class: "gauge-wrap" }, [
    gauge,
    el("div", { class: "gauge-caption" }, [
      `eta = ${formatSigned(payload.eta)}  thresholds [${thresholds
        .map((t) => t.toFixed(3))
        .join(", ")}]`,
    ]),
  ]);
}

export function formatSigned(value: number): string {
  return `${value >= 0 ? "+" : ""}${value.toFixed(3)}`;
}
