// @vitest-environment happy-dom
import { describe, expect, it, vi } from "vitest";

import { renderExplanationPanel, renderItemList, renderResponseBrowser } from "../src/render.js";
import type { PanelState } from "../src/state.js";
import type { ExplanationPayload, ItemSummary, Label, ResponsesPage } from "../src/types.js";

const items: ItemSummary[] = [
  {
    item_id: "toy1",
    score_min: 0,
    score_max: 2,
    prompt_text: "p",
    response_count: 50,
    component_count: 6,
    has_features: true,
    has_model: true,
  },
];

function payload(): ExplanationPayload {
  const labels: Label[] = [2, 0, 1];
  return {
    response_id: "r1",
    predicted_score: 2,
    eta: 1.95,
    thresholds: [0.4, 1.6],
    rows: labels.map((label, i) => ({
      component_id: `C${i + 1}`,
      component_text: `claim ${i + 1}`,
      label,
      contribution: 0.65,
      overridden: i === 1,
    })),
    counterfactuals: [
      {
        component_id: "C1",
        alternative_label: 0,
        new_eta: 0.95,
        new_score: 1,
        score_changed: true,
      },
    ],
    item_id: "toy1",
    gold_score: 2,
    base_labels: [
      { component_id: "C1", label: 2 },
      { component_id: "C2", label: 0 },
      { component_id: "C3", label: 1 },
    ],
  };
}

function panelState(overrides: Partial<PanelState> = {}): PanelState {
  const p = payload();
  return { phase: "clean", base: p, view: p, pending: new Map(), error: null, ...overrides };
}

const noop = { onToggle: () => undefined, onReset: () => undefined, onPersist: () => undefined };

describe("item list", () => {
  it("shows an empty state for an empty workspace", () => {
    const node = renderItemList([], null, () => undefined);
    expect(node.textContent).toContain("No items in this workspace yet");
  });

  it("lists items and fires the selection callback", () => {
    const onSelect = vi.fn();
    const node = renderItemList(items, null, onSelect);
    const button = node.querySelector("button")!;
    button.click();
    expect(onSelect).toHaveBeenCalledWith("toy1");
  });
});

describe("response browser", () => {
  function page(): ResponsesPage {
    return {
      item_id: "toy1",
      split: null,
      page: 2,
      page_size: 2,
      total: 6,
      total_pages: 3,
      responses: [
        { response_id: "1001", split: "train", text: "a", gold_score: 2, predicted_score: 2 },
        { response_id: "1002", split: "valid", text: "b", gold_score: 0, predicted_score: 2 },
      ],
    };
  }

  it("shows pager state straight from the server page", () => {
    const node = renderResponseBrowser(page(), {
      split: "",
      disagreementsOnly: false,
      selected: null,
      onPage: () => undefined,
      onFilter: () => undefined,
      onSelect: () => undefined,
    });
    expect(node.textContent).toContain("page 2 / 3");
    expect(node.querySelectorAll("tr").length).toBe(3); // header + 2 rows
  });

  it("disagreement filter keeps exactly the mismatched rows", () => {
    const node = renderResponseBrowser(page(), {
      split: "",
      disagreementsOnly: true,
      selected: null,
      onPage: () => undefined,
      onFilter: () => undefined,
      onSelect: () => undefined,
    });
    const rows = [...node.querySelectorAll("tr")].slice(1);
    expect(rows).toHaveLength(1);
    expect(rows[0].textContent).toContain("1002");
  });

  it("pagination buttons call back with the right page", () => {
    const onPage = vi.fn();
    const node = renderResponseBrowser(page(), {
      split: "",
      disagreementsOnly: false,
      selected: null,
      onPage,
      onFilter: () => undefined,
      onSelect: () => undefined,
    });
    const buttons = [...node.querySelectorAll(".pager button")] as HTMLButtonElement[];
    buttons[0].click();
    buttons[1].click();
    expect(onPage).toHaveBeenNthCalledWith(1, 1);
    expect(onPage).toHaveBeenNthCalledWith(2, 3);
  });
});

describe("explanation panel", () => {
  it("renders one checklist row per component", () => {
    const node = renderExplanationPanel(panelState(), noop);
    expect(node.querySelectorAll(".component-row")).toHaveLength(3);
    expect(node.querySelector("#predicted-score")!.textContent).toBe("2");
  });

  it("shows the score straight from the payload, never recomputed", () => {
    const p = payload();
    p.predicted_score = 42; // inconsistent with labels on purpose
    const node = renderExplanationPanel(panelState({ base: p, view: p }), noop);
    expect(node.querySelector("#predicted-score")!.textContent).toBe("42");
  });

  it("marks overridden rows and pending edits", () => {
    const state = panelState({ pending: new Map([["C1", 0 as Label]]), phase: "pending-whatif" });
    const node = renderExplanationPanel(state, noop);
    const badges = [...node.querySelectorAll(".badge")].map((b) => b.textContent);
    expect(badges).toContain("overridden");
    expect(badges).toContain("pending");
    // the pending label is displayed on the toggle button
    const toggle = node.querySelector('[data-component="C1"]')!;
    expect(toggle.textContent).toBe("✗");
  });

  it("lists exactly the score-changing counterfactual hints", () => {
    const node = renderExplanationPanel(panelState(), noop);
    const hints = [...node.querySelectorAll(".hints li")];
    expect(hints).toHaveLength(1);
    expect(hints[0].textContent).toContain("if instead C1");
    expect(hints[0].textContent).toContain("score would be 1");
  });

  it("toggle clicks call back with the component id", () => {
    const onToggle = vi.fn();
    const node = renderExplanationPanel(panelState(), { ...noop, onToggle });
    (node.querySelector('[data-component="C2"]') as HTMLButtonElement).click();
    expect(onToggle).toHaveBeenCalledWith("C2");
  });

  it("persist stays disabled without pending edits", () => {
    const node = renderExplanationPanel(panelState(), noop);
    expect((node.querySelector("#persist") as HTMLButtonElement).disabled).toBe(true);
    const withPending = renderExplanationPanel(
      panelState({ pending: new Map([["C1", 1 as Label]]), phase: "pending-whatif" }),
      noop,
    );
    expect((withPending.querySelector("#persist") as HTMLButtonElement).disabled).toBe(false);
  });

  it("renders the error toast", () => {
    const node = renderExplanationPanel(panelState({ phase: "error", error: "HTTP 400: nope" }), noop);
    expect(node.querySelector(".toast.error")!.textContent).toContain("HTTP 400: nope");
  });

  it("positions the eta marker between the thresholds it exceeds", () => {
    const node = renderExplanationPanel(panelState(), noop);
    const marker = node.querySelector(".eta-marker") as HTMLElement;
    const thresholds = [...node.querySelectorAll(".threshold")] as HTMLElement[];
    const left = (element: HTMLElement) => parseFloat(element.style.left);
    // payload: thresholds [0.4, 1.6], eta 1.95 -> marker right of both
    expect(left(marker)).toBeGreaterThan(left(thresholds[0]));
    expect(left(marker)).toBeGreaterThan(left(thresholds[1]));
  });
});
