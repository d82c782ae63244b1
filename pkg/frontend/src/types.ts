// Wire payload types, mirroring the JSON schemas shipped with the
// scoring service (src/anscore/schemas/). The client renders these
// verbatim; it never derives scores or evidence values itself.

export type Label = 0 | 1 | 2;

export interface ItemSummary {
  item_id: string;
  score_min: number;
  score_max: number;
  prompt_text: string;
  response_count: number;
  component_count: number;
  has_features: boolean;
  has_model: boolean;
}

export interface ResponseRow {
  response_id: string;
  split: "train" | "valid" | "test" | "unlabeled";
  text: string;
  gold_score: number | null;
  predicted_score: number | null;
}

export interface ResponsesPage {
  item_id: string;
  split: string | null;
  page: number;
  page_size: number;
  total: number;
  total_pages: number;
  responses: ResponseRow[];
}

export interface ExplanationRow {
  component_id: string;
  component_text: string;
  label: Label;
  contribution: number;
  overridden: boolean;
}

export interface Counterfactual {
  component_id: string;
  alternative_label: Label;
  new_eta: number;
  new_score: number;
  score_changed: boolean;
}

export interface BaseLabel {
  component_id: string;
  label: Label;
}

export interface ExplanationPayload {
  response_id: string;
  predicted_score: number;
  eta: number;
  thresholds: number[];
  rows: ExplanationRow[];
  counterfactuals: Counterfactual[];
  item_id: string;
  gold_score: number | null;
  base_labels: BaseLabel[];
}

export interface WhatIfOverride {
  component_id: string;
  label: Label;
}

export function cycleLabel(label: Label): Label {
  // user input cycles through the ternary scale; this is input handling,
  // not score computation (scores only ever come from the server)
  return ((label + 1) % 3) as Label;
}
