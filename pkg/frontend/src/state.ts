// Explanation panel state machine.
//
// Phases: clean -> pending-whatif -> persisting -> clean, with error as a
// recoverable side state. The displayed payload ("view") is always the
// most recent server response: label toggles are optimistic *inputs*, but
// scores, evidence values, and contributions only change when the server
// answers a what-if or override request. A failed request rolls the
// pending edits back to the last acknowledged state.

import { ApiClient } from "./api.js";
import { cycleLabel, type ExplanationPayload, type Label } from "./types.js";

export type Phase = "clean" | "pending-whatif" | "persisting" | "error";

export interface PanelState {
  phase: Phase;
  /** last committed explanation (override log applied, no what-ifs) */
  base: ExplanationPayload | null;
  /** what the panel displays; server-computed, possibly a what-if result */
  view: ExplanationPayload | null;
  /** component -> pending label edit (differs from the base label) */
  pending: ReadonlyMap<string, Label>;
  error: string | null;
}

type Listener = (state: PanelState) => void;

export class ExplanationStore {
  private base: ExplanationPayload | null = null;
  private view: ExplanationPayload | null = null;
  private pending = new Map<string, Label>();
  private phase: Phase = "clean";
  private error: string | null = null;
  private listeners: Listener[] = [];
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private inflight = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly debounceMs: number = 250,
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  get state(): PanelState {
    return {
      phase: this.phase,
      base: this.base,
      view: this.view,
      pending: new Map(this.pending),
      error: this.error,
    };
  }

  private emit(): void {
    const snapshot = this.state;
    for (const listener of this.listeners) listener(snapshot);
  }

  /** Load (or reload) the committed explanation for a response. */
  async load(responseId: string): Promise<void> {
    this.cancelDebounce();
    this.pending.clear();
    this.error = null;
    try {
      const payload = await this.api.explanation(responseId);
      this.base = payload;
      this.view = payload;
      this.phase = "clean";
    } catch (err) {
      this.base = null;
      this.view = null;
      this.phase = "error";
      this.error = String(err);
    }
    this.emit();
  }

  /** Displayed label for a component: pending edit or the base label. */
  displayedLabel(componentId: string): Label {
    const pending = this.pending.get(componentId);
    if (pending !== undefined) return pending;
    const row = this.base?.rows.find((r) => r.component_id === componentId);
    if (!row) throw new Error(`unknown component ${componentId}`);
    return row.label;
  }

  /** Cycle one component's label as a pending what-if (0 -> 1 -> 2 -> 0). */
  toggle(componentId: string): void {
    if (!this.base) return;
    const next = cycleLabel(this.displayedLabel(componentId));
    const baseRow = this.base.rows.find((r) => r.component_id === componentId);
    if (!baseRow) return;
    if (next === baseRow.label) {
      this.pending.delete(componentId);
    } else {
      this.pending.set(componentId, next);
    }
    this.error = null;
    this.scheduleWhatif();
    this.emit();
  }

  /** Drop all pending edits; the panel shows the committed state again. */
  reset(): void {
    this.cancelDebounce();
    this.pending.clear();
    this.view = this.base;
    this.phase = this.base ? "clean" : this.phase;
    this.error = null;
    this.emit();
  }

  private cancelDebounce(): void {
    if (this.debounceTimer !== null) {
      clearTimeout(this.debounceTimer);
      this.debounceTimer = null;
    }
  }

  private scheduleWhatif(): void {
    this.cancelDebounce();
    if (this.pending.size === 0) {
      this.view = this.base;
      this.phase = "clean";
      return;
    }
    this.phase = "pending-whatif";
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      void this.runWhatif();
    }, this.debounceMs);
  }

  /** Resolves when no what-if request is scheduled or in flight. */
  async settle(): Promise<void> {
    while (this.debounceTimer !== null || this.inflight > 0) {
      if (this.debounceTimer !== null) {
        this.cancelDebounce();
        await this.runWhatif();
      } else {
        await new Promise((resolve) => setTimeout(resolve, 5));
      }
    }
  }

  private async runWhatif(): Promise<void> {
    if (!this.base || this.pending.size === 0) return;
    const snapshot = new Map(this.pending);
    const overrides = [...snapshot.entries()].map(([component_id, label]) => ({
      component_id,
      label,
    }));
    this.inflight += 1;
    try {
      const payload = await this.api.whatif(this.base.response_id, overrides);
      // a newer edit may have superseded this request while it ran
      if (this.mapsEqual(snapshot, this.pending)) {
        this.view = payload;
        this.phase = "pending-whatif";
        this.error = null;
      }
    } catch (err) {
      // rollback: drop the pending edits, show the committed state
      this.pending.clear();
      this.view = this.base;
      this.phase = "error";
      this.error = String(err);
    } finally {
      this.inflight -= 1;
      this.emit();
    }
  }

  /** Persist every pending edit as an override, then show the new base. */
  async persist(author: string, note: string): Promise<void> {
    if (!this.base || this.pending.size === 0) return;
    this.cancelDebounce();
    const edits = new Map(this.pending);
    this.phase = "persisting";
    this.emit();
    this.inflight += 1;
    try {
      let payload: ExplanationPayload | null = null;
      for (const [component_id, label] of edits) {
        payload = await this.api.override(this.base.response_id, {
          component_id,
          label,
          author,
          note,
        });
      }
      if (payload) {
        this.base = payload;
        this.view = payload;
      }
      this.pending.clear();
      this.phase = "clean";
      this.error = null;
    } catch (err) {
      // rollback to the committed explanation; pending edits are dropped
      this.pending.clear();
      this.view = this.base;
      this.phase = "error";
      this.error = String(err);
    } finally {
      this.inflight -= 1;
      this.emit();
    }
  }

  private mapsEqual(a: Map<string, Label>, b: Map<string, Label>): boolean {
    if (a.size !== b.size) return false;
    for (const [key, value] of a) {
      if (b.get(key) !== value) return false;
    }
    return true;
  }
}
