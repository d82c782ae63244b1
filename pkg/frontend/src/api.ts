import type {
  ExplanationPayload,
  ItemSummary,
  ResponsesPage,
  WhatIfOverride,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    public baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable (${String(err)})`);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON body; detail stays generic
    }
    if (!response.ok) {
      const detail =
        body && typeof body === "object" && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  items(): Promise<ItemSummary[]> {
    return this.request("/api/items");
  }

  responses(
    itemId: string,
    opts: { split?: string; page?: number; pageSize?: number } = {},
  ): Promise<ResponsesPage> {
    const params = new URLSearchParams();
    if (opts.split) params.set("split", opts.split);
    if (opts.page) params.set("page", String(opts.page));
    if (opts.pageSize) params.set("page_size", String(opts.pageSize));
    const query = params.toString();
    return this.request(
      `/api/items/${encodeURIComponent(itemId)}/responses${query ? `?${query}` : ""}`,
    );
  }

  explanation(responseId: string): Promise<ExplanationPayload> {
    return this.request(`/api/responses/${encodeURIComponent(responseId)}/explanation`);
  }

  whatif(responseId: string, overrides: WhatIfOverride[]): Promise<ExplanationPayload> {
    return this.request(`/api/responses/${encodeURIComponent(responseId)}/whatif`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ overrides }),
    });
  }

  override(
    responseId: string,
    body: { component_id: string; label: number; author?: string; note?: string },
  ): Promise<ExplanationPayload> {
    return this.request(`/api/responses/${encodeURIComponent(responseId)}/overrides`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
