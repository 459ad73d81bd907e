import type { ItemDetail, RecommendResponse } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`API error ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
      } catch {
        // keep statusText
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  methods(): Promise<string[]> {
    return this.request<string[]>("/api/methods");
  }

  recommend(query: string, method: string, topK: number): Promise<RecommendResponse> {
    return this.request<RecommendResponse>("/api/recommend", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query, method, top_k: topK }),
    });
  }

  item(itemId: string): Promise<ItemDetail> {
    return this.request<ItemDetail>(`/api/items/${encodeURIComponent(itemId)}`);
  }
}
