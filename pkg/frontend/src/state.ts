import type { ApiClient } from "./api.js";
import type { RecommendResponse } from "./types.js";

export interface MethodPanelState {
  method: string;
  loading: boolean;
  error: string | null;
  response: RecommendResponse | null;
}

export interface ExplorerState {
  query: string;
  topK: number;
  methods: string[];
  panels: MethodPanelState[];
}

type Listener = (state: ExplorerState) => void;

/**
 * Holds what the explorer shows: the query, the selected methods, and one
 * panel per method with its last response. Per-method requests run
 * concurrently and responses for superseded queries are discarded by
 * sequence number, so panels never show results for a stale query.
 */
export class ExplorerStore {
  private state: ExplorerState = { query: "", topK: 10, methods: [], panels: [] };
  private listeners: Listener[] = [];
  private sequence = 0;

  constructor(private readonly api: ApiClient) {}

  snapshot(): ExplorerState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((entry) => entry !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private setPanel(method: string, patch: Partial<MethodPanelState>): void {
    this.state = {
      ...this.state,
      panels: this.state.panels.map((panel) =>
        panel.method === method ? { ...panel, ...patch } : panel,
      ),
    };
    this.emit();
  }

  /** Issue one request per method; resolves when every panel settled. */
  async submitQuery(query: string, methods: string[], topK: number): Promise<void> {
    const seq = ++this.sequence;
    this.state = {
      query,
      topK,
      methods: [...methods],
      panels: methods.map((method) => ({ method, loading: true, error: null, response: null })),
    };
    this.emit();

    await Promise.all(
      methods.map(async (method) => {
        try {
          const response = await this.api.recommend(query, method, topK);
          if (seq !== this.sequence) return; // superseded by a newer query
          this.setPanel(method, { loading: false, response });
        } catch (error) {
          if (seq !== this.sequence) return;
          this.setPanel(method, { loading: false, error: String(error) });
        }
      }),
    );
  }
}
