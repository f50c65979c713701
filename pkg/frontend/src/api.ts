// Typed client for the four session endpoints. The fetch implementation is
// injectable so tests can run against a local mock server.

export interface ItemCard {
  id: number;
  name: string;
}

export interface QueryPayload {
  reference: ItemCard;
  candidates: ItemCard[];
}

export interface NextQueryResponse {
  session_id: string;
  cycle: number;
  queries_answered: number;
  phase: string;
  done: boolean;
  query: QueryPayload | null;
}

export interface SubmitResponse {
  ok: boolean;
  cycle: number;
  queries_answered: number;
}

export interface Snapshot {
  session_id: string;
  cycle: number;
  queries_answered: number;
  names: string[];
  projection: number[][];
  metrics: Record<string, number[]>;
}

export interface CreateSessionResult {
  session_id: string;
  n_items: number;
  query_length: number;
  burn_in: number;
  cycles: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  createSession(body: unknown): Promise<CreateSessionResult> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  nextQuery(sessionId: string): Promise<NextQueryResponse> {
    return this.request(`/sessions/${sessionId}/next-query`);
  }

  submitResponse(sessionId: string, winner: number): Promise<SubmitResponse> {
    return this.request(`/sessions/${sessionId}/responses`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ winner }),
    });
  }

  snapshot(sessionId: string): Promise<Snapshot> {
    return this.request(`/sessions/${sessionId}/snapshot`);
  }
}
