// Thin client over the service's JSON endpoints. The UI talks to nothing else.

import type { ProposalBody, SessionInfo, SubgraphPayload, SubmitCounts } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && body.detail) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async createSession(
    split: string,
    criterion: string,
    count: number,
    interactor: string,
    seed = 0,
  ): Promise<SessionInfo> {
    const resp = await fetch(`${this.baseUrl}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ split, criterion, count, interactor, seed }),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp.json();
  }

  /** Next queued sub-graph, or null when the session is exhausted (204). */
  async nextSubgraph(sessionId: string): Promise<SubgraphPayload | null> {
    const resp = await fetch(`${this.baseUrl}/api/session/${sessionId}/next`);
    if (resp.status === 204) return null;
    if (!resp.ok) throw await parseError(resp);
    return resp.json();
  }

  async submitEdges(sessionId: string, proposals: ProposalBody[]): Promise<SubmitCounts> {
    const resp = await fetch(`${this.baseUrl}/api/session/${sessionId}/edges`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(proposals),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp.json();
  }

  async metrics(split: string): Promise<Record<string, unknown>> {
    const resp = await fetch(`${this.baseUrl}/api/metrics/${split}`);
    if (!resp.ok) throw await parseError(resp);
    return resp.json();
  }
}
