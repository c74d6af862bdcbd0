import type { CohortPayload, SessionView } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function parseOrThrow(response: Response): Promise<SessionView> {
  if (!response.ok) {
    const body = await response.json().catch(() => ({ detail: response.statusText }));
    throw new ApiError(response.status, body.detail ?? response.statusText);
  }
  return response.json();
}

export class ConductClient {
  constructor(private base: string = "") {}

  async createSession(design: Record<string, unknown>): Promise<SessionView> {
    const response = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(design),
    });
    return parseOrThrow(response);
  }

  async getSession(sessionId: string): Promise<SessionView> {
    return parseOrThrow(await fetch(`${this.base}/sessions/${sessionId}`));
  }

  async submitCohort(sessionId: string, payload: CohortPayload): Promise<SessionView> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/cohorts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return parseOrThrow(response);
  }

  transcriptUrl(sessionId: string): string {
    return `${this.base}/sessions/${sessionId}/transcript`;
  }
}
