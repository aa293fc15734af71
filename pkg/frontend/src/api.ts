import { readEventStream } from './sse.js';
import {
  DatasetProfile,
  KnowledgeEntry,
  ReportDocument,
  SessionSummary,
  TurnEvent,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok) return response;
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) detail = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

/** Thin typed client over the documented HTTP surface; nothing beyond it. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  async createSession(): Promise<string> {
    const response = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/sessions`, { method: 'POST' }),
    );
    return ((await response.json()) as { id: string }).id;
  }

  async getSession(sessionId: string): Promise<SessionSummary> {
    const response = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`),
    );
    return (await response.json()) as SessionSummary;
  }

  async uploadDataset(
    sessionId: string,
    filename: string,
    content: Blob | string,
  ): Promise<DatasetProfile> {
    const form = new FormData();
    form.append('file', content instanceof Blob ? content : new Blob([content]), filename);
    const response = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/data`, {
        method: 'POST',
        body: form,
      }),
    );
    return (await response.json()) as DatasetProfile;
  }

  async sendMessage(
    sessionId: string,
    text: string,
    onEvent?: (event: TurnEvent) => void,
  ): Promise<TurnEvent[]> {
    return this.streamTurn(`/sessions/${sessionId}/messages`, { text }, onEvent);
  }

  async submitIntervention(
    sessionId: string,
    code: string,
    onEvent?: (event: TurnEvent) => void,
  ): Promise<TurnEvent[]> {
    return this.streamTurn(`/sessions/${sessionId}/intervention`, { code }, onEvent);
  }

  private async streamTurn(
    path: string,
    body: Record<string, string>,
    onEvent?: (event: TurnEvent) => void,
  ): Promise<TurnEvent[]> {
    const response = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}${path}`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(body),
      }),
    );
    if (!response.body) throw new ApiError(response.status, 'response has no body stream');
    return readEventStream(response.body, onEvent);
  }

  artifactUrl(sessionId: string, name: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/artifacts/${encodeURIComponent(name)}`;
  }

  async downloadArtifact(sessionId: string, name: string): Promise<Blob> {
    const response = await raiseForStatus(
      await this.fetchImpl(this.artifactUrl(sessionId, name)),
    );
    return response.blob();
  }

  async generateReport(sessionId: string, template = 'standard_analysis'): Promise<ReportDocument> {
    const response = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/report`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ template }),
      }),
    );
    return (await response.json()) as ReportDocument;
  }

  async listKnowledge(): Promise<KnowledgeEntry[]> {
    const response = await raiseForStatus(await this.fetchImpl(`${this.baseUrl}/knowledge`));
    return (await response.json()) as KnowledgeEntry[];
  }

  async addKnowledge(description: string, code: string): Promise<string> {
    const response = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/knowledge`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ description, code }),
      }),
    );
    return ((await response.json()) as { id: string }).id;
  }

  async deleteKnowledge(entryId: string): Promise<void> {
    await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/knowledge/${entryId}`, { method: 'DELETE' }),
    );
  }
}
