import { describe, expect, it } from 'vitest';
import { ApiClient, ApiError } from '../src/api.js';
import { jsonResponse } from './helpers.js';

interface Recorded {
  url: string;
  method: string;
  body?: unknown;
}

function recordingClient(responses: Response[]): { client: ApiClient; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const client = new ApiClient('http://api.test', async (input, init) => {
    calls.push({
      url: String(input),
      method: init?.method ?? 'GET',
      body: typeof init?.body === 'string' ? JSON.parse(init.body) : init?.body,
    });
    return responses.shift() ?? jsonResponse({}, 500);
  });
  return { client, calls };
}

describe('ApiClient routes', () => {
  it('creates sessions via POST /sessions', async () => {
    const { client, calls } = recordingClient([jsonResponse({ id: 'abc' }, 201)]);
    expect(await client.createSession()).toBe('abc');
    expect(calls[0]).toMatchObject({ url: 'http://api.test/sessions', method: 'POST' });
  });

  it('uploads datasets as multipart form data', async () => {
    const { client, calls } = recordingClient([
      jsonResponse({ path: 'x', n_rows: 2, n_cols: 2, columns: [] }),
    ]);
    const profile = await client.uploadDataset('abc', 'toy.csv', 'a,b\n1,2\n');
    expect(profile.n_rows).toBe(2);
    expect(calls[0]!.url).toBe('http://api.test/sessions/abc/data');
    expect(calls[0]!.body).toBeInstanceOf(FormData);
    const part = (calls[0]!.body as FormData).get('file');
    expect(part).toBeInstanceOf(Blob);
  });

  it('builds artifact URLs with encoded names', () => {
    const { client } = recordingClient([]);
    expect(client.artifactUrl('abc', 'my plot.png')).toBe(
      'http://api.test/sessions/abc/artifacts/my%20plot.png',
    );
  });

  it('requests reports with the chosen template', async () => {
    const { client, calls } = recordingClient([
      jsonResponse({
        markdown_text: '# Data',
        referenced_artifacts: [],
        template_name: 'standard_analysis',
        artifact_name: 'report-standard_analysis.md',
      }),
    ]);
    await client.generateReport('abc');
    expect(calls[0]).toMatchObject({
      url: 'http://api.test/sessions/abc/report',
      method: 'POST',
      body: { template: 'standard_analysis' },
    });
  });

  it('drives the knowledge CRUD endpoints', async () => {
    const { client, calls } = recordingClient([
      jsonResponse({ id: '0001' }, 201),
      jsonResponse([{ id: '0001', description: 'd', code: 'c' }]),
      new Response(null, { status: 204 }),
    ]);
    expect(await client.addKnowledge('d', 'c')).toBe('0001');
    expect(await client.listKnowledge()).toHaveLength(1);
    await client.deleteKnowledge('0001');
    expect(calls.map((call) => `${call.method} ${call.url}`)).toEqual([
      'POST http://api.test/knowledge',
      'GET http://api.test/knowledge',
      'DELETE http://api.test/knowledge/0001',
    ]);
  });
});

describe('ApiClient errors', () => {
  it('surfaces the server error detail with the status code', async () => {
    const { client } = recordingClient([
      jsonResponse({ error: 'turn already in flight' }, 409),
    ]);
    const error = await client.createSession().catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(409);
    expect((error as ApiError).message).toContain('turn already in flight');
  });

  it('handles non-JSON error bodies', async () => {
    const { client } = recordingClient([new Response('boom', { status: 502 })]);
    const error = await client.getSession('abc').catch((e) => e);
    expect((error as ApiError).status).toBe(502);
  });
});
