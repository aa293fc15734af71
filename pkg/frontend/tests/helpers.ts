import { readFileSync } from 'fs';
import { dirname, join } from 'path';
import { fileURLToPath } from 'url';
import { TurnEvent } from '../src/types.js';

const here = dirname(fileURLToPath(import.meta.url));

export interface GoldenTurn {
  instruction?: string;
  intervention_code?: string;
  events: TurnEvent[];
}

export interface GoldenSession {
  session_id: string;
  profile: { n_rows: number; n_cols: number };
  turns: GoldenTurn[];
  report: {
    markdown_text: string;
    referenced_artifacts: string[];
    template_name: string;
    artifact_name: string;
  };
}

export function loadGoldenSession(): GoldenSession {
  const raw = readFileSync(join(here, 'fixtures', 'golden-session.json'), 'utf8');
  return JSON.parse(raw) as GoldenSession;
}

export function encodeSse(events: TurnEvent[]): string {
  return events.map((event) => `data: ${JSON.stringify(event)}\n\n`).join('');
}

/** Stream the SSE text in deliberately awkward chunk sizes. */
export function sseResponse(events: TurnEvent[], chunkSize = 7): Response {
  const text = encodeSse(events);
  const encoder = new TextEncoder();
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      for (let i = 0; i < text.length; i += chunkSize) {
        controller.enqueue(encoder.encode(text.slice(i, i + chunkSize)));
      }
      controller.close();
    },
  });
  return new Response(stream, {
    status: 200,
    headers: { 'content-type': 'text/event-stream' },
  });
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}
