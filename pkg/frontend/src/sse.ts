import { TurnEvent, turnEventSchema } from './types.js';

/** The server closed the connection before a terminal event arrived. */
export class StreamDropError extends Error {
  constructor(public readonly received: TurnEvent[]) {
    super(`stream dropped after ${received.length} events`);
    this.name = 'StreamDropError';
  }
}

export class SequenceGapError extends Error {
  constructor(expected: number, got: number) {
    super(`event sequence gap: expected seq ${expected}, got ${got}`);
    this.name = 'SequenceGapError';
  }
}

/**
 * Incremental server-sent-events parser. Feed raw text chunks in whatever
 * sizes the network delivers; complete `data:` events come out, partial
 * frames stay buffered until their terminating blank line arrives.
 */
export class SseParser {
  private buffer = '';
  private nextSeq = 0;

  feed(chunk: string): TurnEvent[] {
    this.buffer += chunk;
    const events: TurnEvent[] = [];
    for (;;) {
      const boundary = this.buffer.indexOf('\n\n');
      if (boundary === -1) break;
      const frame = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const data = frame
        .split('\n')
        .filter((line) => line.startsWith('data: '))
        .map((line) => line.slice('data: '.length))
        .join('\n');
      if (!data) continue;
      const event = turnEventSchema.parse(JSON.parse(data));
      if (event.seq !== this.nextSeq) {
        throw new SequenceGapError(this.nextSeq, event.seq);
      }
      this.nextSeq += 1;
      events.push(event);
    }
    return events;
  }
}

/**
 * Drain a streaming response body into parsed events, enforcing gapless
 * sequence numbers and exactly one terminal event. A body that ends without
 * a terminal event raises StreamDropError so the caller can offer replay.
 */
export async function readEventStream(
  body: ReadableStream<Uint8Array>,
  onEvent?: (event: TurnEvent) => void,
): Promise<TurnEvent[]> {
  const parser = new SseParser();
  const decoder = new TextDecoder();
  const reader = body.getReader();
  const events: TurnEvent[] = [];
  let sawTerminal = false;
  for (;;) {
    const { done, value } = await reader.read();
    const text = done ? decoder.decode() : decoder.decode(value, { stream: true });
    for (const event of parser.feed(text)) {
      events.push(event);
      if (event.kind === 'final_response' || event.kind === 'needs_intervention' || event.kind === 'error') {
        sawTerminal = true;
      }
      onEvent?.(event);
    }
    if (done) break;
  }
  if (!sawTerminal) throw new StreamDropError(events);
  return events;
}
