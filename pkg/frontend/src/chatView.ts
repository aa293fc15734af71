import { escapeHtml } from './markdown.js';
import { ArtifactRef, ExecutionPayload, TurnEvent, executionPayloadSchema } from './types.js';

export interface ChatItem {
  kind: TurnEvent['kind'] | 'user_message' | 'reconnect_banner';
  html: string;
}

export interface InterventionEditorState {
  enabled: boolean;
  /** Pre-filled with the last failing code when the editor opens. */
  code: string;
}

function renderArtifact(artifact: ArtifactRef, artifactBase: string): string {
  const href = `${artifactBase}/${encodeURIComponent(artifact.name)}`;
  if (artifact.kind === 'figure') {
    return `<a class="artifact" href="${href}"><img class="thumbnail" src="${href}" alt="${escapeHtml(artifact.name)}"></a>`;
  }
  return `<a class="artifact" href="${href}">${escapeHtml(artifact.name)}</a>`;
}

function renderExecution(payload: ExecutionPayload, artifactBase: string): string {
  const parts = [`<div class="execution ${payload.status}">`];
  if (payload.stdout) parts.push(`<pre class="stdout">${escapeHtml(payload.stdout)}</pre>`);
  if (payload.traceback) parts.push(`<pre class="traceback">${escapeHtml(payload.traceback)}</pre>`);
  if (payload.state_reset) parts.push('<div class="notice">kernel was restarted; in-memory state was lost</div>');
  for (const artifact of payload.artifacts) {
    parts.push(renderArtifact(artifact, artifactBase));
  }
  parts.push('</div>');
  return parts.join('');
}

export function renderEvent(event: TurnEvent, artifactBase: string): string {
  const payload = event.payload as Record<string, unknown>;
  switch (event.kind) {
    case 'agent_text':
      return `<div class="bubble agent">${escapeHtml(String(payload.text ?? ''))}</div>`;
    case 'code':
      // read-only by design: the human edits only via the intervention editor
      return `<pre class="code-panel" data-readonly="true"><code>${escapeHtml(String(payload.code ?? ''))}</code></pre>`;
    case 'execution_result':
      return renderExecution(executionPayloadSchema.parse(payload), artifactBase);
    case 'suggestion':
      return `<div class="bubble inspector">${escapeHtml(String(payload.suggestion ?? ''))}</div>`;
    case 'final_response':
      return `<div class="bubble final">${escapeHtml(String(payload.text ?? ''))}</div>`;
    case 'needs_intervention':
      return `<div class="bubble intervention-request">${escapeHtml(String(payload.text ?? ''))}</div>`;
    case 'error':
      return `<div class="banner error">${escapeHtml(String(payload.error ?? ''))}</div>`;
  }
}

/**
 * Orders the chat transcript and owns the intervention editor state.
 * Pure with respect to the transport: the same event log always produces
 * the same item list, so replayed sessions render like live ones.
 */
export class ChatViewModel {
  readonly items: ChatItem[] = [];
  private lastEventKind: TurnEvent['kind'] | null = null;
  private failingCode = '';

  constructor(private readonly artifactBase: string) {}

  beginTurn(instruction: string): void {
    this.items.push({
      kind: 'user_message',
      html: `<div class="bubble user">${escapeHtml(instruction)}</div>`,
    });
  }

  accept(event: TurnEvent): void {
    this.items.push({ kind: event.kind, html: renderEvent(event, this.artifactBase) });
    if (event.kind === 'code') {
      this.failingCode = String((event.payload as Record<string, unknown>).code ?? '');
    }
    this.lastEventKind = event.kind;
  }

  acceptAll(events: TurnEvent[]): void {
    for (const event of events) this.accept(event);
  }

  get interventionEditor(): InterventionEditorState {
    const enabled = this.lastEventKind === 'needs_intervention';
    return { enabled, code: enabled ? this.failingCode : '' };
  }

  streamDropped(): void {
    this.items.push({
      kind: 'reconnect_banner',
      html: '<div class="banner reconnect">connection lost — replaying from the session log</div>',
    });
  }

  renderHtml(): string {
    return this.items.map((item) => item.html).join('\n');
  }
}
