import { describe, expect, it } from 'vitest';
import { ApiClient } from '../src/api.js';
import { ChatViewModel } from '../src/chatView.js';
import { renderMarkdown } from '../src/markdown.js';
import { EventKind } from '../src/types.js';
import { loadGoldenSession, sseResponse } from './helpers.js';

const golden = loadGoldenSession();
const artifactBase = `/sessions/${golden.session_id}/artifacts`;

function replayAll(): ChatViewModel {
  const vm = new ChatViewModel(artifactBase);
  for (const turn of golden.turns) {
    if (turn.instruction) vm.beginTurn(turn.instruction);
    vm.acceptAll(turn.events);
  }
  return vm;
}

describe('golden session replay', () => {
  it('renders every event kind that occurs in the recording', () => {
    const vm = replayAll();
    const kindsInFixture = new Set<EventKind>(
      golden.turns.flatMap((turn) => turn.events.map((event) => event.kind)),
    );
    expect(kindsInFixture).toContain('agent_text');
    expect(kindsInFixture).toContain('code');
    expect(kindsInFixture).toContain('execution_result');
    expect(kindsInFixture).toContain('suggestion');
    expect(kindsInFixture).toContain('final_response');
    expect(kindsInFixture).toContain('needs_intervention');
    const renderedKinds = new Set(vm.items.map((item) => item.kind));
    for (const kind of kindsInFixture) {
      expect(renderedKinds).toContain(kind);
    }
    // one rendered item per event, plus one user bubble per instruction
    const eventCount = golden.turns.reduce((n, turn) => n + turn.events.length, 0);
    const instructionCount = golden.turns.filter((turn) => turn.instruction).length;
    expect(vm.items).toHaveLength(eventCount + instructionCount);
  });

  it('keeps sequence numbers gapless inside each recorded turn', () => {
    for (const turn of golden.turns) {
      turn.events.forEach((event, index) => expect(event.seq).toBe(index));
    }
  });

  it('ends each recorded turn with exactly one terminal event', () => {
    for (const turn of golden.turns) {
      const terminals = turn.events.filter((event) =>
        ['final_response', 'needs_intervention', 'error'].includes(event.kind),
      );
      expect(terminals).toHaveLength(1);
      expect(turn.events[turn.events.length - 1]).toBe(terminals[0]);
    }
  });

  it('links figure artifacts to the artifact route as thumbnails', () => {
    const vm = new ChatViewModel(artifactBase);
    vm.acceptAll(golden.turns[0]!.events);
    const html = vm.renderHtml();
    expect(html).toContain(`<img class="thumbnail" src="${artifactBase}/bmi_hist.png"`);
  });

  it('renders identically on replay (same log, same markup)', () => {
    expect(replayAll().renderHtml()).toBe(replayAll().renderHtml());
  });
});

describe('intervention editor', () => {
  it('stays closed while the loop is running', () => {
    const vm = new ChatViewModel(artifactBase);
    vm.acceptAll(golden.turns[0]!.events); // turn ends in final_response
    expect(vm.interventionEditor.enabled).toBe(false);
    expect(vm.interventionEditor.code).toBe('');
  });

  it('opens pre-filled with the failing code after needs_intervention', () => {
    const vm = new ChatViewModel(artifactBase);
    vm.acceptAll(golden.turns[0]!.events);
    vm.acceptAll(golden.turns[1]!.events);
    const editor = vm.interventionEditor;
    expect(editor.enabled).toBe(true);
    const lastCodeEvent = [...golden.turns[1]!.events]
      .reverse()
      .find((event) => event.kind === 'code')!;
    expect(editor.code).toBe(lastCodeEvent.payload.code);
  });

  it('submitting corrected code resumes the stream to a final_response', async () => {
    const vm = new ChatViewModel(artifactBase);
    vm.acceptAll(golden.turns[1]!.events);
    expect(vm.interventionEditor.enabled).toBe(true);

    const resumeTurn = golden.turns[2]!;
    const client = new ApiClient('', async (input, init) => {
      expect(input).toBe(`/sessions/${golden.session_id}/intervention`);
      expect(JSON.parse(String(init?.body))).toEqual({
        code: resumeTurn.intervention_code,
      });
      return sseResponse(resumeTurn.events);
    });
    const events = await client.submitIntervention(
      golden.session_id,
      resumeTurn.intervention_code!,
      (event) => vm.accept(event),
    );
    expect(events[events.length - 1]!.kind).toBe('final_response');
    expect(vm.interventionEditor.enabled).toBe(false);
    expect(vm.items[vm.items.length - 1]!.kind).toBe('final_response');
  });
});

describe('report rendering', () => {
  it('renders the markdown with resolved image links', () => {
    const html = renderMarkdown(golden.report.markdown_text, artifactBase);
    expect(golden.report.referenced_artifacts).toContain('bmi_hist.png');
    expect(html).toContain(`<img src="${artifactBase}/bmi_hist.png"`);
    expect(html).toContain('<h1>Data</h1>');
    expect(html).toContain('<h1>Conclusions</h1>');
  });

  it('report download round-trips through the artifact route', async () => {
    const stored = new Map([[golden.report.artifact_name, golden.report.markdown_text]]);
    const client = new ApiClient('', async (input) => {
      const name = decodeURIComponent(String(input).split('/').pop()!);
      return new Response(stored.get(name)!, { status: 200 });
    });
    const blob = await client.downloadArtifact(golden.session_id, golden.report.artifact_name);
    expect(await blob.text()).toBe(golden.report.markdown_text);
  });
});
