import { z } from 'zod';

export const artifactRefSchema = z.object({
  name: z.string(),
  kind: z.enum(['figure', 'model', 'data', 'other']),
});

export const executionPayloadSchema = z.object({
  status: z.enum(['success', 'error']),
  stdout: z.string(),
  stderr: z.string(),
  traceback: z.string().nullable(),
  wall_time: z.number(),
  artifacts: z.array(artifactRefSchema),
  state_reset: z.boolean(),
});

export const turnEventSchema = z.object({
  kind: z.enum([
    'agent_text',
    'code',
    'execution_result',
    'suggestion',
    'final_response',
    'needs_intervention',
    'error',
  ]),
  payload: z.record(z.unknown()),
  seq: z.number().int().nonnegative(),
});

export type ArtifactRef = z.infer<typeof artifactRefSchema>;
export type ExecutionPayload = z.infer<typeof executionPayloadSchema>;
export type TurnEvent = z.infer<typeof turnEventSchema>;
export type EventKind = TurnEvent['kind'];

export const TERMINAL_KINDS: ReadonlySet<EventKind> = new Set([
  'final_response',
  'needs_intervention',
  'error',
]);

export interface ColumnProfile {
  name: string;
  inferred_type: string;
  missing_count: number;
}

export interface DatasetProfile {
  path: string;
  n_rows: number;
  n_cols: number;
  columns: ColumnProfile[];
}

export interface ReportDocument {
  markdown_text: string;
  referenced_artifacts: string[];
  template_name: string;
  artifact_name: string;
}

export interface KnowledgeEntry {
  id: string;
  description: string;
  code: string;
}

export interface SessionSummary {
  id: string;
  created_at?: string;
  dataset_path: string | null;
  messages: Array<{ role: string; text: string }>;
  turns: Array<Record<string, unknown>>;
  artifacts: Array<{ name: string; kind: string }>;
}
