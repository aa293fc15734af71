export { ApiClient, ApiError } from './api.js';
export type { FetchLike } from './api.js';
export { ChatViewModel, renderEvent } from './chatView.js';
export type { ChatItem, InterventionEditorState } from './chatView.js';
export { escapeHtml, renderMarkdown } from './markdown.js';
export { SequenceGapError, SseParser, StreamDropError, readEventStream } from './sse.js';
export * from './types.js';
