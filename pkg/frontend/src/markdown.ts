/**
 * Small markdown renderer for agent reports: headings, fenced code,
 * images, links, inline code, bold, paragraphs. Artifact-relative targets
 * ("artifacts/...") are rewritten against the session's artifact route so
 * downloaded reports show their figures.
 */

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function resolveTarget(target: string, artifactBase: string | undefined): string {
  if (artifactBase && target.startsWith('artifacts/')) {
    return `${artifactBase.replace(/\/+$/, '')}/${target.slice('artifacts/'.length)}`;
  }
  return target;
}

function renderInline(text: string, artifactBase?: string): string {
  let html = escapeHtml(text);
  html = html.replace(
    /!\[([^\]]*)\]\(([^)\s]+)\)/g,
    (_match, alt: string, target: string) =>
      `<img src="${resolveTarget(target, artifactBase)}" alt="${alt}">`,
  );
  html = html.replace(
    /\[([^\]]+)\]\(([^)\s]+)\)/g,
    (_match, label: string, target: string) =>
      `<a href="${resolveTarget(target, artifactBase)}">${label}</a>`,
  );
  html = html.replace(/`([^`]+)`/g, '<code>$1</code>');
  html = html.replace(/\*\*([^*]+)\*\*/g, '<strong>$1</strong>');
  return html;
}

export function renderMarkdown(markdown: string, artifactBase?: string): string {
  const out: string[] = [];
  const lines = markdown.split('\n');
  let paragraph: string[] = [];
  let codeLines: string[] | null = null;

  const flushParagraph = () => {
    if (paragraph.length > 0) {
      out.push(`<p>${renderInline(paragraph.join(' '), artifactBase)}</p>`);
      paragraph = [];
    }
  };

  for (const line of lines) {
    if (codeLines !== null) {
      if (line.startsWith('```')) {
        out.push(`<pre><code>${escapeHtml(codeLines.join('\n'))}</code></pre>`);
        codeLines = null;
      } else {
        codeLines.push(line);
      }
      continue;
    }
    if (line.startsWith('```')) {
      flushParagraph();
      codeLines = [];
      continue;
    }
    const heading = /^(#{1,6})\s+(.*)$/.exec(line);
    if (heading) {
      flushParagraph();
      const level = heading[1]!.length;
      out.push(`<h${level}>${renderInline(heading[2]!, artifactBase)}</h${level}>`);
      continue;
    }
    if (line.trim() === '') {
      flushParagraph();
      continue;
    }
    paragraph.push(line.trim());
  }
  if (codeLines !== null) {
    out.push(`<pre><code>${escapeHtml(codeLines.join('\n'))}</code></pre>`);
  }
  flushParagraph();
  return out.join('\n');
}
