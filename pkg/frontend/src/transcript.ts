// Chat transcript rendering: user and assistant bubbles, with source chips
// under every assistant bubble that carries sources.

import type { SourceRef } from "./api.js";
import { renderSourceChips } from "./chips.js";

export interface TranscriptEntry {
  role: "user" | "assistant";
  text: string;
  sources?: SourceRef[];
}

export function appendBubble(container: HTMLElement, entry: TranscriptEntry): HTMLElement {
  const doc = container.ownerDocument;
  const bubble = doc.createElement("div");
  bubble.className = `bubble bubble-${entry.role}`;

  const text = doc.createElement("div");
  text.className = "bubble-text";
  text.textContent = entry.text;
  bubble.appendChild(text);

  if (entry.role === "assistant" && entry.sources && entry.sources.length > 0) {
    const chips = doc.createElement("div");
    chips.className = "bubble-sources";
    renderSourceChips(chips, entry.sources);
    bubble.appendChild(chips);
  }

  container.appendChild(bubble);
  return bubble;
}

export function appendNotice(container: HTMLElement, message: string): HTMLElement {
  const notice = container.ownerDocument.createElement("div");
  notice.className = "bubble bubble-notice";
  notice.textContent = message;
  container.appendChild(notice);
  return notice;
}
