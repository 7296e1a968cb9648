// Source chips: one clickable chip per source reference on an answer.
// The chip face shows the chunk id; clicking toggles the originating
// document id so provenance is always one tap away.

import type { SourceRef } from "./api.js";

export function renderSourceChips(container: HTMLElement, sources: SourceRef[]): void {
  container.textContent = "";
  for (const source of sources) {
    const chip = container.ownerDocument.createElement("button");
    chip.type = "button";
    chip.className = "source-chip";
    chip.textContent = source.chunk_id;
    chip.title = `from ${source.source_id}`;
    chip.dataset.chunkId = source.chunk_id;
    chip.dataset.sourceId = source.source_id;
    chip.setAttribute("aria-expanded", "false");
    chip.addEventListener("click", () => {
      const expanded = chip.getAttribute("aria-expanded") === "true";
      chip.setAttribute("aria-expanded", String(!expanded));
      chip.textContent = expanded
        ? source.chunk_id
        : `${source.chunk_id} (${source.source_id})`;
    });
    container.appendChild(chip);
  }
}
