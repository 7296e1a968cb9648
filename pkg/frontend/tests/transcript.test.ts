import { describe, expect, it } from "vitest";

import { appendBubble, appendNotice } from "../src/transcript.js";

describe("appendBubble", () => {
  it("appends user and assistant bubbles in order", () => {
    const container = document.createElement("div");
    appendBubble(container, { role: "user", text: "is it organic?" });
    appendBubble(container, { role: "assistant", text: "yes", sources: [] });
    const bubbles = [...container.querySelectorAll(".bubble")];
    expect(bubbles.length).toBe(2);
    expect(bubbles[0].className).toContain("bubble-user");
    expect(bubbles[1].className).toContain("bubble-assistant");
  });

  it("every sourced assistant bubble carries one chip per source", () => {
    const container = document.createElement("div");
    const sources = [
      { source_id: "rust.md", chunk_id: "rust.md#0" },
      { source_id: "phoma.md", chunk_id: "phoma.md#1" },
    ];
    const bubble = appendBubble(container, {
      role: "assistant", text: "grounded answer", sources,
    });
    expect(bubble.querySelectorAll(".source-chip").length).toBe(2);
  });

  it("assistant bubble without sources has no chip row", () => {
    const container = document.createElement("div");
    const bubble = appendBubble(container, { role: "assistant", text: "plain" });
    expect(bubble.querySelector(".bubble-sources")).toBeNull();
  });

  it("text content is inserted as text, not markup", () => {
    const container = document.createElement("div");
    const bubble = appendBubble(container, {
      role: "assistant", text: "<img src=x onerror=alert(1)>",
    });
    expect(bubble.querySelector("img")).toBeNull();
  });
});

describe("appendNotice", () => {
  it("renders an inline notice bubble", () => {
    const container = document.createElement("div");
    appendNotice(container, "session expired");
    expect(container.querySelector(".bubble-notice")?.textContent).toBe(
      "session expired");
  });
});
